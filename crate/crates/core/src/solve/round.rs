use crate::criteria::RelaxedDesign;
use crate::dynamics::{Model, ProblemSpec};
use crate::error::{OedError, Result};

/// One measurement: sensor `sensor` read at the midpoint of weight cell `cell`.
#[derive(Clone, Debug, PartialEq)]
pub struct Activation {
    pub cell: usize,
    pub time: f64,
    pub sensor: usize,
}

/// Controls plus a budgeted list of (time, sensor) measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDesign {
    pub u: Vec<f64>,
    /// Sorted by time, then sensor.
    pub activations: Vec<Activation>,
}

impl DiscreteDesign {
    pub fn new<M: Model>(spec: &ProblemSpec<M>, u: Vec<f64>, mut activations: Vec<Activation>) -> Result<Self> {
        activations.sort_by(|a, b| a.cell.cmp(&b.cell).then(a.sensor.cmp(&b.sensor)));
        let d = Self { u, activations };
        d.validate(spec)?;
        Ok(d)
    }

    /// Activations of sensor `d`.
    pub fn count_for_sensor(&self, d: usize) -> usize {
        self.activations.iter().filter(|a| a.sensor == d).count()
    }

    pub fn validate<M: Model>(&self, spec: &ProblemSpec<M>) -> Result<()> {
        spec.check_controls(&self.u)?;
        if self.activations.len() > spec.budget {
            return Err(OedError::Argument(format!(
                "{} activations exceed the budget {}",
                self.activations.len(),
                spec.budget
            )));
        }
        for a in &self.activations {
            if a.cell >= spec.weight_cells || a.sensor >= spec.sensor_count() {
                return Err(OedError::Argument(format!(
                    "activation (cell {}, sensor {}) outside the design grid",
                    a.cell, a.sensor
                )));
            }
            if (a.time - spec.cell_midpoint(a.cell)).abs() > 1e-9 * (1.0 + spec.horizon) {
                return Err(OedError::Argument(format!(
                    "activation time {} is not the midpoint of cell {}",
                    a.time, a.cell
                )));
            }
        }
        for (i, a) in self.activations.iter().enumerate() {
            for b in &self.activations[..i] {
                if a.cell == b.cell && a.sensor == b.sensor {
                    return Err(OedError::Argument("duplicate activation".into()));
                }
                if a.cell != b.cell && (a.time - b.time).abs() < spec.min_separation - 1e-9 {
                    return Err(OedError::Argument(format!(
                        "activation times {} and {} are closer than {}",
                        b.time, a.time, spec.min_separation
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Greedy rounding: highest relaxed weight first (ties: earlier cell, then
/// lower sensor), accepting a pair when its time coincides with an already
/// selected time or keeps the minimum separation to all of them.
pub fn round_design<M: Model>(relaxed: &RelaxedDesign, spec: &ProblemSpec<M>) -> Result<DiscreteDesign> {
    let ns = spec.sensor_count();
    if relaxed.w.len() != spec.weight_len() {
        return Err(OedError::Argument("relaxed design does not match the problem".into()));
    }
    let mut candidates: Vec<(usize, usize, f64)> = (0..spec.weight_cells)
        .flat_map(|c| (0..ns).map(move |d| (c, d)))
        .map(|(c, d)| (c, d, relaxed.w[c * ns + d]))
        .filter(|(_, _, w)| *w > 0.0)
        .collect();
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<Activation> = Vec::new();
    let mut cells: Vec<usize> = Vec::new();
    for (c, d, _) in candidates {
        if chosen.len() >= spec.budget {
            break;
        }
        let t = spec.cell_midpoint(c);
        let ok = cells.contains(&c)
            || cells
                .iter()
                .all(|&o| (spec.cell_midpoint(o) - t).abs() >= spec.min_separation - 1e-9);
        if ok {
            if !cells.contains(&c) {
                cells.push(c);
            }
            chosen.push(Activation {
                cell: c,
                time: t,
                sensor: d,
            });
        }
    }
    DiscreteDesign::new(spec, relaxed.u.clone(), chosen)
}
