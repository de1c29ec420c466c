use super::model::Model;
use crate::error::{OedError, Result};
use crate::measure::NoiseSpec;

/// Default number of RK4 steps inside one weight cell.
pub const DEFAULT_STEPS_PER_CELL: usize = 10;

/// Full experimental setup.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec<M> {
    pub model: M,
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub u_lower: Vec<f64>,
    pub u_upper: Vec<f64>,
    /// Number of piecewise-constant control intervals `N_u`.
    pub control_intervals: usize,
    /// Number of piecewise-constant sampling-weight cells `N_w`.
    pub weight_cells: usize,
    pub steps_per_cell: usize,
    pub noise: NoiseSpec,
    /// Maximum number of (time, sensor) activations.
    pub budget: usize,
    pub min_separation: f64,
}

impl<M: Model> ProblemSpec<M> {
    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn param_dim(&self) -> usize {
        self.model.param_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.model.control_dim()
    }

    pub fn sensor_count(&self) -> usize {
        self.model.sensor_count()
    }

    /// Length of the control block of the decision vector.
    pub fn control_len(&self) -> usize {
        self.control_intervals * self.control_dim()
    }

    /// Length of the sampling-weight block of the decision vector.
    pub fn weight_len(&self) -> usize {
        self.weight_cells * self.sensor_count()
    }

    pub fn cell_width(&self) -> f64 {
        self.horizon / self.weight_cells as f64
    }

    /// Time of the midpoint of weight cell `c`.
    pub fn cell_midpoint(&self, c: usize) -> f64 {
        self.horizon * (c as f64 + 0.5) / self.weight_cells as f64
    }

    /// Control interval that contains weight cell `c`.
    pub fn control_of_cell(&self, c: usize) -> usize {
        c * self.control_intervals / self.weight_cells
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(
            self.horizon,
            self.weight_cells,
            self.steps_per_cell,
            self.control_intervals,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(OedError::Config(msg));
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return cfg(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.control_intervals == 0 {
            return cfg("control_intervals must be at least 1".into());
        }
        if self.weight_cells == 0 {
            return cfg("weight_cells must be at least 1".into());
        }
        if self.weight_cells % self.control_intervals != 0 {
            return cfg(format!(
                "weight_cells ({}) must be a multiple of control_intervals ({})",
                self.weight_cells, self.control_intervals
            ));
        }
        if self.steps_per_cell < 2 || self.steps_per_cell % 2 != 0 {
            return cfg("steps_per_cell must be even and at least 2".into());
        }
        if self.budget == 0 {
            return cfg("budget must be at least 1".into());
        }
        if !(self.min_separation >= 0.0) {
            return cfg("min_separation must be non-negative".into());
        }
        if self.x0.len() != self.state_dim() {
            return cfg(format!(
                "x0 has {} entries, model state dimension is {}",
                self.x0.len(),
                self.state_dim()
            ));
        }
        if self.param_dim() == 0 {
            return cfg("model must have at least one parameter".into());
        }
        if self.u_lower.len() != self.control_dim() || self.u_upper.len() != self.control_dim() {
            return cfg("control bounds do not match the control dimension".into());
        }
        if self.u_lower.iter().zip(&self.u_upper).any(|(a, b)| !(a <= b)) {
            return cfg("control bounds require lower <= upper".into());
        }
        self.noise.validate()?;
        if self.noise.sensor_count() != self.sensor_count() {
            return cfg(format!(
                "noise given for {} sensors, model has {}",
                self.noise.sensor_count(),
                self.sensor_count()
            ));
        }
        if self.sensor_count() > 8 {
            return cfg("at most 8 sensors are supported".into());
        }
        Ok(())
    }

    /// Checks the control vector length and that every value lies in its box.
    pub fn check_controls(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.control_len() {
            return Err(OedError::Argument(format!(
                "expected {} control values, got {}",
                self.control_len(),
                u.len()
            )));
        }
        let nu = self.control_dim();
        for (i, &v) in u.iter().enumerate() {
            let (lo, hi) = (self.u_lower[i % nu], self.u_upper[i % nu]);
            if !(v >= lo - 1e-12 && v <= hi + 1e-12) {
                return Err(OedError::Argument(format!(
                    "control value {v} at position {i} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Integration grid: `weight_cells · steps_per_cell` uniform RK4 steps.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    pub times: Vec<f64>,
    pub steps_per_cell: usize,
    pub weight_cells: usize,
    pub control_intervals: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, weight_cells: usize, steps_per_cell: usize, control_intervals: usize) -> Self {
        let steps = weight_cells * steps_per_cell;
        let times = (0..=steps)
            .map(|s| horizon * s as f64 / steps as f64)
            .collect();
        Self {
            times,
            steps_per_cell,
            weight_cells,
            control_intervals,
        }
    }

    /// Number of integration steps `S`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn cell_of_step(&self, s: usize) -> usize {
        s / self.steps_per_cell
    }

    pub fn control_of_cell(&self, c: usize) -> usize {
        c * self.control_intervals / self.weight_cells
    }

    pub fn control_of_step(&self, s: usize) -> usize {
        self.control_of_cell(self.cell_of_step(s))
    }

    /// Node index of the midpoint of cell `c`.
    pub fn midpoint_node(&self, c: usize) -> usize {
        c * self.steps_per_cell + self.steps_per_cell / 2
    }

    /// Node index of the left end of cell `c`.
    pub fn cell_start_node(&self, c: usize) -> usize {
        c * self.steps_per_cell
    }
}

/// States on every grid node, row-major `(S + 1) × n_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub state_dim: usize,
    pub states: Vec<f64>,
}

impl Trajectory {
    pub fn state(&self, s: usize) -> &[f64] {
        &self.states[s * self.state_dim..(s + 1) * self.state_dim]
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.state_dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// State sensitivities `G = ∂x/∂θ` on every grid node; each node holds an
/// `n_x × n_θ` row-major block.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityPath {
    pub state_dim: usize,
    pub param_dim: usize,
    pub values: Vec<f64>,
}

impl SensitivityPath {
    pub fn at(&self, s: usize) -> &[f64] {
        let block = self.state_dim * self.param_dim;
        &self.values[s * block..(s + 1) * block]
    }

    /// `∂x_i/∂θ_j` at node `s`.
    pub fn get(&self, s: usize, i: usize, j: usize) -> f64 {
        self.at(s)[i * self.param_dim + j]
    }
}
