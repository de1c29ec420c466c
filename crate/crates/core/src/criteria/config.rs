/// All sensor configurations `η ∈ {0,1}^{n_exp}` encoded as bit masks, bit
/// `d` set when sensor `d` is active. Index 0 is the null configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigTable {
    sensors: usize,
    active: Vec<Vec<usize>>,
}

impl ConfigTable {
    pub fn new(sensors: usize) -> Self {
        assert!(sensors <= 8, "at most 8 sensors are supported");
        let active = (0..1usize << sensors)
            .map(|mask| (0..sensors).filter(|d| mask >> d & 1 == 1).collect())
            .collect();
        Self { sensors, active }
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Active sensor indices of configuration `eta`.
    pub fn active(&self, eta: usize) -> &[usize] {
        &self.active[eta]
    }
}

/// `π_η(w) = Π_d w_d^{η_d} (1 − w_d)^{1−η_d}` for every bit mask `η`.
pub fn config_weights(w: &[f64]) -> Vec<f64> {
    let mut out = vec![1.0];
    for &wd in w {
        let mut next = Vec::with_capacity(out.len() * 2);
        next.extend(out.iter().map(|p| p * (1.0 - wd)));
        next.extend(out.iter().map(|p| p * wd));
        out = next;
    }
    out
}

/// `∂π_η/∂w_d` for every `η`, row-major `n_exp × 2^{n_exp}`.
pub(crate) fn config_weight_derivatives(w: &[f64]) -> Vec<f64> {
    let n = w.len();
    let size = 1usize << n;
    let mut out = vec![0.0; n * size];
    for d in 0..n {
        for eta in 0..size {
            let mut p = if eta >> d & 1 == 1 { 1.0 } else { -1.0 };
            for (e, &we) in w.iter().enumerate() {
                if e != d {
                    p *= if eta >> e & 1 == 1 { we } else { 1.0 - we };
                }
            }
            out[d * size + eta] = p;
        }
    }
    out
}
