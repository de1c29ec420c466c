use crate::dynamics::{Model, ProblemSpec};
use crate::error::{OedError, Result};

/// Piecewise-constant control and relaxed sampling weights.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedDesign {
    /// Row-major `N_u × n_u`.
    pub u: Vec<f64>,
    /// Row-major `N_w × n_exp`, each entry in `[0, 1]`.
    pub w: Vec<f64>,
}

impl RelaxedDesign {
    /// Constant control `u_value` in every component and constant weight `w_value`.
    pub fn constant<M: Model>(spec: &ProblemSpec<M>, u_value: f64, w_value: f64) -> Self {
        Self {
            u: vec![u_value; spec.control_len()],
            w: vec![w_value; spec.weight_len()],
        }
    }

    /// Splits a decision vector `[u | w]`.
    pub fn from_decision<M: Model>(spec: &ProblemSpec<M>, z: &[f64]) -> Result<Self> {
        let nu = spec.control_len();
        if z.len() != nu + spec.weight_len() {
            return Err(OedError::Argument(format!(
                "decision vector has length {}, expected {}",
                z.len(),
                nu + spec.weight_len()
            )));
        }
        Ok(Self {
            u: z[..nu].to_vec(),
            w: z[nu..].to_vec(),
        })
    }

    pub fn to_decision(&self) -> Vec<f64> {
        let mut z = self.u.clone();
        z.extend_from_slice(&self.w);
        z
    }

    /// Weights of cell `c`.
    pub fn cell_weights(&self, c: usize, sensors: usize) -> &[f64] {
        &self.w[c * sensors..(c + 1) * sensors]
    }

    /// Total relaxed activations `Σ_c Σ_d w_{c,d}`.
    pub fn budget_used(&self) -> f64 {
        self.w.iter().sum()
    }

    pub fn validate<M: Model>(&self, spec: &ProblemSpec<M>) -> Result<()> {
        spec.check_controls(&self.u)?;
        if self.w.len() != spec.weight_len() {
            return Err(OedError::Argument(format!(
                "expected {} sampling weights, got {}",
                spec.weight_len(),
                self.w.len()
            )));
        }
        if let Some(v) = self.w.iter().find(|v| !(**v >= -1e-12 && **v <= 1.0 + 1e-12)) {
            return Err(OedError::Argument(format!("sampling weight {v} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Criterion value together with its gradient over the decision layout
/// `[u cells | w cells]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: Vec<f64>,
}
