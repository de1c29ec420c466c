//! Monte Carlo assessment of designs by maximum-likelihood estimation.

mod data;
mod mle;
mod monte_carlo;
mod report;

pub use data::{noiseless_outputs, simulate_data, Dataset, Observation};
pub use mle::{mle_fit, MleFit, ParameterDomain};
pub use monte_carlo::mc_evaluate;
pub use report::{median, sign_test, EvalReport, MethodSummary, RunRecord, RunStatus, SignTest};
