//! Reference computations: closed-form linear-Gaussian information gain,
//! exact enumeration on finite models, nested Monte Carlo, and independent
//! checks of the surrogate machinery.

mod checks;
mod discrete;
mod linear_gaussian;
mod nested;

pub use checks::{entropy_decomposition, replicator_rk4, EntropyCheck};
pub use discrete::{enumerate_mi, DiscreteModel, MiReport, MAX_SUPPORT};
pub use linear_gaussian::{
    lg_eig_closed_form, lg_prior_cloud, lg_tilt_exact, lg_tilt_particle, scalar_lg_benchmark, LinearGaussianModel,
    LinearGaussianStage,
};
pub use nested::{nested_mc, nested_mc_eig, GaussianObservations, NestedModel, NmcEstimate};
