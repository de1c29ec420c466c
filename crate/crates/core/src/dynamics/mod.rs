//! Controlled ODE models, fixed-step RK4 integration and forward
//! sensitivities.

mod benchmarks;
mod integrate;
mod model;
mod spec;

pub use benchmarks::{
    benchmark_model, benchmark_setup, verify_jacobians, BenchmarkModel, BenchmarkSetup, HarmonicOscillator,
    LotkaVolterra, SCENARIOS,
};
pub use integrate::{
    control_adjoint, integrate, integrate_with_sensitivity, midpoint_states, reference_states, MidpointStates, ReferenceStates,
};
pub use model::{jacobian_fd_mismatch, jacobians, observation_gradient, Jacobians, Model};
pub use spec::{ProblemSpec, SensitivityPath, TimeGrid, Trajectory, DEFAULT_STEPS_PER_CELL};
