//! Transcribed design problems, projected-gradient optimization and
//! rounding to measurement schedules.

mod design_file;
mod optimize;
mod problem;
mod project;
mod round;
mod schedule;

pub use design_file::{read_discrete_design, read_relaxed_design, write_discrete_design, write_relaxed_design};
pub use optimize::{optimize, OptimizeReport, OptimizerOptions, RestartTrace};
pub use problem::{objective_and_gradient, objective_value, Criterion, DesignProblem};
pub use project::{project_feasible, project_weights};
pub use round::{round_design, Activation, DiscreteDesign};
pub use schedule::{optimize_schedule, ScheduleReport};
