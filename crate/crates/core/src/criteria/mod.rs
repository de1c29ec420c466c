//! Design criteria as time-integrated functionals of a relaxed design.

mod config;
mod design;
mod fisher;
mod likelihood;
mod sensing;
mod surrogate;
mod tilt;

pub use config::{config_weights, ConfigTable};
pub use design::{ObjectiveEval, RelaxedDesign};
pub use fisher::{
    fim_increment, fisher_accumulator, fisher_objective, fisher_value, FisherAccumulator, FisherCriterion,
    FISHER_RIDGE,
};
pub use likelihood::{log_sum_exp, predictive_log_likelihood};
pub use surrogate::{inst_objective, inst_value, tilt_objective, tilt_value};
pub use tilt::{cloud_centers, mean_center, tilt_masses, tilt_weight_path, Center, TiltPath};

pub(crate) use surrogate::{sum_cells, CellProblem};
