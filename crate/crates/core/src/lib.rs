//! Optimal experimental design for controlled ODE systems.
//!
//! Design criteria: Fisher A/D-optimality and three surrogates of the
//! expected information gain (instantaneous, Gaussian tilting, multi-center
//! tilting), optimized over piecewise-constant controls and relaxed sampling
//! weights, then rounded to a budgeted measurement schedule and assessed by
//! Monte Carlo maximum-likelihood estimation.

pub mod criteria;
pub mod dynamics;
pub mod error;
pub mod evaluate;
pub mod measure;
pub mod oracle;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod solve;
pub mod validation;

pub use error::{OedError, Result};
