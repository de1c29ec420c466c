use std::fmt;
use std::str::FromStr;

use crate::criteria::{
    cloud_centers, fisher_objective, fisher_value, inst_objective, inst_value, mean_center, tilt_objective, tilt_value, Center,
    FisherCriterion, ObjectiveEval, RelaxedDesign,
};
use crate::dynamics::{BenchmarkModel, BenchmarkSetup, Model, ProblemSpec};
use crate::error::{OedError, Result};
use crate::measure::{build_prior, ParticleCloud};

use super::project::project_feasible;

/// Design criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Criterion {
    AOpt,
    DOpt,
    Inst,
    Tilt,
    MultiTilt,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::AOpt,
        Criterion::DOpt,
        Criterion::Inst,
        Criterion::Tilt,
        Criterion::MultiTilt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::AOpt => "a_opt",
            Criterion::DOpt => "d_opt",
            Criterion::Inst => "inst",
            Criterion::Tilt => "tilt",
            Criterion::MultiTilt => "multi_tilt",
        }
    }

    /// True for the three surrogates of the expected information gain.
    pub fn is_eig_surrogate(self) -> bool {
        matches!(self, Criterion::Inst | Criterion::Tilt | Criterion::MultiTilt)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = OedError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Criterion::ALL
            .into_iter()
            .find(|c| c.name() == key)
            .ok_or_else(|| {
                OedError::Argument(format!(
                    "unknown criterion '{s}' (expected one of a_opt, d_opt, inst, tilt, multi_tilt)"
                ))
            })
    }
}

/// Everything a criterion needs besides the decision vector.
#[derive(Clone, Debug)]
pub struct DesignProblem<M> {
    pub spec: ProblemSpec<M>,
    /// Dirac-mixture prior used by the information-gain surrogates.
    pub prior: ParticleCloud,
    /// Linearization points of the multi-center tilt.
    pub centers: Vec<Center>,
    /// Nominal parameter of the Fisher criteria and the single-center tilt.
    pub theta_nom: Vec<f64>,
}

impl<M: Model> DesignProblem<M> {
    /// Nominal parameter at the prior mean.
    pub fn new(spec: ProblemSpec<M>, prior: ParticleCloud, centers: Vec<Center>) -> Result<Self> {
        spec.validate()?;
        if prior.dim() != spec.param_dim() {
            return Err(OedError::Config("prior dimension does not match the model".into()));
        }
        let theta_nom = prior.mean().to_vec();
        Ok(Self {
            spec,
            prior,
            centers,
            theta_nom,
        })
    }

    /// Benchmark problem: quadrature prior and a quadrature cloud of centers.
    pub fn from_setup(setup: &BenchmarkSetup) -> Result<DesignProblem<BenchmarkModel>> {
        let prior = build_prior(&setup.prior, &setup.prior_orders)?;
        let centers = cloud_centers(&build_prior(&setup.prior, &setup.center_orders)?);
        DesignProblem::new(setup.spec.clone(), prior, centers)
    }

    pub fn decision_len(&self) -> usize {
        self.spec.control_len() + self.spec.weight_len()
    }

    fn single_center(&self) -> Vec<Center> {
        let mut c = mean_center(&self.prior);
        c[0].theta = self.theta_nom.clone();
        c
    }

    fn design(&self, z: &[f64]) -> Result<RelaxedDesign> {
        if z.len() != self.decision_len() || z.iter().any(|v| !v.is_finite()) {
            return Err(OedError::Argument(format!(
                "decision vector must hold {} finite values",
                self.decision_len()
            )));
        }
        RelaxedDesign::from_decision(&self.spec, &project_feasible(z, &self.spec))
    }
}

/// Criterion value (to be minimized) and its exact gradient at the
/// projection of `z` onto the feasible set.
pub fn objective_and_gradient<M: Model>(
    problem: &DesignProblem<M>,
    criterion: Criterion,
    z: &[f64],
) -> Result<ObjectiveEval> {
    let d = problem.design(z)?;
    let (spec, prior) = (&problem.spec, &problem.prior);
    match criterion {
        Criterion::AOpt => fisher_objective(&d, &problem.theta_nom, spec, FisherCriterion::A),
        Criterion::DOpt => fisher_objective(&d, &problem.theta_nom, spec, FisherCriterion::D),
        Criterion::Inst => inst_objective(&d, prior, spec),
        Criterion::Tilt => tilt_objective(&d, prior, spec, &problem.single_center()),
        Criterion::MultiTilt => tilt_objective(&d, prior, spec, &problem.centers),
    }
}

/// Value of [`objective_and_gradient`] without the gradient.
pub fn objective_value<M: Model>(problem: &DesignProblem<M>, criterion: Criterion, z: &[f64]) -> Result<f64> {
    let d = problem.design(z)?;
    let (spec, prior) = (&problem.spec, &problem.prior);
    match criterion {
        Criterion::AOpt => fisher_value(&d, &problem.theta_nom, spec, FisherCriterion::A),
        Criterion::DOpt => fisher_value(&d, &problem.theta_nom, spec, FisherCriterion::D),
        Criterion::Inst => inst_value(&d, prior, spec),
        Criterion::Tilt => tilt_value(&d, prior, spec, &problem.single_center()),
        Criterion::MultiTilt => tilt_value(&d, prior, spec, &problem.centers),
    }
}
