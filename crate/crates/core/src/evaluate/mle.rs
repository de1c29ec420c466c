use nalgebra::{DMatrix, DVector};

use super::data::Dataset;
use crate::dynamics::{integrate_with_sensitivity, observation_gradient, Model, ProblemSpec};
use crate::error::{OedError, Result};
use crate::measure::{ParticleCloud, PriorSpec};
use crate::solve::DiscreteDesign;

/// Where the estimate may live.
#[derive(Clone, Debug, PartialEq)]
pub enum ParameterDomain {
    /// Coordinate box; iterates are clipped into it.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Positive orthant, searched in `log θ`.
    Positive,
}

impl ParameterDomain {
    pub fn for_prior(prior: &PriorSpec) -> Self {
        match prior.support_box() {
            Some((lower, upper)) => ParameterDomain::Box { lower, upper },
            None => ParameterDomain::Positive,
        }
    }

    fn to_search(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            ParameterDomain::Box { lower, upper } => theta
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (a, b))| v.clamp(*a, *b))
                .collect(),
            ParameterDomain::Positive => theta.iter().map(|v| v.max(1e-300).ln()).collect(),
        }
    }

    fn to_theta(&self, phi: &[f64]) -> Vec<f64> {
        match self {
            ParameterDomain::Box { .. } => phi.to_vec(),
            ParameterDomain::Positive => phi.iter().map(|v| v.exp()).collect(),
        }
    }

    fn project(&self, phi: &mut [f64]) {
        if let ParameterDomain::Box { lower, upper } = self {
            for (v, (a, b)) in phi.iter_mut().zip(lower.iter().zip(upper)) {
                *v = v.clamp(*a, *b);
            }
        }
    }
}

/// Result of a maximum-likelihood fit.
#[derive(Clone, Debug, PartialEq)]
pub struct MleFit {
    pub theta: Vec<f64>,
    /// `Σ (y − h)² / (2σ²)` at `theta`.
    pub cost: f64,
    pub converged: bool,
    /// Index of the winning start.
    pub start: usize,
}

const MAX_ITERS: usize = 200;
const REL_TOL: f64 = 1e-8;
const STARTS_FROM_ATOMS: usize = 9;

struct Residuals {
    r: Vec<f64>,
    /// Row-major `n_obs × n_θ`, with respect to the search variables.
    jac: Vec<f64>,
}

fn residuals<M: Model>(
    spec: &ProblemSpec<M>,
    design: &DiscreteDesign,
    data: &Dataset,
    domain: &ParameterDomain,
    phi: &[f64],
) -> Result<Residuals> {
    let theta = domain.to_theta(phi);
    let nt = theta.len();
    let grid = spec.grid();
    let (traj, sens) = integrate_with_sensitivity(spec, &design.u, &theta, &grid)?;
    let mut r = Vec::with_capacity(data.records.len());
    let mut jac = Vec::with_capacity(data.records.len() * nt);
    for rec in &data.records {
        let node = grid.midpoint_node(rec.cell);
        let x = traj.state(node);
        let sigma = spec.noise.sigma[rec.sensor];
        r.push((rec.value - spec.model.observe(rec.sensor, x)) / sigma);
        let dh = observation_gradient(&spec.model, rec.sensor, x);
        for j in 0..nt {
            let mut v: f64 = (0..x.len()).map(|i| dh[i] * sens.get(node, i, j)).sum();
            if matches!(domain, ParameterDomain::Positive) {
                v *= theta[j];
            }
            jac.push(-v / sigma);
        }
    }
    if r.iter().chain(&jac).any(|v| !v.is_finite()) {
        return Err(OedError::Numeric("non-finite residuals".into()));
    }
    Ok(Residuals { r, jac })
}

fn cost(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Projected Levenberg–Marquardt from one start.
fn descend<M: Model>(
    spec: &ProblemSpec<M>,
    design: &DiscreteDesign,
    data: &Dataset,
    domain: &ParameterDomain,
    start: &[f64],
) -> Result<(Vec<f64>, f64, bool)> {
    let nt = start.len();
    let mut phi = domain.to_search(start);
    let mut cur = residuals(spec, design, data, domain, &phi)?;
    let mut f = cost(&cur.r);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..MAX_ITERS {
        let j = DMatrix::from_row_slice(cur.r.len(), nt, &cur.jac);
        let r = DVector::from_column_slice(&cur.r);
        let jtj = j.transpose() * &j;
        let grad = j.transpose() * r;
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..nt {
                a[(i, i)] += lambda * (jtj[(i, i)].max(1e-12));
            }
            let Some(step) = a.lu().solve(&(-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = phi.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            domain.project(&mut trial);
            if trial == phi {
                break;
            }
            match residuals(spec, design, data, domain, &trial) {
                Ok(next) if cost(&next.r) < f => {
                    let f_new = cost(&next.r);
                    let small = f - f_new <= REL_TOL * f.max(f64::MIN_POSITIVE);
                    phi = trial;
                    cur = next;
                    f = f_new;
                    lambda = (lambda * 0.3).max(1e-12);
                    accepted = true;
                    converged = small;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            converged = true;
            break;
        }
        if converged || f == 0.0 {
            converged = true;
            break;
        }
    }
    Ok((domain.to_theta(&phi), f, converged))
}

/// Multi-start maximum-likelihood estimate: starts are the nine heaviest
/// prior atoms and the prior mean; the lowest final cost wins (ties go to
/// the earlier start).
pub fn mle_fit<M: Model>(
    spec: &ProblemSpec<M>,
    design: &DiscreteDesign,
    data: &Dataset,
    prior: &ParticleCloud,
    domain: &ParameterDomain,
) -> Result<MleFit> {
    if data.records.is_empty() {
        return Err(OedError::Argument("maximum likelihood needs at least one observation".into()));
    }
    if prior.dim() != spec.param_dim() {
        return Err(OedError::Argument("prior dimension does not match the model".into()));
    }
    let mut starts: Vec<Vec<f64>> = prior
        .heaviest(STARTS_FROM_ATOMS)
        .into_iter()
        .map(|k| prior.atom(k).to_vec())
        .collect();
    starts.push(prior.mean().to_vec());
    let mut best: Option<MleFit> = None;
    let mut last_err = None;
    for (i, s) in starts.iter().enumerate() {
        match descend(spec, design, data, domain, s) {
            Ok((theta, cost, converged)) => {
                if best.as_ref().is_none_or(|b| cost < b.cost) {
                    best = Some(MleFit {
                        theta,
                        cost,
                        converged,
                        start: i,
                    });
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        OedError::OptimizationFailure(format!(
            "every maximum-likelihood start failed ({})",
            last_err.map_or_else(String::new, |e| e.to_string())
        ))
    })
}
