use nalgebra::DMatrix;

use super::design::RelaxedDesign;
use super::fisher::{accumulate, reference_rows, FisherAccumulator};
use super::likelihood::log_sum_exp;
use crate::dynamics::{reference_states, Model, ProblemSpec};
use crate::error::{OedError, Result};
use crate::measure::ParticleCloud;

/// Tilting center `θ_j^ref` with mixture weight `m_j^ref`.
#[derive(Clone, Debug, PartialEq)]
pub struct Center {
    pub theta: Vec<f64>,
    pub mass: f64,
}

/// The prior mean as the only center.
pub fn mean_center(prior: &ParticleCloud) -> Vec<Center> {
    vec![Center {
        theta: prior.mean().to_vec(),
        mass: 1.0,
    }]
}

/// Every atom of `cloud` as a center weighted by its mass.
pub fn cloud_centers(cloud: &ParticleCloud) -> Vec<Center> {
    (0..cloud.len())
        .map(|j| Center {
            theta: cloud.atom(j).to_vec(),
            mass: cloud.masses()[j],
        })
        .collect()
}

pub(crate) fn check_centers(prior: &ParticleCloud, centers: &[Center]) -> Result<()> {
    if centers.is_empty() {
        return Err(OedError::Argument("at least one tilting center is required".into()));
    }
    for c in centers {
        if c.theta.len() != prior.dim() || c.theta.iter().any(|v| !v.is_finite()) {
            return Err(OedError::Argument("tilting center has the wrong dimension".into()));
        }
        if !(c.mass > 0.0) || !c.mass.is_finite() {
            return Err(OedError::Argument("tilting center masses must be positive".into()));
        }
    }
    Ok(())
}

/// Tilted masses `μ_k ∝ m_k Σ_j m_j^ref exp(−½ δ_kjᵀ F_j δ_kj)` together with
/// the per-particle center responsibilities `ρ_kj` (row-major `N × J`).
pub fn tilt_masses(prior: &ParticleCloud, centers: &[Center], fisher: &[&DMatrix<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = prior.len();
    let nj = centers.len();
    let dim = prior.dim();
    let log_ref: Vec<f64> = centers.iter().map(|c| c.mass.ln()).collect();
    let mut rho = vec![0.0; n * nj];
    let mut logits = vec![0.0; n];
    let mut a = vec![0.0; nj];
    let mut delta = vec![0.0; dim];
    for k in 0..n {
        let theta = prior.atom(k);
        for (j, c) in centers.iter().enumerate() {
            for i in 0..dim {
                delta[i] = theta[i] - c.theta[i];
            }
            let f = fisher[j];
            let mut q = 0.0;
            for i in 0..dim {
                let mut row = 0.0;
                for l in 0..dim {
                    row += f[(i, l)] * delta[l];
                }
                q += delta[i] * row;
            }
            a[j] = log_ref[j] - 0.5 * q;
        }
        let lv = log_sum_exp(&a);
        for j in 0..nj {
            rho[k * nj + j] = (a[j] - lv).exp();
        }
        logits[k] = prior.masses()[k].ln() + lv;
    }
    let lse = log_sum_exp(&logits);
    let mu = logits.iter().map(|l| (l - lse).exp()).collect();
    (mu, rho)
}

/// Tilted particle masses on every grid node.
#[derive(Clone, Debug)]
pub struct TiltPath {
    pub times: Vec<f64>,
    pub particles: usize,
    /// Row-major `(S + 1) × N`.
    pub masses: Vec<f64>,
    /// One accumulator per center.
    pub accumulators: Vec<FisherAccumulator>,
}

impl TiltPath {
    pub fn at(&self, s: usize) -> &[f64] {
        &self.masses[s * self.particles..(s + 1) * self.particles]
    }
}

/// Information accumulated at every center along its own reference trajectory.
pub(crate) fn center_accumulators<M: Model>(
    design: &RelaxedDesign,
    spec: &ProblemSpec<M>,
    centers: &[Center],
) -> Result<Vec<FisherAccumulator>> {
    let grid = spec.grid();
    centers
        .iter()
        .map(|c| {
            let refs = reference_states(spec, &design.u, &c.theta, &grid, false)?;
            Ok(accumulate(spec, &reference_rows(spec, &refs), &design.w))
        })
        .collect()
}

/// Closed-form solution of the replicator dynamics for the tilted masses.
pub fn tilt_weight_path<M: Model>(
    design: &RelaxedDesign,
    prior: &ParticleCloud,
    spec: &ProblemSpec<M>,
    centers: &[Center],
) -> Result<TiltPath> {
    design.validate(spec)?;
    check_centers(prior, centers)?;
    let accumulators = center_accumulators(design, spec, centers)?;
    let grid = spec.grid();
    let nodes = grid.steps() + 1;
    let mut masses = Vec::with_capacity(nodes * prior.len());
    for s in 0..nodes {
        let f: Vec<DMatrix<f64>> = accumulators.iter().map(|acc| acc.at_node(&grid, s)).collect();
        if f.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(OedError::Numeric("non-finite accumulated information".into()));
        }
        let refs: Vec<&DMatrix<f64>> = f.iter().collect();
        masses.extend(tilt_masses(prior, centers, &refs).0);
    }
    Ok(TiltPath {
        times: grid.times,
        particles: prior.len(),
        masses,
        accumulators,
    })
}
