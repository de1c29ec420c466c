use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::discrete::DiscreteModel;
use super::linear_gaussian::LinearGaussianModel;
use crate::criteria::log_sum_exp;
use crate::dynamics::{integrate, Model, ProblemSpec};
use crate::error::{OedError, Result};
use crate::measure::ParticleCloud;
use crate::rng::stream_rng;
use crate::solve::DiscreteDesign;

/// A finite-prior observation model that can be sampled and evaluated.
pub trait NestedModel: Sync {
    fn atoms(&self) -> usize;
    fn mass(&self, k: usize) -> f64;
    /// Number of scalar observations; zero means nothing is measured.
    fn observations(&self) -> usize;
    fn sample(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64>;
    fn log_likelihood(&self, k: usize, y: &[f64]) -> f64;
}

/// Independent Gaussian observations with atom-dependent means.
#[derive(Clone, Debug)]
pub struct GaussianObservations {
    pub masses: Vec<f64>,
    /// `means[k][a]`: noise-free value of observation `a` under atom `k`.
    pub means: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
}

impl GaussianObservations {
    /// Observations taken by a discrete design, one trajectory per atom.
    pub fn from_design<M: Model>(spec: &ProblemSpec<M>, design: &DiscreteDesign, prior: &ParticleCloud) -> Result<Self> {
        design.validate(spec)?;
        let grid = spec.grid();
        let means = (0..prior.len())
            .into_par_iter()
            .map(|k| {
                let traj = integrate(spec, &design.u, prior.atom(k), &grid)?;
                Ok(design
                    .activations
                    .iter()
                    .map(|a| spec.model.observe(a.sensor, traj.state(grid.midpoint_node(a.cell))))
                    .collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(Self {
            masses: prior.masses().to_vec(),
            means,
            sigma: design.activations.iter().map(|a| spec.noise.sigma[a.sensor]).collect(),
        })
    }

    /// Active observations of a linear-Gaussian model over a particle prior.
    pub fn from_linear_gaussian(model: &LinearGaussianModel, prior: &ParticleCloud) -> Result<Self> {
        model.validate()?;
        if prior.dim() != model.dim() {
            return Err(OedError::Argument("prior dimension does not match the model".into()));
        }
        let mut sigma = Vec::new();
        for s in &model.stages {
            for d in 0..s.rows.len() {
                if s.active[d] {
                    sigma.push(s.variances[d].sqrt());
                }
            }
        }
        let means = (0..prior.len())
            .map(|k| {
                let theta = prior.atom(k);
                let mut m = Vec::new();
                for s in &model.stages {
                    for d in 0..s.rows.len() {
                        if s.active[d] {
                            m.push(s.rows[d].iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + s.offsets[d]);
                        }
                    }
                }
                m
            })
            .collect();
        Ok(Self {
            masses: prior.masses().to_vec(),
            means,
            sigma,
        })
    }
}

impl NestedModel for GaussianObservations {
    fn atoms(&self) -> usize {
        self.masses.len()
    }
    fn mass(&self, k: usize) -> f64 {
        self.masses[k]
    }
    fn observations(&self) -> usize {
        self.sigma.len()
    }
    fn sample(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.means[k]
            .iter()
            .zip(&self.sigma)
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s * z
            })
            .collect()
    }
    fn log_likelihood(&self, k: usize, y: &[f64]) -> f64 {
        self.means[k]
            .iter()
            .zip(&self.sigma)
            .zip(y)
            .map(|((m, s), v)| {
                let r = (v - m) / s;
                -0.5 * r * r - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            })
            .sum()
    }
}

impl NestedModel for DiscreteModel {
    fn atoms(&self) -> usize {
        self.prior.len()
    }
    fn mass(&self, k: usize) -> f64 {
        self.prior[k]
    }
    fn observations(&self) -> usize {
        self.tables.len()
    }
    fn sample(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.tables
            .iter()
            .map(|t| categorical(&t[k], rng) as f64)
            .collect()
    }
    fn log_likelihood(&self, k: usize, y: &[f64]) -> f64 {
        self.tables
            .iter()
            .zip(y)
            .map(|(t, &v)| t[k][v as usize].ln())
            .sum()
    }
}

fn categorical(p: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let r: f64 = rng.random();
    let mut acc = 0.0;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if r < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Nested Monte Carlo estimate of the mutual information with its standard
/// error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NmcEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Outer samples draw `(θ, y)` from the prior and the likelihood. The inner
/// marginal is the exact mixture over all atoms when there are at most
/// `n_inner` of them, otherwise an average over `n_inner` prior draws.
/// Sample `i` uses its own random stream, so the result does not depend on
/// the thread count.
pub fn nested_mc<N: NestedModel>(model: &N, n_outer: usize, n_inner: usize, seed: u64) -> Result<NmcEstimate> {
    if n_outer < 10 || n_inner < 10 {
        return Err(OedError::Argument("nested Monte Carlo needs at least 10 outer and inner samples".into()));
    }
    if model.observations() == 0 {
        return Ok(NmcEstimate {
            estimate: 0.0,
            std_error: 0.0,
        });
    }
    let n = model.atoms();
    let cumulative: Vec<f64> = (0..n)
        .scan(0.0, |acc, k| {
            *acc += model.mass(k);
            Some(*acc)
        })
        .collect();
    let draw = |rng: &mut ChaCha8Rng| {
        let r: f64 = rng.random::<f64>() * cumulative[n - 1];
        cumulative.partition_point(|c| *c <= r).min(n - 1)
    };
    let log_masses: Vec<f64> = (0..n).map(|k| model.mass(k).ln()).collect();
    let samples: Vec<f64> = (0..n_outer)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let k = draw(&mut rng);
            let y = model.sample(k, &mut rng);
            let log_marginal = if n <= n_inner {
                let terms: Vec<f64> = (0..n).map(|l| log_masses[l] + model.log_likelihood(l, &y)).collect();
                log_sum_exp(&terms)
            } else {
                let terms: Vec<f64> = (0..n_inner)
                    .map(|_| model.log_likelihood(draw(&mut rng), &y))
                    .collect();
                log_sum_exp(&terms) - (n_inner as f64).ln()
            };
            model.log_likelihood(k, &y) - log_marginal
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / n_outer as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_outer - 1) as f64;
    if !mean.is_finite() {
        return Err(OedError::Numeric("non-finite nested Monte Carlo estimate".into()));
    }
    Ok(NmcEstimate {
        estimate: mean,
        std_error: (var / n_outer as f64).sqrt(),
    })
}

/// Nested Monte Carlo information gain of a discrete design under a
/// particle prior.
pub fn nested_mc_eig<M: Model>(
    spec: &ProblemSpec<M>,
    design: &DiscreteDesign,
    prior: &ParticleCloud,
    n_outer: usize,
    n_inner: usize,
    seed: u64,
) -> Result<NmcEstimate> {
    let obs = GaussianObservations::from_design(spec, design, prior)?;
    nested_mc(&obs, n_outer, n_inner, seed)
}
