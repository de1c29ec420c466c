use nalgebra::DMatrix;
use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::criteria::{config_weights, log_sum_exp, Center, FisherAccumulator};
use crate::dynamics::TimeGrid;
use crate::error::{OedError, Result};
use crate::measure::{noise_entropy, NoiseSpec, ParticleCloud};
use crate::rng::stream_rng;

/// Monte Carlo and closed-form conditional entropy of one observation slice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyCheck {
    pub monte_carlo: f64,
    pub std_error: f64,
    /// `H(π(w)) + Σ_d w_d H(ε_d)`.
    pub closed_form: f64,
}

const CHUNK: usize = 10_000;

/// Estimates `H(y | θ, w)` of a slice in which sensor `d` is read with
/// probability `w_d` and inactive sensors report a sentinel value, by
/// sampling configurations and noise and averaging `−log p(y | θ, w)`.
pub fn entropy_decomposition(noise: &NoiseSpec, w: &[f64], samples: usize, seed: u64) -> Result<EntropyCheck> {
    noise.validate()?;
    if w.len() != noise.sensor_count() || w.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(OedError::Argument("weights must lie in [0, 1], one per sensor".into()));
    }
    if samples < 2 {
        return Err(OedError::Argument("at least two samples are required".into()));
    }
    let ns = w.len();
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let mut v = 0.0;
                for d in 0..ns {
                    let active = rng.random::<f64>() < w[d];
                    if active {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v -= w[d].ln() + noise.log_density(d, noise.sigma[d] * z);
                    } else {
                        v -= (1.0 - w[d]).ln();
                    }
                }
                s1 += v;
                s2 += v * v;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = s1 / n;
    let var = (s2 - n * mean * mean) / (n - 1.0);
    let pi = config_weights(w);
    let config_entropy: f64 = pi.iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum();
    let closed_form = config_entropy + (0..ns).map(|d| w[d] * noise_entropy(noise, d)).sum::<f64>();
    Ok(EntropyCheck {
        monte_carlo: mean,
        std_error: (var.max(0.0) / n).sqrt(),
        closed_form,
    })
}

fn quad(f: &DMatrix<f64>, delta: &[f64]) -> f64 {
    let n = delta.len();
    (0..n)
        .map(|i| delta[i] * (0..n).map(|l| f[(i, l)] * delta[l]).sum::<f64>())
        .sum()
}

/// Integrates the replicator equation
/// `μ̇_k = μ_k (g_k − Σ_l μ_l g_l)`, `g_k = −½ Σ_j ρ_kj δ_kjᵀ Ḟ_j δ_kj`,
/// with classical RK4 on the grid in log-mass coordinates, starting from the
/// prior masses. The center responsibilities `ρ_kj` follow from the
/// accumulated `F_j(t)`. Returns masses on every node, row-major `(S + 1) × N`.
pub fn replicator_rk4(
    prior: &ParticleCloud,
    centers: &[Center],
    accumulators: &[FisherAccumulator],
    grid: &TimeGrid,
) -> Result<Vec<f64>> {
    if centers.is_empty() || centers.len() != accumulators.len() {
        return Err(OedError::Argument("one accumulator per center is required".into()));
    }
    let n = prior.len();
    let nj = centers.len();
    let deltas: Vec<Vec<f64>> = (0..n)
        .flat_map(|k| {
            centers
                .iter()
                .map(move |c| prior.atom(k).iter().zip(&c.theta).map(|(a, b)| a - b).collect())
        })
        .collect();
    let rates = |c: usize, t: f64| -> Vec<f64> {
        let t0 = grid.times[grid.cell_start_node(c)];
        let mut g = vec![0.0; n];
        let mut logits = vec![0.0; nj];
        for k in 0..n {
            let mut rate = vec![0.0; nj];
            for j in 0..nj {
                let acc = &accumulators[j];
                let f = &acc.boundaries[c] + &acc.increments[c] * (t - t0);
                let d = &deltas[k * nj + j];
                logits[j] = centers[j].mass.ln() - 0.5 * quad(&f, d);
                rate[j] = quad(&acc.increments[c], d);
            }
            let lse = log_sum_exp(&logits);
            g[k] = -0.5 * (0..nj).map(|j| (logits[j] - lse).exp() * rate[j]).sum::<f64>();
        }
        g
    };
    // Log-mass coordinates: `ℓ̇_k = g_k − Σ_l μ_l g_l`, `μ = softmax(ℓ)`.
    let softmax = |l: &[f64]| -> Vec<f64> {
        let lse = log_sum_exp(l);
        l.iter().map(|v| (v - lse).exp()).collect()
    };
    let field = |l: &[f64], g: &[f64]| -> Vec<f64> {
        let avg: f64 = softmax(l).iter().zip(g).map(|(m, v)| m * v).sum();
        g.iter().map(|v| v - avg).collect()
    };
    let mut ell: Vec<f64> = prior.masses().iter().map(|m| m.ln()).collect();
    let mut out = Vec::with_capacity((grid.steps() + 1) * n);
    out.extend_from_slice(prior.masses());
    for s in 0..grid.steps() {
        let c = grid.cell_of_step(s);
        let (t, h) = (grid.times[s], grid.times[s + 1] - grid.times[s]);
        let axpy = |a: &[f64], k: &[f64], f: f64| -> Vec<f64> { a.iter().zip(k).map(|(x, y)| x + f * y).collect() };
        let g0 = rates(c, t);
        let gm = rates(c, t + 0.5 * h);
        let g1 = rates(c, t + h);
        let k1 = field(&ell, &g0);
        let k2 = field(&axpy(&ell, &k1, 0.5 * h), &gm);
        let k3 = field(&axpy(&ell, &k2, 0.5 * h), &gm);
        let k4 = field(&axpy(&ell, &k3, h), &g1);
        for i in 0..n {
            ell[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.extend(softmax(&ell));
    }
    Ok(out)
}
