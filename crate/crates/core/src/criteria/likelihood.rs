use super::config::{config_weight_derivatives, config_weights, ConfigTable};
use crate::error::{OedError, Result};
use crate::measure::{noise_entropy, NoiseSpec};

/// Numerically stable `ln Σ exp(a_i)`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(a: &[f64]) -> f64 {
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + a.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `log 𝓛 = log Σ_ℓ μ_ℓ Π_{d ∈ η} p_d(h_{k,d} − h_{ℓ,d} + ξ_d)`.
///
/// `atom_obs` is row-major `N × n_exp`, `eta` a configuration bit mask and
/// `xi` one noise node over all sensors.
pub fn predictive_log_likelihood(
    atom_obs: &[f64],
    masses: &[f64],
    k: usize,
    eta: usize,
    xi: &[f64],
    noise: &NoiseSpec,
) -> Result<f64> {
    let n_exp = noise.sensor_count();
    let n = masses.len();
    if atom_obs.len() != n * n_exp || xi.len() != n_exp || k >= n {
        return Err(OedError::Argument("observation table shape mismatch".into()));
    }
    if masses.iter().any(|m| *m < 0.0 || !m.is_finite()) || !masses.iter().any(|m| *m > 0.0) {
        return Err(OedError::Argument("masses must be non-negative and not all zero".into()));
    }
    let hk = &atom_obs[k * n_exp..(k + 1) * n_exp];
    let terms: Vec<f64> = (0..n)
        .map(|l| {
            let hl = &atom_obs[l * n_exp..(l + 1) * n_exp];
            let mut a = masses[l].ln();
            for d in (0..n_exp).filter(|d| eta >> d & 1 == 1) {
                a += noise.log_density(d, hk[d] - hl[d] + xi[d]);
            }
            a
        })
        .collect();
    Ok(log_sum_exp(&terms))
}

const TINY: f64 = 1e-280;

/// Derivatives of one cell integrand.
#[derive(Clone, Debug, Default)]
pub(crate) struct CellGradient {
    /// `∂I/∂w_d`
    pub dw: Vec<f64>,
    /// `∂I/∂h_{k,d}`, row-major `N × n_exp`
    pub dh: Vec<f64>,
    /// `∂I/∂μ_k`, treating the masses as free variables
    pub dmu: Vec<f64>,
}

impl CellGradient {
    pub fn new(particles: usize, sensors: usize) -> Self {
        Self {
            dw: vec![0.0; sensors],
            dh: vec![0.0; particles * sensors],
            dmu: vec![0.0; particles],
        }
    }

    fn reset(&mut self, particles: usize, sensors: usize) {
        self.dw.clear();
        self.dw.resize(sensors, 0.0);
        self.dh.clear();
        self.dh.resize(particles * sensors, 0.0);
        self.dmu.clear();
        self.dmu.resize(particles, 0.0);
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct CellScratch {
    /// Per sensor: `exp(−res²/2σ²)` laid out `[k][q][ℓ]`.
    kernel: Vec<Vec<f64>>,
    prod: Vec<f64>,
    lp: Vec<f64>,
    logs: Vec<f64>,
    dmass: Vec<f64>,
    row_a: Vec<f64>,
    row_b: Vec<f64>,
}

/// Evaluates the per-time integrand
/// `I(h, μ, w) = Σ_η π_η(w) Σ_k μ_k Σ_q s_q log 𝓛_kq^η + Σ_d w_d H(ε_d)`
/// and its derivatives. The noise rule is marginalized onto the active
/// sensors of each configuration, and Gaussian kernels are tabulated per
/// sensor and multiplied across sensors.
#[derive(Clone, Debug)]
pub(crate) struct CellEvaluator {
    sensors: usize,
    configs: ConfigTable,
    nodes: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    inv_var: Vec<f64>,
    log_norm: Vec<f64>,
    entropy: Vec<f64>,
}

impl CellEvaluator {
    pub fn new(noise: &NoiseSpec) -> Self {
        let sensors = noise.sensor_count();
        let rules: Vec<_> = (0..sensors).map(|d| noise.sensor_rule(d)).collect();
        Self {
            sensors,
            configs: ConfigTable::new(sensors),
            nodes: rules.iter().map(|r| r.nodes.clone()).collect(),
            weights: rules.iter().map(|r| r.weights.clone()).collect(),
            inv_var: (0..sensors).map(|d| 1.0 / noise.variance(d)).collect(),
            log_norm: (0..sensors).map(|d| noise.log_density(d, 0.0)).collect(),
            entropy: (0..sensors).map(|d| noise_entropy(noise, d)).collect(),
        }
    }

    pub fn eval(
        &self,
        h: &[f64],
        mu: &[f64],
        w: &[f64],
        scratch: &mut CellScratch,
        mut grad: Option<&mut CellGradient>,
    ) -> Result<f64> {
        let ns = self.sensors;
        let n = mu.len();
        debug_assert_eq!(h.len(), n * ns);
        let mu_max = mu.iter().copied().fold(0.0f64, f64::max);
        if !(mu_max > 0.0) || !mu_max.is_finite() {
            return Err(OedError::Numeric("particle masses vanish".into()));
        }
        let log_mu_max = mu_max.ln();
        let nu: Vec<f64> = mu.iter().map(|m| m / mu_max).collect();
        let pi = config_weights(w);
        let want_grad = grad.is_some();
        if let Some(g) = grad.as_deref_mut() {
            g.reset(n, ns);
        }

        // Kernel tables. The noise rules are symmetric, so the entry for
        // (ℓ, mirrored q, k) equals the one for (k, q, ℓ).
        scratch.kernel.resize(ns, Vec::new());
        for d in 0..ns {
            if !want_grad && w[d] == 0.0 {
                continue;
            }
            let nq = self.nodes[d].len();
            let table = &mut scratch.kernel[d];
            table.clear();
            table.resize(n * nq * n, 0.0);
            let half = 0.5 * self.inv_var[d];
            for k in 0..n {
                let hk = h[k * ns + d];
                for l in k..n {
                    let a = hk - h[l * ns + d];
                    for (q, &xi) in self.nodes[d].iter().enumerate() {
                        let r = a + xi;
                        let e = (-half * r * r).exp();
                        table[(k * nq + q) * n + l] = e;
                        table[(l * nq + nq - 1 - q) * n + k] = e;
                    }
                }
            }
        }
        scratch.prod.resize(n, 0.0);
        scratch.logs.resize(n, 0.0);
        scratch.lp.resize(n, 0.0);
        if want_grad {
            scratch.dmass.clear();
            scratch.dmass.resize(n, 0.0);
            scratch.row_a.clear();
            scratch.row_a.resize(ns * n, 0.0);
            scratch.row_b.clear();
            scratch.row_b.resize(ns * n, 0.0);
        }

        let mut totals = vec![0.0; self.configs.len()];
        let mut qidx = Vec::with_capacity(ns);
        for k in 0..n {
            if mu[k] == 0.0 {
                continue;
            }
            let mut touched = false;
            for eta in 1..self.configs.len() {
                let p_eta = pi[eta];
                if !want_grad && p_eta == 0.0 {
                    continue;
                }
                let active = self.configs.active(eta);
                let lognorm: f64 = active.iter().map(|&d| self.log_norm[d]).sum();
                let accumulate = want_grad && p_eta != 0.0;
                touched |= accumulate;
                let mut t_eta = 0.0;
                qidx.clear();
                qidx.resize(active.len(), 0usize);
                loop {
                    // one tensor node over the active sensors
                    let mut s_q = 1.0;
                    for (a, &d) in active.iter().enumerate() {
                        s_q *= self.weights[d][qidx[a]];
                    }
                    {
                        let d0 = active[0];
                        let nq0 = self.nodes[d0].len();
                        let base = (k * nq0 + qidx[0]) * n;
                        scratch.prod.copy_from_slice(&scratch.kernel[d0][base..base + n]);
                        for (a, &d) in active.iter().enumerate().skip(1) {
                            let nq = self.nodes[d].len();
                            let base = (k * nq + qidx[a]) * n;
                            let row = &scratch.kernel[d][base..base + n];
                            for (p, r) in scratch.prod.iter_mut().zip(row) {
                                *p *= r;
                            }
                        }
                    }
                    let s: f64 = nu.iter().zip(&scratch.prod).map(|(a, b)| a * b).sum();
                    let log_l;
                    // after this block `prod` holds t_ℓ = c·p_ℓ/𝓛 (up to μ_max)
                    let c = p_eta * mu[k] * s_q;
                    if s > TINY {
                        log_l = s.ln() + log_mu_max + lognorm;
                        if accumulate {
                            let scale = c / s;
                            scratch.prod.iter_mut().for_each(|p| *p *= scale);
                        }
                    } else {
                        // exact log-domain path for deep underflow
                        for l in 0..n {
                            let mut lp = 0.0;
                            for (a, &d) in active.iter().enumerate() {
                                let r = h[k * ns + d] - h[l * ns + d] + self.nodes[d][qidx[a]];
                                lp -= 0.5 * r * r * self.inv_var[d];
                            }
                            scratch.lp[l] = lp;
                            scratch.logs[l] = if nu[l] > 0.0 { nu[l].ln() + lp } else { f64::NEG_INFINITY };
                        }
                        let lse = log_sum_exp(&scratch.logs);
                        log_l = lse + log_mu_max + lognorm;
                        if accumulate {
                            for l in 0..n {
                                scratch.prod[l] = c * (scratch.lp[l] - lse).exp();
                            }
                        }
                    }
                    t_eta += mu[k] * s_q * log_l;
                    if accumulate {
                        let g = grad.as_deref_mut().expect("gradient requested");
                        g.dmu[k] += p_eta * s_q * log_l;
                        for (m, t) in scratch.dmass.iter_mut().zip(&scratch.prod) {
                            *m += t;
                        }
                        for (a, &d) in active.iter().enumerate() {
                            let xi = self.nodes[d][qidx[a]];
                            let ra = &mut scratch.row_a[d * n..(d + 1) * n];
                            for (x, t) in ra.iter_mut().zip(&scratch.prod) {
                                *x += t;
                            }
                            let rb = &mut scratch.row_b[d * n..(d + 1) * n];
                            for (x, t) in rb.iter_mut().zip(&scratch.prod) {
                                *x += t * xi;
                            }
                        }
                    }
                    // advance the mixed-radix index, last active sensor fastest
                    let mut done = true;
                    for pos in (0..active.len()).rev() {
                        qidx[pos] += 1;
                        if qidx[pos] < self.nodes[active[pos]].len() {
                            done = false;
                            break;
                        }
                        qidx[pos] = 0;
                    }
                    if done {
                        break;
                    }
                }
                totals[eta] += t_eta;
            }
            if touched {
                // fold the accumulated rows of particle k into the gradient
                let g = grad.as_deref_mut().expect("gradient requested");
                let inv_max = 1.0 / mu_max;
                for l in 0..n {
                    g.dmu[l] += scratch.dmass[l] * inv_max;
                    scratch.dmass[l] = 0.0;
                }
                for d in 0..ns {
                    let hk = h[k * ns + d];
                    let mut own = 0.0;
                    for l in 0..n {
                        let ra = &mut scratch.row_a[d * n + l];
                        let rb = &mut scratch.row_b[d * n + l];
                        let v = nu[l] * (*ra * (hk - h[l * ns + d]) + *rb) * self.inv_var[d];
                        *ra = 0.0;
                        *rb = 0.0;
                        if l != k {
                            own -= v;
                            g.dh[l * ns + d] += v;
                        }
                    }
                    g.dh[k * ns + d] += own;
                }
            }
        }

        let mut value: f64 = pi.iter().zip(&totals).map(|(p, t)| p * t).sum();
        value += w.iter().zip(&self.entropy).map(|(a, b)| a * b).sum::<f64>();
        if let Some(g) = grad {
            let dpi = config_weight_derivatives(w);
            let size = self.configs.len();
            for d in 0..ns {
                g.dw[d] = self.entropy[d]
                    + (0..size).map(|eta| dpi[d * size + eta] * totals[eta]).sum::<f64>();
            }
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::noise_quadrature;

    fn reference_integrand(h: &[f64], mu: &[f64], w: &[f64], noise: &NoiseSpec) -> f64 {
        let quad = noise_quadrature(noise);
        let pi = config_weights(w);
        let mut total = 0.0;
        for (eta, p) in pi.iter().enumerate().skip(1) {
            for (k, m) in mu.iter().enumerate() {
                if *m == 0.0 {
                    continue;
                }
                for q in 0..quad.len() {
                    let ll = predictive_log_likelihood(h, mu, k, eta, quad.node(q), noise).unwrap();
                    total += p * m * quad.weights[q] * ll;
                }
            }
        }
        total + (0..w.len()).map(|d| w[d] * noise_entropy(noise, d)).sum::<f64>()
    }

    fn sample_problem() -> (Vec<f64>, Vec<f64>, NoiseSpec) {
        let h = vec![0.1, 0.3, 0.12, 0.25, -0.05, 0.31, 0.2, 0.28, 0.09, 0.4];
        let mu = vec![0.1, 0.3, 0.2, 0.15, 0.25];
        let noise = NoiseSpec::new(vec![0.05, 0.08], vec![4, 3]).unwrap();
        (h, mu, noise)
    }

    #[test]
    fn single_atom_is_log_density() {
        let noise = NoiseSpec::uniform_order(vec![0.3, 0.5], 3).unwrap();
        let v = predictive_log_likelihood(&[1.0, 2.0], &[1.0], 0, 3, &[0.1, -0.2], &noise).unwrap();
        let expected = noise.log_density(0, 0.1) + noise.log_density(1, -0.2);
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn identical_atoms_collapse() {
        let noise = NoiseSpec::uniform_order(vec![0.3], 3).unwrap();
        let a = predictive_log_likelihood(&[0.7], &[1.0], 0, 1, &[0.2], &noise).unwrap();
        let b = predictive_log_likelihood(&[0.7, 0.7], &[0.4, 0.6], 1, 1, &[0.2], &noise).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn zero_masses_rejected() {
        let noise = NoiseSpec::uniform_order(vec![0.3], 3).unwrap();
        assert!(predictive_log_likelihood(&[0.7, 0.1], &[0.0, 0.0], 0, 1, &[0.0], &noise).is_err());
    }

    #[test]
    fn evaluator_matches_reference() {
        let (h, mu, noise) = sample_problem();
        let ev = CellEvaluator::new(&noise);
        let mut scratch = CellScratch::default();
        for w in [[0.3, 0.8], [1.0, 0.0], [0.0, 0.0], [0.55, 1.0]] {
            let fast = ev.eval(&h, &mu, &w, &mut scratch, None).unwrap();
            let slow = reference_integrand(&h, &mu, &w, &noise);
            assert!((fast - slow).abs() < 1e-12 * (1.0 + slow.abs()), "{fast} vs {slow}");
        }
    }

    #[test]
    fn underflow_path_matches_reference() {
        let noise = NoiseSpec::uniform_order(vec![0.01, 0.01], 3).unwrap();
        let h = vec![0.0, 0.0, 3.0, 3.0, 0.01, 0.0];
        let mu = vec![0.5, 1e-250, 0.5 - 1e-250];
        let ev = CellEvaluator::new(&noise);
        let mut scratch = CellScratch::default();
        let w = [0.7, 0.4];
        let fast = ev.eval(&h, &mu, &w, &mut scratch, None).unwrap();
        let slow = reference_integrand(&h, &mu, &w, &noise);
        assert!((fast - slow).abs() < 1e-10 * (1.0 + slow.abs()), "{fast} vs {slow}");
    }

    #[test]
    fn evaluator_gradient_matches_differences() {
        let (h, mu, noise) = sample_problem();
        let ev = CellEvaluator::new(&noise);
        let mut scratch = CellScratch::default();
        let w = [0.35, 0.7];
        let mut g = CellGradient::new(mu.len(), 2);
        ev.eval(&h, &mu, &w, &mut scratch, Some(&mut g)).unwrap();
        let f = |h: &[f64], mu: &[f64], w: &[f64]| reference_integrand(h, mu, w, &noise);
        let eps = 1e-6;
        for i in 0..h.len() {
            let (mut hp, mut hm) = (h.clone(), h.clone());
            hp[i] += eps;
            hm[i] -= eps;
            let fd = (f(&hp, &mu, &w) - f(&hm, &mu, &w)) / (2.0 * eps);
            assert!((fd - g.dh[i]).abs() < 1e-6 * (1.0 + fd.abs()), "dh[{i}] {fd} vs {}", g.dh[i]);
        }
        for i in 0..mu.len() {
            let (mut mp, mut mm) = (mu.clone(), mu.clone());
            mp[i] += eps;
            mm[i] -= eps;
            let fd = (f(&h, &mp, &w) - f(&h, &mm, &w)) / (2.0 * eps);
            assert!((fd - g.dmu[i]).abs() < 1e-6 * (1.0 + fd.abs()), "dmu[{i}] {fd} vs {}", g.dmu[i]);
        }
        for d in 0..2 {
            let (mut wp, mut wm) = (w, w);
            wp[d] += eps;
            wm[d] -= eps;
            let fd = (f(&h, &mu, &wp) - f(&h, &mu, &wm)) / (2.0 * eps);
            assert!((fd - g.dw[d]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn direct_sum_agrees_with_log_domain() {
        let noise = NoiseSpec::uniform_order(vec![0.4, 0.6], 3).unwrap();
        let h: Vec<f64> = (0..16).map(|i| ((i * 37 % 11) as f64) * 0.13 - 0.6).collect();
        let mu: Vec<f64> = (0..8).map(|i| 1.0 + (i * 5 % 7) as f64).collect();
        let total: f64 = mu.iter().sum();
        let mu: Vec<f64> = mu.iter().map(|m| m / total).collect();
        let xi = [0.17, -0.41];
        for k in 0..8 {
            let ll = predictive_log_likelihood(&h, &mu, k, 3, &xi, &noise).unwrap();
            let direct: f64 = (0..8)
                .map(|l| {
                    mu[l] * (0..2)
                        .map(|d| noise.log_density(d, h[k * 2 + d] - h[l * 2 + d] + xi[d]).exp())
                        .product::<f64>()
                })
                .sum();
            assert!((ll - direct.ln()).abs() < 1e-10 * ll.abs());
        }
    }
}
