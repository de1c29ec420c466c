use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};

use crate::criteria::{tilt_masses, Center, CellProblem};
use crate::error::{OedError, Result};
use crate::measure::{gaussian_cloud, NoiseSpec, ParticleCloud};

/// Observations `y_{i,d} = H_{i,d} θ + b_{i,d} + ε`, `ε ~ N(0, R_{i,d})` of
/// one stage; inactive sensors are not measured.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGaussianStage {
    pub rows: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
    pub variances: Vec<f64>,
    pub active: Vec<bool>,
}

/// Linear-Gaussian sequential experiment with prior `N(m₀, Σ₀)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGaussianModel {
    pub prior_mean: DVector<f64>,
    pub prior_cov: DMatrix<f64>,
    pub stages: Vec<LinearGaussianStage>,
}

impl LinearGaussianModel {
    pub fn dim(&self) -> usize {
        self.prior_mean.len()
    }

    pub fn sensors(&self) -> usize {
        self.stages.first().map_or(0, |s| s.rows.len())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 || self.prior_cov.shape() != (n, n) {
            return Err(OedError::Argument("prior covariance does not match the mean".into()));
        }
        if (&self.prior_cov - self.prior_cov.transpose()).abs().max() > 1e-12 * self.prior_cov.abs().max() {
            return Err(OedError::Argument("prior covariance is not symmetric".into()));
        }
        if self.prior_cov.clone().cholesky().is_none() {
            return Err(OedError::Argument("prior covariance is not positive definite".into()));
        }
        let ns = self.sensors();
        for s in &self.stages {
            let shapes = s.rows.len() == ns && s.offsets.len() == ns && s.variances.len() == ns && s.active.len() == ns;
            if !shapes || s.rows.iter().any(|r| r.len() != n) {
                return Err(OedError::Argument("stage shapes are inconsistent".into()));
            }
            if s.variances.iter().any(|v| !(*v > 0.0)) {
                return Err(OedError::Argument("noise variances must be positive".into()));
            }
        }
        Ok(())
    }

    /// `Σ_d active H_dᵀ R_d⁻¹ H_d` of stage `i`.
    pub fn stage_information(&self, i: usize) -> DMatrix<f64> {
        let n = self.dim();
        let s = &self.stages[i];
        let mut f = DMatrix::zeros(n, n);
        for d in 0..s.rows.len() {
            if s.active[d] {
                let h = DVector::from_column_slice(&s.rows[d]);
                f += &h * h.transpose() / s.variances[d];
            }
        }
        f
    }

    /// Random instance: SPD prior covariance, Gaussian rows, active pattern
    /// with probability ½ per entry.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize, stages: usize, sensors: usize) -> Self {
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        let prior_cov = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.5;
        let prior_mean = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let stages = (0..stages)
            .map(|_| LinearGaussianStage {
                rows: (0..sensors)
                    .map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect())
                    .collect(),
                offsets: (0..sensors).map(|_| rng.random_range(-1.0..1.0)).collect(),
                variances: (0..sensors).map(|_| rng.random_range(0.2..2.0)).collect(),
                active: (0..sensors).map(|_| rng.random_bool(0.5)).collect(),
            })
            .collect();
        Self {
            prior_mean,
            prior_cov,
            stages,
        }
    }
}

fn spd_logdet(m: &DMatrix<f64>) -> Result<f64> {
    let c = m
        .clone()
        .cholesky()
        .ok_or_else(|| OedError::Numeric("matrix is not positive definite".into()))?;
    Ok(2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Exact expected information gain `Σ_i ½ log det(I + Σ_{i−1} F_iΔ)` and its
/// stage increments, with the covariance propagated by Kalman updates.
pub fn lg_eig_closed_form(model: &LinearGaussianModel) -> Result<(f64, Vec<f64>)> {
    model.validate()?;
    let n = model.dim();
    let mut cov = model.prior_cov.clone();
    let mut increments = Vec::with_capacity(model.stages.len());
    for (i, stage) in model.stages.iter().enumerate() {
        let fd = model.stage_information(i);
        let l = cov
            .clone()
            .cholesky()
            .ok_or_else(|| OedError::Numeric("covariance lost positive definiteness".into()))?
            .l();
        let sym = DMatrix::identity(n, n) + l.transpose() * &fd * &l;
        increments.push(0.5 * spd_logdet(&sym)?);
        for d in 0..stage.rows.len() {
            if !stage.active[d] {
                continue;
            }
            let h = DVector::from_column_slice(&stage.rows[d]);
            let ph = &cov * &h;
            let s = stage.variances[d] + h.dot(&ph);
            cov -= &ph * ph.transpose() / s;
            cov = (&cov + cov.transpose()) * 0.5;
        }
    }
    Ok((increments.iter().sum(), increments))
}

/// Tilting surrogate evaluated analytically: the prior tilted by the
/// accumulated information is `N(m₀, (Σ₀⁻¹ + F_{i−1})⁻¹)`, and each stage
/// contributes the Gaussian mutual information computed in observation space.
pub fn lg_tilt_exact(model: &LinearGaussianModel) -> Result<f64> {
    model.validate()?;
    let n = model.dim();
    let prior_precision = model
        .prior_cov
        .clone()
        .try_inverse()
        .ok_or_else(|| OedError::Numeric("singular prior covariance".into()))?;
    let mut acc = DMatrix::zeros(n, n);
    let mut total = 0.0;
    for (i, stage) in model.stages.iter().enumerate() {
        let tilted = (&prior_precision + &acc)
            .try_inverse()
            .ok_or_else(|| OedError::Numeric("singular tilted precision".into()))?;
        let act: Vec<usize> = (0..stage.rows.len()).filter(|&d| stage.active[d]).collect();
        if !act.is_empty() {
            let h = DMatrix::from_fn(act.len(), n, |r, c| stage.rows[act[r]][c]);
            let r = DMatrix::from_fn(act.len(), act.len(), |a, b| {
                if a == b {
                    stage.variances[act[a]]
                } else {
                    0.0
                }
            });
            let marginal = &r + &h * &tilted * h.transpose();
            total += 0.5 * (spd_logdet(&marginal)? - spd_logdet(&r)?);
        }
        acc += model.stage_information(i);
    }
    Ok(total)
}

/// Particle tilting surrogate of a linear-Gaussian model: the prior is
/// replaced by its tensor Gauss–Hermite cloud of order `prior_order`, the
/// noise expectation by Gauss–Hermite rules of order `noise_order`, and the
/// tilt is centered at the cloud mean. Noise variances must not vary across
/// stages.
pub fn lg_tilt_particle(model: &LinearGaussianModel, prior_order: usize, noise_order: usize) -> Result<f64> {
    model.validate()?;
    let n = model.dim();
    let ns = model.sensors();
    let m0: Vec<f64> = model.prior_mean.iter().copied().collect();
    let cloud = gaussian_cloud(&m0, &model.prior_cov, &vec![prior_order; n])?;
    let sigma: Vec<f64> = (0..ns)
        .map(|d| model.stages.first().map_or(1.0, |s| s.variances[d]).sqrt())
        .collect();
    if model
        .stages
        .iter()
        .any(|s| (0..ns).any(|d| (s.variances[d].sqrt() - sigma[d]).abs() > 1e-14 * sigma[d]))
    {
        return Err(OedError::Argument("noise variances must be time-invariant".into()));
    }
    let noise = NoiseSpec::uniform_order(sigma, noise_order)?;
    let centers = vec![Center {
        theta: cloud.mean().to_vec(),
        mass: 1.0,
    }];
    let np = cloud.len();
    let mut h = Vec::with_capacity(model.stages.len() * np * ns);
    let mut mu = Vec::with_capacity(model.stages.len() * np);
    let mut w = Vec::with_capacity(model.stages.len() * ns);
    let mut acc = DMatrix::zeros(n, n);
    for (i, stage) in model.stages.iter().enumerate() {
        for k in 0..np {
            let theta = cloud.atom(k);
            for d in 0..ns {
                let dot: f64 = stage.rows[d].iter().zip(theta).map(|(a, b)| a * b).sum();
                h.push(dot + stage.offsets[d]);
            }
        }
        mu.extend(tilt_masses(&cloud, &centers, &[&acc]).0);
        w.extend(stage.active.iter().map(|&a| if a { 1.0 } else { 0.0 }));
        acc += model.stage_information(i);
    }
    let problem = CellProblem {
        particles: np,
        sensors: ns,
        cell_width: 1.0,
        h: &h,
        mu: &mu,
        w: &w,
    };
    Ok(-crate::criteria::sum_cells(&noise, &problem, false)?.value)
}

/// Cloud used by [`lg_tilt_particle`], for callers that need the same atoms.
pub fn lg_prior_cloud(model: &LinearGaussianModel, order: usize) -> Result<ParticleCloud> {
    let m0: Vec<f64> = model.prior_mean.iter().copied().collect();
    gaussian_cloud(&m0, &model.prior_cov, &vec![order; model.dim()])
}

/// The fixed scalar benchmark: `θ ~ N(0.5, 1)`, four stages observing
/// `h_i θ + b_i` with unit noise variance.
pub fn scalar_lg_benchmark() -> LinearGaussianModel {
    let rows = [0.8, -1.2, 0.5, 1.5];
    let offsets = [0.3, -0.1, 0.7, 0.0];
    LinearGaussianModel {
        prior_mean: DVector::from_element(1, 0.5),
        prior_cov: DMatrix::from_element(1, 1, 1.0),
        stages: rows
            .iter()
            .zip(offsets)
            .map(|(&r, b)| LinearGaussianStage {
                rows: vec![vec![r]],
                offsets: vec![b],
                variances: vec![1.0],
                active: vec![true],
            })
            .collect(),
    }
}
