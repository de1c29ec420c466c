use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};

use super::quadrature::{gauss_hermite, gauss_legendre, Quadrature1D};
use crate::error::{OedError, Result};

/// Gaussian component of log θ.
#[derive(Clone, Debug, PartialEq)]
pub struct LogNormalComponent {
    pub weight: f64,
    /// Mean of log θ.
    pub mean: Vec<f64>,
    /// Covariance of log θ.
    pub cov: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PriorSpec {
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    LogNormal { mean: Vec<f64>, cov: DMatrix<f64> },
    LogNormalMixture { components: Vec<LogNormalComponent> },
}

impl PriorSpec {
    pub fn dim(&self) -> usize {
        match self {
            PriorSpec::UniformBox { lower, .. } => lower.len(),
            PriorSpec::LogNormal { mean, .. } => mean.len(),
            PriorSpec::LogNormalMixture { components } => {
                components.first().map_or(0, |c| c.mean.len())
            }
        }
    }

    /// Bounding box of the support when it is bounded.
    pub fn support_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            PriorSpec::UniformBox { lower, upper } => Some((lower.clone(), upper.clone())),
            _ => None,
        }
    }

    /// True when the support is the positive orthant.
    pub fn is_positive(&self) -> bool {
        !matches!(self, PriorSpec::UniformBox { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorSpec::UniformBox { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(OedError::Argument(
                        "uniform prior bounds must be non-empty and of equal length".into(),
                    ));
                }
                if lower.iter().zip(upper).any(|(a, b)| !(a < b)) {
                    return Err(OedError::Argument(
                        "uniform prior requires lower < upper in every coordinate".into(),
                    ));
                }
            }
            PriorSpec::LogNormal { mean, cov } => {
                cholesky(mean.len(), cov)?;
            }
            PriorSpec::LogNormalMixture { components } => {
                if components.is_empty() {
                    return Err(OedError::Argument("mixture has no components".into()));
                }
                let dim = components[0].mean.len();
                for c in components {
                    if c.mean.len() != dim {
                        return Err(OedError::Argument(
                            "mixture components differ in dimension".into(),
                        ));
                    }
                    if !(c.weight > 0.0) {
                        return Err(OedError::Argument(
                            "mixture weights must be positive".into(),
                        ));
                    }
                    cholesky(dim, &c.cov)?;
                }
            }
        }
        Ok(())
    }

    /// One draw from the continuous prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            PriorSpec::UniformBox { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&a, &b)| a + (b - a) * rng.random::<f64>())
                .collect(),
            PriorSpec::LogNormal { mean, cov } => sample_lognormal(mean, cov, rng),
            PriorSpec::LogNormalMixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let mut pick = rng.random::<f64>() * total;
                let mut chosen = components.len() - 1;
                for (i, c) in components.iter().enumerate() {
                    if pick < c.weight {
                        chosen = i;
                        break;
                    }
                    pick -= c.weight;
                }
                let c = &components[chosen];
                sample_lognormal(&c.mean, &c.cov, rng)
            }
        }
    }
}

fn cholesky(dim: usize, cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if cov.nrows() != dim || cov.ncols() != dim {
        return Err(OedError::Argument(format!(
            "covariance must be {dim}x{dim}, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let sym_err = (cov - cov.transpose()).abs().max();
    if sym_err > 1e-12 * cov.abs().max().max(1.0) {
        return Err(OedError::Argument("covariance is not symmetric".into()));
    }
    cov.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| OedError::Argument("covariance is not positive definite".into()))
}

fn sample_lognormal<R: Rng + ?Sized>(mean: &[f64], cov: &DMatrix<f64>, rng: &mut R) -> Vec<f64> {
    let l = cholesky(mean.len(), cov).expect("validated prior");
    let z = DVector::from_iterator(mean.len(), (0..mean.len()).map(|_| StandardNormal.sample(rng)));
    let y = l * z;
    mean.iter().zip(y.iter()).map(|(m, v)| (m + v).exp()).collect()
}

/// Weighted Dirac mixture `Σ m_k δ_{θ_k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud {
    dim: usize,
    /// Row-major `N × n_θ`.
    atoms: Vec<f64>,
    masses: Vec<f64>,
    mean: Vec<f64>,
}

impl ParticleCloud {
    /// Masses are renormalized to sum to one.
    pub fn new(dim: usize, atoms: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if dim == 0 || masses.is_empty() || atoms.len() != dim * masses.len() {
            return Err(OedError::Argument(format!(
                "particle cloud shape mismatch: dim {dim}, {} coordinates, {} masses",
                atoms.len(),
                masses.len()
            )));
        }
        if masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(OedError::Argument("particle masses must be positive".into()));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(OedError::Argument("particle atoms must be finite".into()));
        }
        let total: f64 = masses.iter().sum();
        let masses: Vec<f64> = masses.iter().map(|m| m / total).collect();
        let mut mean = vec![0.0; dim];
        for (k, &m) in masses.iter().enumerate() {
            for (i, v) in mean.iter_mut().enumerate() {
                *v += m * atoms[k * dim + i];
            }
        }
        Ok(Self {
            dim,
            atoms,
            masses,
            mean,
        })
    }

    /// Single atom of unit mass.
    pub fn dirac(theta: &[f64]) -> Result<Self> {
        Self::new(theta.len(), theta.to_vec(), vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn atom(&self, k: usize) -> &[f64] {
        &self.atoms[k * self.dim..(k + 1) * self.dim]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Union of clouds, each scaled by its mixture weight.
    pub fn mixture(parts: &[(f64, ParticleCloud)]) -> Result<Self> {
        let dim = parts
            .first()
            .map(|p| p.1.dim)
            .ok_or_else(|| OedError::Argument("empty mixture".into()))?;
        let total: f64 = parts.iter().map(|p| p.0).sum();
        let mut atoms = Vec::new();
        let mut masses = Vec::new();
        for (w, cloud) in parts {
            if cloud.dim != dim {
                return Err(OedError::Argument("mixture parts differ in dimension".into()));
            }
            atoms.extend_from_slice(&cloud.atoms);
            masses.extend(cloud.masses.iter().map(|m| m * w / total));
        }
        Self::new(dim, atoms, masses)
    }

    /// Indices of the `count` heaviest atoms, ties broken by index.
    pub fn heaviest(&self, count: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.masses[b].total_cmp(&self.masses[a]).then(a.cmp(&b)));
        idx.truncate(count);
        idx
    }
}

fn tensor_cloud(rules: &[Quadrature1D], map: impl Fn(&[f64]) -> Vec<f64>) -> Result<ParticleCloud> {
    let dim = rules.len();
    let total: usize = rules.iter().map(Quadrature1D::len).product();
    let mut atoms = Vec::with_capacity(total * dim);
    let mut masses = Vec::with_capacity(total);
    let mut index = vec![0usize; dim];
    let mut z = vec![0.0; dim];
    for _ in 0..total {
        let mut m = 1.0;
        for (i, rule) in rules.iter().enumerate() {
            z[i] = rule.nodes[index[i]];
            m *= rule.weights[index[i]];
        }
        atoms.extend(map(&z));
        masses.push(m);
        for i in (0..dim).rev() {
            index[i] += 1;
            if index[i] < rules[i].len() {
                break;
            }
            index[i] = 0;
        }
    }
    ParticleCloud::new(dim, atoms, masses)
}

/// Tensor Gauss–Hermite discretization of `N(mean, cov)`, nodes mapped
/// through the lower Cholesky factor.
pub fn gaussian_cloud(mean: &[f64], cov: &DMatrix<f64>, orders: &[usize]) -> Result<ParticleCloud> {
    gaussian_nodes(mean, cov, orders, |v| v)
}

fn gaussian_nodes(
    mean: &[f64],
    cov: &DMatrix<f64>,
    orders: &[usize],
    map: impl Fn(f64) -> f64,
) -> Result<ParticleCloud> {
    let dim = mean.len();
    if orders.len() != dim {
        return Err(OedError::Argument(format!(
            "{} quadrature orders for a {dim}-dimensional prior",
            orders.len()
        )));
    }
    let l = cholesky(dim, cov)?;
    let rules = orders
        .iter()
        .map(|&n| gauss_hermite(n))
        .collect::<Result<Vec<_>>>()?;
    tensor_cloud(&rules, |z| {
        (0..dim)
            .map(|i| {
                let shift: f64 = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
                map(mean[i] + shift)
            })
            .collect()
    })
}

fn lognormal_cloud(mean: &[f64], cov: &DMatrix<f64>, orders: &[usize]) -> Result<ParticleCloud> {
    gaussian_nodes(mean, cov, orders, f64::exp)
}

/// Deterministic quadrature discretization of a prior.
pub fn build_prior(spec: &PriorSpec, orders: &[usize]) -> Result<ParticleCloud> {
    spec.validate()?;
    if orders.len() != spec.dim() {
        return Err(OedError::Argument(format!(
            "{} quadrature orders for a {}-dimensional prior",
            orders.len(),
            spec.dim()
        )));
    }
    if orders.iter().any(|&n| n == 0) {
        return Err(OedError::Argument("quadrature orders must be at least 1".into()));
    }
    match spec {
        PriorSpec::UniformBox { lower, upper } => {
            let rules = orders
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&n, (&a, &b))| gauss_legendre(n, a, b))
                .collect::<Result<Vec<_>>>()?;
            tensor_cloud(&rules, |z| z.to_vec())
        }
        PriorSpec::LogNormal { mean, cov } => lognormal_cloud(mean, cov, orders),
        PriorSpec::LogNormalMixture { components } => {
            let parts = components
                .iter()
                .map(|c| Ok((c.weight, lognormal_cloud(&c.mean, &c.cov, orders)?)))
                .collect::<Result<Vec<_>>>()?;
            ParticleCloud::mixture(&parts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ln2_prior(var: f64) -> PriorSpec {
        PriorSpec::LogNormal {
            mean: vec![2f64.ln(); 2],
            cov: DMatrix::identity(2, 2) * var,
        }
    }

    #[test]
    fn uniform_box_cloud() {
        let spec = PriorSpec::UniformBox {
            lower: vec![5.0, 5.0],
            upper: vec![10.0, 10.0],
        };
        let cloud = build_prior(&spec, &[8, 8]).unwrap();
        assert_eq!(cloud.len(), 64);
        assert!((cloud.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((cloud.mean()[0] - 7.5).abs() < 1e-12);
        assert!((cloud.mean()[1] - 7.5).abs() < 1e-12);
    }

    #[test]
    fn lognormal_mean_converges() {
        let cloud = build_prior(&ln2_prior(0.2), &[6, 6]).unwrap();
        let exact = 2.0 * 0.1f64.exp();
        assert!((cloud.mean()[0] - exact).abs() < 1e-3);
        assert!((cloud.mean()[1] - exact).abs() < 1e-3);
        assert!((exact - 2.21034).abs() < 1e-5);
    }

    #[test]
    fn mixture_halves_masses() {
        let a = build_prior(&ln2_prior(0.2), &[3, 3]).unwrap();
        let b = build_prior(&ln2_prior(0.05), &[2, 2]).unwrap();
        let mix = ParticleCloud::mixture(&[(0.5, a.clone()), (0.5, b)]).unwrap();
        assert_eq!(mix.len(), 9 + 4);
        for k in 0..a.len() {
            assert!((mix.masses()[k] - 0.5 * a.masses()[k]).abs() < 1e-15);
        }
        assert!((mix.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_pd_covariance_rejected() {
        let spec = PriorSpec::LogNormal {
            mean: vec![0.0, 0.0],
            cov: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
        };
        assert!(build_prior(&spec, &[3, 3]).is_err());
    }

    #[test]
    fn uniform_samples_stay_in_box() {
        let spec = PriorSpec::UniformBox {
            lower: vec![5.0, 5.0],
            upper: vec![10.0, 10.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let t = spec.sample(&mut rng);
            assert!(t.iter().all(|&v| (5.0..=10.0).contains(&v)));
        }
    }

    #[test]
    fn heaviest_breaks_ties_by_index() {
        let cloud = ParticleCloud::new(1, vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert_eq!(cloud.heaviest(3), vec![1, 2, 0]);
    }
}
