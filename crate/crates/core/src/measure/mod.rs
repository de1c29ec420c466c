//! Quadrature rules, Dirac-mixture priors and sensor-noise models.

mod noise;
mod prior;
mod quadrature;

pub use noise::{noise_entropy, noise_quadrature, NoiseQuadrature, NoiseSpec};
pub use prior::{build_prior, gaussian_cloud, LogNormalComponent, ParticleCloud, PriorSpec};
pub use quadrature::{gauss_hermite, gauss_legendre, Quadrature1D};
