use std::f64::consts::{E, PI};

use super::quadrature::{gauss_hermite, Quadrature1D};
use crate::error::{OedError, Result};

/// Time-invariant additive Gaussian noise, one scalar channel per sensor.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub sigma: Vec<f64>,
    /// Gauss–Hermite order used to integrate over each channel's noise.
    pub orders: Vec<usize>,
}

impl NoiseSpec {
    pub fn new(sigma: Vec<f64>, orders: Vec<usize>) -> Result<Self> {
        let spec = Self { sigma, orders };
        spec.validate()?;
        Ok(spec)
    }

    /// Same order on every channel.
    pub fn uniform_order(sigma: Vec<f64>, order: usize) -> Result<Self> {
        let orders = vec![order; sigma.len()];
        Self::new(sigma, orders)
    }

    pub fn sensor_count(&self) -> usize {
        self.sigma.len()
    }

    pub fn variance(&self, d: usize) -> f64 {
        self.sigma[d] * self.sigma[d]
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma.is_empty() {
            return Err(OedError::Config("at least one sensor is required".into()));
        }
        if self.sigma.len() != self.orders.len() {
            return Err(OedError::Config(format!(
                "{} noise levels but {} quadrature orders",
                self.sigma.len(),
                self.orders.len()
            )));
        }
        for (d, &s) in self.sigma.iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                return Err(OedError::Config(format!(
                    "sigma_{} must be positive",
                    d + 1
                )));
            }
        }
        for (d, &q) in self.orders.iter().enumerate() {
            if q < 2 {
                return Err(OedError::Config(format!(
                    "noise quadrature order for sensor {} must be at least 2",
                    d + 1
                )));
            }
        }
        Ok(())
    }

    /// Gauss–Hermite rule for channel `d`, nodes scaled by σ_d.
    pub fn sensor_rule(&self, d: usize) -> Quadrature1D {
        gauss_hermite(self.orders[d])
            .expect("orders validated")
            .affine(0.0, self.sigma[d])
    }

    /// log of the Gaussian density of channel `d` at residual `r`.
    #[inline]
    pub fn log_density(&self, d: usize, r: f64) -> f64 {
        let s = self.sigma[d];
        -0.5 * (r / s) * (r / s) - (s * (2.0 * PI).sqrt()).ln()
    }
}

/// Differential entropy of channel `d` in nats.
pub fn noise_entropy(noise: &NoiseSpec, d: usize) -> f64 {
    0.5 * (2.0 * PI * E * noise.variance(d)).ln()
}

/// Tensor-product rule over all channels.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseQuadrature {
    pub sensor_count: usize,
    /// Row-major `Q × n_exp`.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NoiseQuadrature {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, q: usize) -> &[f64] {
        &self.nodes[q * self.sensor_count..(q + 1) * self.sensor_count]
    }
}

pub fn noise_quadrature(noise: &NoiseSpec) -> NoiseQuadrature {
    let rules: Vec<Quadrature1D> = (0..noise.sensor_count())
        .map(|d| noise.sensor_rule(d))
        .collect();
    let n_exp = rules.len();
    let total: usize = rules.iter().map(Quadrature1D::len).product();
    let mut nodes = Vec::with_capacity(total * n_exp);
    let mut weights = Vec::with_capacity(total);
    let mut index = vec![0usize; n_exp];
    for _ in 0..total {
        let mut w = 1.0;
        for (d, rule) in rules.iter().enumerate() {
            nodes.push(rule.nodes[index[d]]);
            w *= rule.weights[index[d]];
        }
        weights.push(w);
        // mixed-radix increment, last sensor fastest
        for d in (0..n_exp).rev() {
            index[d] += 1;
            if index[d] < rules[d].len() {
                break;
            }
            index[d] = 0;
        }
    }
    NoiseQuadrature {
        sensor_count: n_exp,
        nodes,
        weights,
    }
}
