use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{OedError, Result};

/// One-dimensional quadrature rule normalized as a probability measure.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ wᵢ g(xᵢ)
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    /// Affine image `x ↦ shift + scale·x`; weights unchanged.
    pub fn affine(&self, shift: f64, scale: f64) -> Self {
        Self {
            nodes: self.nodes.iter().map(|&x| shift + scale * x).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// Golub–Welsch: nodes are eigenvalues of the symmetric Jacobi matrix, weights
/// the squared first eigenvector components (normalized to total mass one).
fn golub_welsch(off_diagonal: &[f64]) -> Quadrature1D {
    let n = off_diagonal.len() + 1;
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for (i, &b) in off_diagonal.iter().enumerate() {
        jacobi[(i, i + 1)] = b;
        jacobi[(i + 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| (eig.eigenvalues[j], eig.eigenvectors[(0, j)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Both families are symmetric about zero; enforce it to kill round-off
    // in odd moments.
    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Quadrature1D { nodes, weights }
}

/// Gauss–Hermite rule for the standard normal density (probabilists'
/// normalization). Exact for polynomials of degree ≤ 2n − 1.
pub fn gauss_hermite(n: usize) -> Result<Quadrature1D> {
    if n == 0 {
        return Err(OedError::Argument(
            "Gauss-Hermite order must be at least 1".into(),
        ));
    }
    let off: Vec<f64> = (1..n).map(|i| (i as f64).sqrt()).collect();
    Ok(golub_welsch(&off))
}

/// Gauss–Legendre rule for the uniform probability measure on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Quadrature1D> {
    if n == 0 {
        return Err(OedError::Argument(
            "Gauss-Legendre order must be at least 1".into(),
        ));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(OedError::Argument(format!(
            "Gauss-Legendre interval requires a < b, got [{a}, {b}]"
        )));
    }
    let off: Vec<f64> = (1..n)
        .map(|i| {
            let i = i as f64;
            i / (4.0 * i * i - 1.0).sqrt()
        })
        .collect();
    Ok(golub_welsch(&off).affine(0.5 * (a + b), 0.5 * (b - a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_moment(p: u32) -> f64 {
        if p % 2 == 1 {
            0.0
        } else {
            // (p − 1)!!
            (1..p).step_by(2).map(f64::from).product()
        }
    }

    #[test]
    fn hermite_small_orders() {
        let q = gauss_hermite(1).unwrap();
        assert_eq!(q.nodes, vec![0.0]);
        assert_eq!(q.weights, vec![1.0]);

        let q = gauss_hermite(2).unwrap();
        assert!((q.nodes[0] + 1.0).abs() < 1e-14 && (q.nodes[1] - 1.0).abs() < 1e-14);
        assert!((q.weights[0] - 0.5).abs() < 1e-14 && (q.weights[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn hermite_tenth_moment_at_order_six() {
        let q = gauss_hermite(6).unwrap();
        assert!((q.integrate(|z| z.powi(10)) - 945.0).abs() < 1e-8);
    }

    #[test]
    fn hermite_exact_up_to_degree_2n_minus_1() {
        for n in 1..=20usize {
            let q = gauss_hermite(n).unwrap();
            for p in 0..(2 * n as u32) {
                let exact = normal_moment(p);
                let got = q.integrate(|z| z.powi(p as i32));
                // Round-off is relative to the summed magnitudes; odd moments cancel to zero.
                let scale = q.integrate(|z| z.abs().powi(p as i32)).max(1.0);
                assert!(
                    (got - exact).abs() <= 1e-8 * scale,
                    "n={n} p={p}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn legendre_examples() {
        let q = gauss_legendre(1, 5.0, 10.0).unwrap();
        assert_eq!(q.nodes, vec![7.5]);
        assert_eq!(q.weights, vec![1.0]);

        let q = gauss_legendre(2, 5.0, 10.0).unwrap();
        let h = 2.5 / 3f64.sqrt();
        assert!((q.nodes[0] - (7.5 - h)).abs() < 1e-13);
        assert!((q.nodes[1] - (7.5 + h)).abs() < 1e-13);
        assert!((q.nodes[0] - 6.05662).abs() < 1e-5 && (q.nodes[1] - 8.94338).abs() < 1e-5);

        let q = gauss_legendre(8, 5.0, 10.0).unwrap();
        assert!((q.integrate(|t| t * t) - 175.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn legendre_high_order_is_stable() {
        let q = gauss_legendre(64, -1.0, 1.0).unwrap();
        assert!(q.weights.iter().all(|&w| w > 0.0));
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // ∫ x^126 dx / 2 over [−1, 1] = 1/127
        assert!((q.integrate(|x| x.powi(126)) - 1.0 / 127.0).abs() < 1e-12);
    }

    #[test]
    fn argument_errors() {
        assert!(gauss_hermite(0).is_err());
        assert!(gauss_legendre(0, 0.0, 1.0).is_err());
        assert!(gauss_legendre(3, 1.0, 1.0).is_err());
        assert!(gauss_legendre(3, 2.0, 1.0).is_err());
    }
}
