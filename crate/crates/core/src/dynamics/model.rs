use std::fmt::Debug;

use crate::scalar::{Dual, Scalar};

/// Controlled ODE `ẋ = f(x, u, θ, t)` with scalar observation channels
/// `y_d = h_d(x)`.
///
/// Both maps are written generically over [`Scalar`]; Jacobians and the
/// second directional derivatives needed for exact design gradients are
/// obtained by evaluating them on dual numbers.
pub trait Model: Clone + Debug + Send + Sync {
    fn state_dim(&self) -> usize;
    fn param_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn sensor_count(&self) -> usize;

    fn rhs<S: Scalar>(&self, x: &[S], u: &[S], theta: &[S], t: f64, dx: &mut [S]);

    fn observe<S: Scalar>(&self, sensor: usize, x: &[S]) -> S;
}

/// Dense Jacobians of `f`, row-major with `n_x` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobians {
    pub fx: Vec<f64>,
    pub ftheta: Vec<f64>,
    pub fu: Vec<f64>,
}

fn seeded(values: &[f64], hot: Option<usize>) -> Vec<Dual> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| Dual::new(v, if Some(i) == hot { 1.0 } else { 0.0 }))
        .collect()
}

/// Exact Jacobians of the right-hand side by forward-mode differentiation.
pub fn jacobians<M: Model>(model: &M, x: &[f64], u: &[f64], theta: &[f64], t: f64) -> Jacobians {
    let (nx, nt, nu) = (model.state_dim(), model.param_dim(), model.control_dim());
    let mut out = vec![Dual::default(); nx];
    let mut column = |xs: Vec<Dual>, us: Vec<Dual>, ts: Vec<Dual>, dest: &mut Vec<f64>, ncols: usize, j: usize| {
        model.rhs(&xs, &us, &ts, t, &mut out);
        for i in 0..nx {
            dest[i * ncols + j] = out[i].eps;
        }
    };
    let mut fx = vec![0.0; nx * nx];
    for j in 0..nx {
        column(seeded(x, Some(j)), seeded(u, None), seeded(theta, None), &mut fx, nx, j);
    }
    let mut ftheta = vec![0.0; nx * nt];
    for j in 0..nt {
        column(seeded(x, None), seeded(u, None), seeded(theta, Some(j)), &mut ftheta, nt, j);
    }
    let mut fu = vec![0.0; nx * nu];
    for j in 0..nu {
        column(seeded(x, None), seeded(u, Some(j)), seeded(theta, None), &mut fu, nu, j);
    }
    Jacobians { fx, ftheta, fu }
}

/// Gradient of observation channel `d` with respect to the state.
pub fn observation_gradient<M: Model>(model: &M, sensor: usize, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| model.observe(sensor, &seeded(x, Some(j))).eps)
        .collect()
}

/// Largest relative deviation between the AD Jacobians and central finite
/// differences with step `1e-6·(1 + |v|)`, over all entries at one point.
pub fn jacobian_fd_mismatch<M: Model>(model: &M, x: &[f64], u: &[f64], theta: &[f64], t: f64) -> f64 {
    let nx = model.state_dim();
    let jac = jacobians(model, x, u, theta, t);
    let f = |xs: &[f64], us: &[f64], ts: &[f64]| {
        let mut out = vec![0.0; nx];
        model.rhs(xs, us, ts, t, &mut out);
        out
    };
    let scale = jac
        .fx
        .iter()
        .chain(&jac.ftheta)
        .chain(&jac.fu)
        .fold(1e-8f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    let mut probe = |which: usize, j: usize, analytic: &[f64], ncols: usize| {
        let mut args = [x.to_vec(), u.to_vec(), theta.to_vec()];
        let base = args[which][j];
        let h = 1e-6 * (1.0 + base.abs());
        args[which][j] = base + h;
        let plus = f(&args[0], &args[1], &args[2]);
        args[which][j] = base - h;
        let minus = f(&args[0], &args[1], &args[2]);
        for i in 0..nx {
            let fd = (plus[i] - minus[i]) / (2.0 * h);
            let err = (fd - analytic[i * ncols + j]).abs() / scale;
            worst = worst.max(err);
        }
    };
    for j in 0..nx {
        probe(0, j, &jac.fx, nx);
    }
    for j in 0..u.len() {
        probe(1, j, &jac.fu, u.len());
    }
    for j in 0..theta.len() {
        probe(2, j, &jac.ftheta, theta.len());
    }
    worst
}
