use crate::dynamics::Model;
use crate::scalar::{Dual, HyperDual};

/// Rows `H_d = (∂h_d/∂x) G` for every sensor, row-major `n_exp × n_θ`.
pub(crate) fn sensitivity_rows<M: Model>(model: &M, x: &[f64], g: &[f64], param_dim: usize) -> Vec<f64> {
    let ns = model.sensor_count();
    let mut out = vec![0.0; ns * param_dim];
    let mut xs: Vec<Dual> = vec![Dual::default(); x.len()];
    for l in 0..param_dim {
        for (m, slot) in xs.iter_mut().enumerate() {
            *slot = Dual::new(x[m], g[m * param_dim + l]);
        }
        for d in 0..ns {
            out[d * param_dim + l] = model.observe(d, &xs).eps;
        }
    }
    out
}

/// Derivative of [`sensitivity_rows`] along a control direction with state
/// tangent `dx` and sensitivity tangent `dg`.
pub(crate) fn sensitivity_rows_tangent<M: Model>(
    model: &M,
    x: &[f64],
    g: &[f64],
    dx: &[f64],
    dg: &[f64],
    param_dim: usize,
    out: &mut [f64],
) {
    let ns = model.sensor_count();
    let mut xs: Vec<HyperDual> = vec![HyperDual::default(); x.len()];
    for l in 0..param_dim {
        for (m, slot) in xs.iter_mut().enumerate() {
            *slot = HyperDual::new(x[m], g[m * param_dim + l], dx[m], dg[m * param_dim + l]);
        }
        for d in 0..ns {
            out[d * param_dim + l] = model.observe(d, &xs).e12;
        }
    }
}

/// `h_d(x)` for every sensor.
pub(crate) fn observations<M: Model>(model: &M, x: &[f64], out: &mut [f64]) {
    for (d, slot) in out.iter_mut().enumerate() {
        *slot = model.observe(d, x);
    }
}
