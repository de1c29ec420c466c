use super::model::Model;
use super::spec::{ProblemSpec, SensitivityPath, TimeGrid, Trajectory};
use crate::error::{OedError, Result};
use crate::scalar::{Dual, HyperDual, Scalar};

/// Classical fourth-order Runge–Kutta stepper over a flat state vector.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    pub(crate) fn step<F>(&mut self, y: &mut [f64], t: f64, h: f64, rhs: &mut F)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let half = 0.5 * h;
        rhs(t, y, &mut self.k1);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + half * self.k1[i];
        }
        rhs(t + half, &self.tmp, &mut self.k2);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + half * self.k2[i];
        }
        rhs(t + half, &self.tmp, &mut self.k3);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        rhs(t + h, &self.tmp, &mut self.k4);
        let sixth = h / 6.0;
        for i in 0..y.len() {
            y[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn control_slice<'a, M: Model>(spec: &ProblemSpec<M>, u: &'a [f64], interval: usize) -> &'a [f64] {
    let nu = spec.control_dim();
    &u[interval * nu..(interval + 1) * nu]
}

fn check_finite(y: &[f64], time: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(OedError::IntegrationBlowup { time })
    }
}

fn check_inputs<M: Model>(spec: &ProblemSpec<M>, u: &[f64], theta: &[f64]) -> Result<()> {
    spec.check_controls(u)?;
    if theta.len() != spec.param_dim() || theta.iter().any(|v| !v.is_finite()) {
        return Err(OedError::Argument(format!(
            "parameter vector must have {} finite entries",
            spec.param_dim()
        )));
    }
    Ok(())
}

/// Walks the grid with RK4 on an augmented system, calling `record` at every
/// node with the node index and the current state.
fn march<F, R>(grid: &TimeGrid, y: &mut [f64], mut rhs: F, mut record: R) -> Result<()>
where
    F: FnMut(usize, f64, &[f64], &mut [f64]),
    R: FnMut(usize, &[f64]),
{
    let mut rk = Rk4::new(y.len());
    record(0, y);
    let steps = grid.steps();
    for s in 0..steps {
        let interval = grid.control_of_step(s);
        let t = grid.times[s];
        let h = grid.times[s + 1] - t;
        rk.step(y, t, h, &mut |tt, yy, dy| rhs(interval, tt, yy, dy));
        check_finite(y, grid.times[s + 1])?;
        record(s + 1, y);
    }
    Ok(())
}

/// Trajectory of `ẋ = f(x, u, θ, t)` on every node of `grid`.
pub fn integrate<M: Model>(spec: &ProblemSpec<M>, u: &[f64], theta: &[f64], grid: &TimeGrid) -> Result<Trajectory> {
    check_inputs(spec, u, theta)?;
    let nx = spec.state_dim();
    let mut y = spec.x0.clone();
    let mut states = Vec::with_capacity((grid.steps() + 1) * nx);
    march(
        grid,
        &mut y,
        |p, t, x, dx| spec.model.rhs(x, control_slice(spec, u, p), theta, t, dx),
        |_, x| states.extend_from_slice(x),
    )?;
    Ok(Trajectory { state_dim: nx, states })
}

/// Right-hand side of the state plus forward-sensitivity system, state
/// layout `[x | G]` with `G` row-major `n_x × n_θ`.
fn sensitivity_rhs<M: Model>(
    model: &M,
    ctrl: &[f64],
    theta: &[f64],
    t: f64,
    y: &[f64],
    dy: &mut [f64],
    xs: &mut [Dual],
    us: &mut [Dual],
    ts: &mut [Dual],
    out: &mut [Dual],
) {
    let nx = model.state_dim();
    let nt = model.param_dim();
    for (slot, &v) in us.iter_mut().zip(ctrl) {
        *slot = Dual::constant(v);
    }
    for j in 0..nt {
        for i in 0..nx {
            xs[i] = Dual::new(y[i], y[nx + i * nt + j]);
        }
        for (l, slot) in ts.iter_mut().enumerate() {
            *slot = Dual::new(theta[l], if l == j { 1.0 } else { 0.0 });
        }
        model.rhs(xs, us, ts, t, out);
        for i in 0..nx {
            if j == 0 {
                dy[i] = out[i].re;
            }
            dy[nx + i * nt + j] = out[i].eps;
        }
    }
}

/// Co-integrates the state and its parameter sensitivity `G = ∂x/∂θ`.
pub fn integrate_with_sensitivity<M: Model>(
    spec: &ProblemSpec<M>,
    u: &[f64],
    theta: &[f64],
    grid: &TimeGrid,
) -> Result<(Trajectory, SensitivityPath)> {
    check_inputs(spec, u, theta)?;
    let (nx, nt, nu) = (spec.state_dim(), spec.param_dim(), spec.control_dim());
    let mut y = vec![0.0; nx * (1 + nt)];
    y[..nx].copy_from_slice(&spec.x0);
    let nodes = grid.steps() + 1;
    let mut states = Vec::with_capacity(nodes * nx);
    let mut sens = Vec::with_capacity(nodes * nx * nt);
    let mut xs = vec![Dual::default(); nx];
    let mut us = vec![Dual::default(); nu];
    let mut ts = vec![Dual::default(); nt];
    let mut out = vec![Dual::default(); nx];
    march(
        grid,
        &mut y,
        |p, t, yy, dy| {
            sensitivity_rhs(
                &spec.model,
                control_slice(spec, u, p),
                theta,
                t,
                yy,
                dy,
                &mut xs,
                &mut us,
                &mut ts,
                &mut out,
            )
        },
        |_, yy| {
            states.extend_from_slice(&yy[..nx]);
            sens.extend_from_slice(&yy[nx..]);
        },
    )?;
    Ok((
        Trajectory { state_dim: nx, states },
        SensitivityPath {
            state_dim: nx,
            param_dim: nt,
            values: sens,
        },
    ))
}

/// Particle states at every weight-cell midpoint together with their
/// derivatives with respect to each control value.
#[derive(Clone, Debug)]
pub struct MidpointStates {
    pub state_dim: usize,
    /// Number of control directions (`N_u · n_u`, or 0 without tangents).
    pub directions: usize,
    /// `N_w × n_x`
    pub x: Vec<f64>,
    /// `N_w × directions × n_x`
    pub dx: Vec<f64>,
}

impl MidpointStates {
    pub fn state(&self, c: usize) -> &[f64] {
        &self.x[c * self.state_dim..(c + 1) * self.state_dim]
    }

    /// `∂x(t_c)/∂u_i`.
    pub fn tangent(&self, c: usize, i: usize) -> &[f64] {
        let nx = self.state_dim;
        let base = (c * self.directions + i) * nx;
        &self.dx[base..base + nx]
    }
}

/// Direction `i` perturbs control component `i % n_u` on interval `i / n_u`.
#[inline]
fn direction_interval(i: usize, nu: usize) -> usize {
    i / nu
}

/// Integrates one particle, recording midpoint states and (optionally) the
/// exact derivatives of the discrete RK4 solution with respect to `u`.
pub fn midpoint_states<M: Model>(
    spec: &ProblemSpec<M>,
    u: &[f64],
    theta: &[f64],
    grid: &TimeGrid,
    with_tangents: bool,
) -> Result<MidpointStates> {
    check_inputs(spec, u, theta)?;
    let (nx, nu) = (spec.state_dim(), spec.control_dim());
    let dirs = if with_tangents { spec.control_len() } else { 0 };
    let mut y = vec![0.0; nx * (1 + dirs)];
    y[..nx].copy_from_slice(&spec.x0);
    let cells = spec.weight_cells;
    let mut x_mid = vec![0.0; cells * nx];
    let mut dx_mid = vec![0.0; cells * dirs * nx];
    let mut xs = vec![Dual::default(); nx];
    let mut us = vec![Dual::default(); nu];
    let ts: Vec<Dual> = theta.iter().map(|&v| Dual::constant(v)).collect();
    let mut out = vec![Dual::default(); nx];
    // column-major Jacobians of f with respect to x and u
    let mut fx = vec![0.0; nx * nx];
    let mut fu = vec![0.0; nx * nu];
    let model = &spec.model;
    let spc = grid.steps_per_cell;
    let half = spc / 2;
    march(
        grid,
        &mut y,
        |p, t, yy, dy| {
            let ctrl = control_slice(spec, u, p);
            model.rhs(&yy[..nx], ctrl, theta, t, &mut dy[..nx]);
            let live = if dirs == 0 { 0 } else { (p + 1) * nu };
            if live == 0 {
                return;
            }
            for (l, slot) in us.iter_mut().enumerate() {
                *slot = Dual::constant(ctrl[l]);
            }
            for j in 0..nx {
                for k in 0..nx {
                    xs[k] = Dual::new(yy[k], if k == j { 1.0 } else { 0.0 });
                }
                model.rhs(&xs, &us, &ts, t, &mut out);
                for k in 0..nx {
                    fx[j * nx + k] = out[k].eps;
                }
            }
            for k in 0..nx {
                xs[k] = Dual::constant(yy[k]);
            }
            for l in 0..nu {
                us[l] = Dual::new(ctrl[l], 1.0);
                model.rhs(&xs, &us, &ts, t, &mut out);
                for k in 0..nx {
                    fu[l * nx + k] = out[k].eps;
                }
                us[l] = Dual::constant(ctrl[l]);
            }
            for i in 0..dirs {
                let base = nx * (1 + i);
                let d = &mut dy[base..base + nx];
                if i >= live {
                    d.iter_mut().for_each(|v| *v = 0.0);
                    continue;
                }
                if direction_interval(i, nu) == p {
                    d.copy_from_slice(&fu[(i % nu) * nx..(i % nu + 1) * nx]);
                } else {
                    d.iter_mut().for_each(|v| *v = 0.0);
                }
                for j in 0..nx {
                    let v = yy[base + j];
                    if v != 0.0 {
                        let col = &fx[j * nx..(j + 1) * nx];
                        for k in 0..nx {
                            d[k] += col[k] * v;
                        }
                    }
                }
            }
        },
        |s, yy| {
            if s % spc == half {
                let c = s / spc;
                x_mid[c * nx..(c + 1) * nx].copy_from_slice(&yy[..nx]);
                if dirs > 0 {
                    dx_mid[c * dirs * nx..(c + 1) * dirs * nx].copy_from_slice(&yy[nx..]);
                }
            }
        },
    )?;
    Ok(MidpointStates {
        state_dim: nx,
        directions: dirs,
        x: x_mid,
        dx: dx_mid,
    })
}

/// Reference trajectory, its sensitivity `G`, and (optionally) the
/// derivatives of both with respect to every control value, at every
/// weight-cell midpoint.
#[derive(Clone, Debug)]
pub struct ReferenceStates {
    pub state_dim: usize,
    pub param_dim: usize,
    pub directions: usize,
    /// `N_w × n_x`
    pub x: Vec<f64>,
    /// `N_w × (n_x·n_θ)`
    pub g: Vec<f64>,
    /// `N_w × directions × n_x`
    pub dx: Vec<f64>,
    /// `N_w × directions × (n_x·n_θ)`
    pub dg: Vec<f64>,
}

impl ReferenceStates {
    pub fn state(&self, c: usize) -> &[f64] {
        &self.x[c * self.state_dim..(c + 1) * self.state_dim]
    }

    pub fn sensitivity(&self, c: usize) -> &[f64] {
        let b = self.state_dim * self.param_dim;
        &self.g[c * b..(c + 1) * b]
    }

    pub fn state_tangent(&self, c: usize, i: usize) -> &[f64] {
        let nx = self.state_dim;
        let base = (c * self.directions + i) * nx;
        &self.dx[base..base + nx]
    }

    pub fn sensitivity_tangent(&self, c: usize, i: usize) -> &[f64] {
        let b = self.state_dim * self.param_dim;
        let base = (c * self.directions + i) * b;
        &self.dg[base..base + b]
    }
}

pub fn reference_states<M: Model>(
    spec: &ProblemSpec<M>,
    u: &[f64],
    theta: &[f64],
    grid: &TimeGrid,
    with_tangents: bool,
) -> Result<ReferenceStates> {
    check_inputs(spec, u, theta)?;
    let (nx, nt, nu) = (spec.state_dim(), spec.param_dim(), spec.control_dim());
    let gb = nx * nt;
    let dirs = if with_tangents { spec.control_len() } else { 0 };
    let base_len = nx + gb;
    let len = base_len + dirs * (nx + gb);
    let mut y = vec![0.0; len];
    y[..nx].copy_from_slice(&spec.x0);
    let cells = spec.weight_cells;
    let mut rec = ReferenceStates {
        state_dim: nx,
        param_dim: nt,
        directions: dirs,
        x: vec![0.0; cells * nx],
        g: vec![0.0; cells * gb],
        dx: vec![0.0; cells * dirs * nx],
        dg: vec![0.0; cells * dirs * gb],
    };
    let model = &spec.model;
    let mut xs = vec![Dual::default(); nx];
    let mut us = vec![Dual::default(); nu];
    let mut ts = vec![Dual::default(); nt];
    let mut out = vec![Dual::default(); nx];
    let mut hx = vec![HyperDual::default(); nx];
    let mut hu = vec![HyperDual::default(); nu];
    let mut ht = vec![HyperDual::default(); nt];
    let mut hout = vec![HyperDual::default(); nx];
    let dx_off = base_len;
    let dg_off = base_len + dirs * nx;
    let spc = grid.steps_per_cell;
    let half = spc / 2;
    march(
        grid,
        &mut y,
        |p, t, yy, dy| {
            let ctrl = control_slice(spec, u, p);
            sensitivity_rhs(model, ctrl, theta, t, &yy[..base_len], &mut dy[..base_len], &mut xs, &mut us, &mut ts, &mut out);
            for i in 0..dirs {
                let ip = direction_interval(i, nu);
                let dxi = dx_off + i * nx;
                let dgi = dg_off + i * gb;
                if ip > p {
                    dy[dxi..dxi + nx].iter_mut().for_each(|v| *v = 0.0);
                    dy[dgi..dgi + gb].iter_mut().for_each(|v| *v = 0.0);
                    continue;
                }
                for (l, slot) in hu.iter_mut().enumerate() {
                    let hot = ip == p && l == i % nu;
                    *slot = HyperDual::new(ctrl[l], 0.0, if hot { 1.0 } else { 0.0 }, 0.0);
                }
                for j in 0..nt {
                    for k in 0..nx {
                        hx[k] = HyperDual::new(yy[k], yy[nx + k * nt + j], yy[dxi + k], yy[dgi + k * nt + j]);
                    }
                    for (l, slot) in ht.iter_mut().enumerate() {
                        *slot = HyperDual::new(theta[l], if l == j { 1.0 } else { 0.0 }, 0.0, 0.0);
                    }
                    model.rhs(&hx, &hu, &ht, t, &mut hout);
                    for k in 0..nx {
                        if j == 0 {
                            dy[dxi + k] = hout[k].e2;
                        }
                        dy[dgi + k * nt + j] = hout[k].e12;
                    }
                }
            }
        },
        |s, yy| {
            if s % spc == half {
                let c = s / spc;
                rec.x[c * nx..(c + 1) * nx].copy_from_slice(&yy[..nx]);
                rec.g[c * gb..(c + 1) * gb].copy_from_slice(&yy[nx..base_len]);
                if dirs > 0 {
                    rec.dx[c * dirs * nx..(c + 1) * dirs * nx].copy_from_slice(&yy[dx_off..dg_off]);
                    rec.dg[c * dirs * gb..(c + 1) * dirs * gb].copy_from_slice(&yy[dg_off..]);
                }
            }
        },
    )?;
    Ok(rec)
}

/// `Jᵀv` and `f_uᵀv` at one point, by forward-mode columns.
#[allow(clippy::too_many_arguments)]
fn transpose_products<M: Model>(
    model: &M,
    x: &[f64],
    ctrl: &[f64],
    theta: &[Dual],
    t: f64,
    v: &[f64],
    xs: &mut [Dual],
    us: &mut [Dual],
    out: &mut [Dual],
    jx: &mut [f64],
    ju: &mut [f64],
) {
    let nx = x.len();
    for (l, slot) in us.iter_mut().enumerate() {
        *slot = Dual::constant(ctrl[l]);
    }
    for j in 0..nx {
        for k in 0..nx {
            xs[k] = Dual::new(x[k], if k == j { 1.0 } else { 0.0 });
        }
        model.rhs(xs, us, theta, t, out);
        jx[j] = out.iter().zip(v).map(|(o, w)| o.eps * w).sum();
    }
    for k in 0..nx {
        xs[k] = Dual::constant(x[k]);
    }
    for l in 0..ctrl.len() {
        us[l] = Dual::new(ctrl[l], 1.0);
        model.rhs(xs, us, theta, t, out);
        ju[l] = out.iter().zip(v).map(|(o, w)| o.eps * w).sum();
        us[l] = Dual::constant(ctrl[l]);
    }
}

/// Gradient with respect to the control values of `Σ_c s_cᵀ x(t_c)`, where
/// `t_c` are the weight-cell midpoints and `sources` is row-major
/// `N_w × n_x`. This is the exact reverse-mode derivative of the discrete
/// RK4 solution; `trajectory` must come from [`integrate`] with the same
/// inputs.
pub fn control_adjoint<M: Model>(
    spec: &ProblemSpec<M>,
    u: &[f64],
    theta: &[f64],
    grid: &TimeGrid,
    trajectory: &Trajectory,
    sources: &[f64],
) -> Result<Vec<f64>> {
    check_inputs(spec, u, theta)?;
    let (nx, nu) = (spec.state_dim(), spec.control_dim());
    if sources.len() != spec.weight_cells * nx || trajectory.len() != grid.steps() + 1 {
        return Err(OedError::Argument("adjoint sources do not match the grid".into()));
    }
    let model = &spec.model;
    let ts: Vec<Dual> = theta.iter().map(|&v| Dual::constant(v)).collect();
    let mut xs = vec![Dual::default(); nx];
    let mut us = vec![Dual::default(); nu];
    let mut out = vec![Dual::default(); nx];
    let mut grad = vec![0.0; spec.control_len()];
    let mut lam = vec![0.0; nx];
    let (mut k1, mut k2, mut k3) = (vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]);
    let (mut y2, mut y3, mut y4) = (vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]);
    let (mut lk, mut jx, mut ju) = (vec![0.0; nx], vec![0.0; nx], vec![0.0; nu]);
    let mut lk_next = vec![0.0; nx];
    let spc = grid.steps_per_cell;
    let half_cell = spc / 2;
    for s in (0..grid.steps()).rev() {
        let node = s + 1;
        if node % spc == half_cell {
            let c = node / spc;
            for (l, v) in lam.iter_mut().zip(&sources[c * nx..(c + 1) * nx]) {
                *l += v;
            }
        }
        let interval = grid.control_of_step(s);
        let ctrl = control_slice(spec, u, interval);
        let t = grid.times[s];
        let h = grid.times[s + 1] - t;
        let half = 0.5 * h;
        let y = trajectory.state(s);
        // recompute the stages exactly as the forward step did
        model.rhs(y, ctrl, theta, t, &mut k1);
        for i in 0..nx {
            y2[i] = y[i] + half * k1[i];
        }
        model.rhs(&y2, ctrl, theta, t + half, &mut k2);
        for i in 0..nx {
            y3[i] = y[i] + half * k2[i];
        }
        model.rhs(&y3, ctrl, theta, t + half, &mut k3);
        for i in 0..nx {
            y4[i] = y[i] + h * k3[i];
        }
        let gu = &mut grad[interval * nu..(interval + 1) * nu];
        let mut lam_y = lam.clone();
        // stage 4
        for i in 0..nx {
            lk[i] = h / 6.0 * lam[i];
        }
        transpose_products(model, &y4, ctrl, &ts, t + h, &lk, &mut xs, &mut us, &mut out, &mut jx, &mut ju);
        for i in 0..nx {
            lam_y[i] += jx[i];
            lk_next[i] = h / 3.0 * lam[i] + h * jx[i];
        }
        gu.iter_mut().zip(&ju).for_each(|(g, v)| *g += v);
        // stage 3
        std::mem::swap(&mut lk, &mut lk_next);
        transpose_products(model, &y3, ctrl, &ts, t + half, &lk, &mut xs, &mut us, &mut out, &mut jx, &mut ju);
        for i in 0..nx {
            lam_y[i] += jx[i];
            lk_next[i] = h / 3.0 * lam[i] + half * jx[i];
        }
        gu.iter_mut().zip(&ju).for_each(|(g, v)| *g += v);
        // stage 2
        std::mem::swap(&mut lk, &mut lk_next);
        transpose_products(model, &y2, ctrl, &ts, t + half, &lk, &mut xs, &mut us, &mut out, &mut jx, &mut ju);
        for i in 0..nx {
            lam_y[i] += jx[i];
            lk_next[i] = h / 6.0 * lam[i] + half * jx[i];
        }
        gu.iter_mut().zip(&ju).for_each(|(g, v)| *g += v);
        // stage 1
        std::mem::swap(&mut lk, &mut lk_next);
        transpose_products(model, y, ctrl, &ts, t, &lk, &mut xs, &mut us, &mut out, &mut jx, &mut ju);
        for i in 0..nx {
            lam_y[i] += jx[i];
        }
        gu.iter_mut().zip(&ju).for_each(|(g, v)| *g += v);
        lam = lam_y;
        if lam.iter().any(|v| !v.is_finite()) {
            return Err(OedError::IntegrationBlowup { time: t });
        }
    }
    Ok(grad)
}
