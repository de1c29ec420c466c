use nalgebra::DMatrix;
use rayon::prelude::*;

use super::design::{ObjectiveEval, RelaxedDesign};
use super::fisher::{accumulate, chain_increments, reference_rows, FisherAccumulator};
use super::likelihood::{CellEvaluator, CellGradient, CellScratch};
use super::sensing::observations;
use super::tilt::{check_centers, tilt_masses, Center};
use crate::dynamics::{control_adjoint, integrate, observation_gradient, reference_states, Model, ProblemSpec, Trajectory};
use crate::error::{OedError, Result};
use crate::measure::{NoiseSpec, ParticleCloud};

/// Time-discretized surrogate: per-cell observations of every particle and
/// per-cell masses.
pub(crate) struct CellProblem<'a> {
    pub particles: usize,
    pub sensors: usize,
    pub cell_width: f64,
    /// Row-major `cells × N × n_exp`.
    pub h: &'a [f64],
    /// Row-major `cells × N`.
    pub mu: &'a [f64],
    /// Row-major `cells × n_exp`.
    pub w: &'a [f64],
}

pub(crate) struct CellSums {
    pub value: f64,
    pub dw: Vec<f64>,
    pub dh: Vec<f64>,
    pub dmu: Vec<f64>,
}

/// `Δ Σ_c I_c` and, on request, its partial derivatives. Cells are evaluated
/// in parallel and reduced in cell order.
pub(crate) fn sum_cells(noise: &NoiseSpec, p: &CellProblem, want_grad: bool) -> Result<CellSums> {
    let ev = CellEvaluator::new(noise);
    let (n, ns) = (p.particles, p.sensors);
    let cells = p.w.len() / ns;
    let per_cell: Vec<(f64, Option<CellGradient>)> = (0..cells)
        .into_par_iter()
        .map_init(CellScratch::default, |scratch, c| {
            let h = &p.h[c * n * ns..(c + 1) * n * ns];
            let mu = &p.mu[c * n..(c + 1) * n];
            let w = &p.w[c * ns..(c + 1) * ns];
            if w.iter().all(|v| *v == 0.0) && !want_grad {
                return Ok((0.0, None));
            }
            let mut g = want_grad.then(|| CellGradient::new(n, ns));
            let v = ev.eval(h, mu, w, scratch, g.as_mut())?;
            Ok((v, g))
        })
        .collect::<Result<_>>()?;
    let dt = p.cell_width;
    let mut out = CellSums {
        value: 0.0,
        dw: Vec::new(),
        dh: Vec::new(),
        dmu: Vec::new(),
    };
    if want_grad {
        out.dw.reserve(cells * ns);
        out.dh.reserve(cells * n * ns);
        out.dmu.reserve(cells * n);
    }
    for (v, g) in per_cell {
        out.value += dt * v;
        if let Some(g) = g {
            out.dw.extend(g.dw.iter().map(|x| dt * x));
            out.dh.extend(g.dh.iter().map(|x| dt * x));
            out.dmu.extend(g.dmu.iter().map(|x| dt * x));
        }
    }
    if !out.value.is_finite() {
        return Err(OedError::Numeric("non-finite surrogate value".into()));
    }
    Ok(out)
}

/// Full trajectory of every particle, integrated once each.
fn particle_trajectories<M: Model>(spec: &ProblemSpec<M>, u: &[f64], prior: &ParticleCloud) -> Result<Vec<Trajectory>> {
    let grid = spec.grid();
    (0..prior.len())
        .into_par_iter()
        .map(|k| integrate(spec, u, prior.atom(k), &grid))
        .collect()
}

fn observation_table<M: Model>(spec: &ProblemSpec<M>, paths: &[Trajectory]) -> Vec<f64> {
    let (n, ns) = (paths.len(), spec.sensor_count());
    let grid = spec.grid();
    let mut h = vec![0.0; spec.weight_cells * n * ns];
    for c in 0..spec.weight_cells {
        let node = grid.midpoint_node(c);
        for (k, path) in paths.iter().enumerate() {
            let base = (c * n + k) * ns;
            observations(&spec.model, path.state(node), &mut h[base..base + ns]);
        }
    }
    h
}

/// Adds `Σ ∂V/∂h · ∂h/∂u` to the control part of `grad` by one adjoint
/// sweep per particle.
fn chain_observations<M: Model>(
    spec: &ProblemSpec<M>,
    u: &[f64],
    prior: &ParticleCloud,
    paths: &[Trajectory],
    dh: &[f64],
    grad: &mut [f64],
) -> Result<()> {
    let (n, ns, nx) = (paths.len(), spec.sensor_count(), spec.state_dim());
    let grid = spec.grid();
    let parts: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut sources = vec![0.0; spec.weight_cells * nx];
            let mut any = false;
            for c in 0..spec.weight_cells {
                let x = paths[k].state(grid.midpoint_node(c));
                for d in 0..ns {
                    let coef = dh[(c * n + k) * ns + d];
                    if coef == 0.0 {
                        continue;
                    }
                    any = true;
                    let gh = observation_gradient(&spec.model, d, x);
                    for (slot, g) in sources[c * nx..(c + 1) * nx].iter_mut().zip(&gh) {
                        *slot += coef * g;
                    }
                }
            }
            if !any {
                return Ok(vec![0.0; spec.control_len()]);
            }
            control_adjoint(spec, u, prior.atom(k), &grid, &paths[k], &sources)
        })
        .collect::<Result<_>>()?;
    for local in parts {
        for (g, v) in grad.iter_mut().zip(local) {
            *g += v;
        }
    }
    Ok(())
}

fn check_prior<M: Model>(spec: &ProblemSpec<M>, prior: &ParticleCloud) -> Result<()> {
    if prior.dim() != spec.param_dim() {
        return Err(OedError::Argument(format!(
            "prior has dimension {}, model has {} parameters",
            prior.dim(),
            spec.param_dim()
        )));
    }
    Ok(())
}

fn inst_eval<M: Model>(
    design: &RelaxedDesign,
    prior: &ParticleCloud,
    spec: &ProblemSpec<M>,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    design.validate(spec)?;
    check_prior(spec, prior)?;
    let paths = particle_trajectories(spec, &design.u, prior)?;
    let h = observation_table(spec, &paths);
    let mu: Vec<f64> = (0..spec.weight_cells)
        .flat_map(|_| prior.masses().iter().copied())
        .collect();
    let problem = CellProblem {
        particles: prior.len(),
        sensors: spec.sensor_count(),
        cell_width: spec.cell_width(),
        h: &h,
        mu: &mu,
        w: &design.w,
    };
    let sums = sum_cells(&spec.noise, &problem, want_grad)?;
    if !want_grad {
        return Ok((sums.value, None));
    }
    let ulen = spec.control_len();
    let mut grad = vec![0.0; ulen + spec.weight_len()];
    grad[ulen..].copy_from_slice(&sums.dw);
    chain_observations(spec, &design.u, prior, &paths, &sums.dh, &mut grad)?;
    Ok((sums.value, Some(grad)))
}

/// Instantaneous surrogate, returned as `−J_inst` (to be minimized).
pub fn inst_objective<M: Model>(
    design: &RelaxedDesign,
    prior: &ParticleCloud,
    spec: &ProblemSpec<M>,
) -> Result<ObjectiveEval> {
    let (value, gradient) = inst_eval(design, prior, spec, true)?;
    Ok(ObjectiveEval {
        value,
        gradient: gradient.expect("gradient requested"),
    })
}

pub fn inst_value<M: Model>(design: &RelaxedDesign, prior: &ParticleCloud, spec: &ProblemSpec<M>) -> Result<f64> {
    Ok(inst_eval(design, prior, spec, false)?.0)
}

fn tilt_eval<M: Model>(
    design: &RelaxedDesign,
    prior: &ParticleCloud,
    spec: &ProblemSpec<M>,
    centers: &[Center],
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    design.validate(spec)?;
    check_prior(spec, prior)?;
    check_centers(prior, centers)?;
    let grid = spec.grid();
    let (n, nj, dim, cells) = (prior.len(), centers.len(), prior.dim(), spec.weight_cells);

    let refs = centers
        .par_iter()
        .map(|c| reference_states(spec, &design.u, &c.theta, &grid, want_grad))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<Vec<f64>>> = refs.iter().map(|r| reference_rows(spec, r)).collect();
    let accs: Vec<FisherAccumulator> = rows.iter().map(|r| accumulate(spec, r, &design.w)).collect();

    let mut mu = Vec::with_capacity(cells * n);
    let mut rho = Vec::with_capacity(cells * n * nj);
    for c in 0..cells {
        let f: Vec<&DMatrix<f64>> = accs.iter().map(|a| a.at_cell_start(c)).collect();
        let (m, r) = tilt_masses(prior, centers, &f);
        mu.extend(m);
        rho.extend(r);
    }

    let paths = particle_trajectories(spec, &design.u, prior)?;
    let h = observation_table(spec, &paths);
    let problem = CellProblem {
        particles: n,
        sensors: spec.sensor_count(),
        cell_width: spec.cell_width(),
        h: &h,
        mu: &mu,
        w: &design.w,
    };
    let sums = sum_cells(&spec.noise, &problem, want_grad)?;
    if !want_grad {
        return Ok((sums.value, None));
    }

    let ulen = spec.control_len();
    let mut grad = vec![0.0; ulen + spec.weight_len()];
    grad[ulen..].copy_from_slice(&sums.dw);
    chain_observations(spec, &design.u, prior, &paths, &sums.dh, &mut grad)?;

    // ∂V/∂F_j(t_c), then reverse accumulation onto the increments
    let deltas: Vec<Vec<f64>> = (0..n)
        .flat_map(|k| {
            centers
                .iter()
                .map(move |c| prior.atom(k).iter().zip(&c.theta).map(|(a, b)| a - b).collect())
        })
        .collect();
    let dt = spec.cell_width();
    let mut lambda = vec![vec![DMatrix::zeros(dim, dim); cells]; nj];
    let mut running = vec![DMatrix::<f64>::zeros(dim, dim); nj];
    for c in (0..cells).rev() {
        for (j, lam) in lambda.iter_mut().enumerate() {
            lam[c] = &running[j] * dt;
        }
        let m = &mu[c * n..(c + 1) * n];
        let g = &sums.dmu[c * n..(c + 1) * n];
        let mean_g: f64 = m.iter().zip(g).map(|(a, b)| a * b).sum();
        for k in 0..n {
            let psi = m[k] * (g[k] - mean_g);
            if psi == 0.0 {
                continue;
            }
            for j in 0..nj {
                let coef = -0.5 * psi * rho[(c * n + k) * nj + j];
                if coef == 0.0 {
                    continue;
                }
                let delta = &deltas[k * nj + j];
                let run = &mut running[j];
                for a in 0..dim {
                    for b in 0..dim {
                        run[(a, b)] += coef * delta[a] * delta[b];
                    }
                }
            }
        }
    }
    for j in 0..nj {
        chain_increments(spec, &refs[j], &rows[j], &design.w, &lambda[j], &mut grad);
    }
    Ok((sums.value, Some(grad)))
}

/// Gaussian-tilting surrogate with one or several centers, returned as
/// `−J_tilt` (to be minimized).
pub fn tilt_objective<M: Model>(
    design: &RelaxedDesign,
    prior: &ParticleCloud,
    spec: &ProblemSpec<M>,
    centers: &[Center],
) -> Result<ObjectiveEval> {
    let (value, gradient) = tilt_eval(design, prior, spec, centers, true)?;
    Ok(ObjectiveEval {
        value,
        gradient: gradient.expect("gradient requested"),
    })
}

pub fn tilt_value<M: Model>(
    design: &RelaxedDesign,
    prior: &ParticleCloud,
    spec: &ProblemSpec<M>,
    centers: &[Center],
) -> Result<f64> {
    Ok(tilt_eval(design, prior, spec, centers, false)?.0)
}
