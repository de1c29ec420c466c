use nalgebra::DMatrix;

use super::design::{ObjectiveEval, RelaxedDesign};
use super::sensing::{sensitivity_rows, sensitivity_rows_tangent};
use crate::dynamics::{reference_states, Model, ProblemSpec, ReferenceStates, TimeGrid};
use crate::error::{OedError, Result};
use crate::measure::NoiseSpec;

/// Ridge added to the information matrix before scalarization.
pub const FISHER_RIDGE: f64 = 1e-6;

/// `Σ_d w_d H_dᵀ σ_d⁻² H_d` with `rows` the row-major `n_exp × n_θ` matrix of
/// the `H_d`.
pub fn fim_increment(rows: &[f64], w: &[f64], noise: &NoiseSpec) -> DMatrix<f64> {
    let ns = w.len();
    let nt = rows.len() / ns.max(1);
    let mut f = DMatrix::zeros(nt, nt);
    for d in 0..ns {
        let c = w[d] / noise.variance(d);
        if c == 0.0 {
            continue;
        }
        let h = &rows[d * nt..(d + 1) * nt];
        for i in 0..nt {
            for j in 0..nt {
                f[(i, j)] += c * h[i] * h[j];
            }
        }
    }
    f
}

/// Accumulated information `F(t) = ∫₀ᵗ Ḟ`, with `Ḟ` constant on each weight
/// cell.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherAccumulator {
    pub cell_width: f64,
    /// `Ḟ` on every cell.
    pub increments: Vec<DMatrix<f64>>,
    /// `F` at the left end of every cell, plus `F(T)` last.
    pub boundaries: Vec<DMatrix<f64>>,
}

impl FisherAccumulator {
    pub fn new(cell_width: f64, increments: Vec<DMatrix<f64>>) -> Self {
        let nt = increments.first().map_or(0, |m| m.nrows());
        let mut boundaries = Vec::with_capacity(increments.len() + 1);
        let mut acc = DMatrix::zeros(nt, nt);
        boundaries.push(acc.clone());
        for inc in &increments {
            acc += inc * cell_width;
            boundaries.push(acc.clone());
        }
        Self {
            cell_width,
            increments,
            boundaries,
        }
    }

    /// `F` at the left end of cell `c`.
    pub fn at_cell_start(&self, c: usize) -> &DMatrix<f64> {
        &self.boundaries[c]
    }

    pub fn terminal(&self) -> &DMatrix<f64> {
        self.boundaries.last().expect("at least F(0)")
    }

    /// `F` at grid node `s`, linear inside each cell.
    pub fn at_node(&self, grid: &TimeGrid, s: usize) -> DMatrix<f64> {
        let cells = self.increments.len();
        let c = (s / grid.steps_per_cell).min(cells.saturating_sub(1));
        let t0 = grid.times[grid.cell_start_node(c)];
        &self.boundaries[c] + &self.increments[c] * (grid.times[s] - t0)
    }
}

/// Scalarization of the information matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FisherCriterion {
    /// `trace((F + εI)⁻¹)`
    A,
    /// `−log det(F + εI)`
    D,
}

/// Information rows at every cell midpoint along the reference trajectory.
pub(crate) fn reference_rows<M: Model>(spec: &ProblemSpec<M>, refs: &ReferenceStates) -> Vec<Vec<f64>> {
    let nt = spec.param_dim();
    (0..spec.weight_cells)
        .map(|c| sensitivity_rows(&spec.model, refs.state(c), refs.sensitivity(c), nt))
        .collect()
}

pub(crate) fn accumulate<M: Model>(spec: &ProblemSpec<M>, rows: &[Vec<f64>], w: &[f64]) -> FisherAccumulator {
    let ns = spec.sensor_count();
    let inc = rows
        .iter()
        .enumerate()
        .map(|(c, r)| fim_increment(r, &w[c * ns..(c + 1) * ns], &spec.noise))
        .collect();
    FisherAccumulator::new(spec.cell_width(), inc)
}

/// Information accumulated along the trajectory at `theta`.
pub fn fisher_accumulator<M: Model>(
    design: &RelaxedDesign,
    theta: &[f64],
    spec: &ProblemSpec<M>,
) -> Result<FisherAccumulator> {
    design.validate(spec)?;
    let refs = reference_states(spec, &design.u, theta, &spec.grid(), false)?;
    Ok(accumulate(spec, &reference_rows(spec, &refs), &design.w))
}

/// Adds the contributions of `∂V/∂Ḟ_c = lambda[c]` to the gradient with
/// respect to the weights and (when tangents are present) the controls.
pub(crate) fn chain_increments<M: Model>(
    spec: &ProblemSpec<M>,
    refs: &ReferenceStates,
    rows: &[Vec<f64>],
    w: &[f64],
    lambda: &[DMatrix<f64>],
    grad: &mut [f64],
) {
    let (nt, ns) = (spec.param_dim(), spec.sensor_count());
    let nu = spec.control_dim();
    let ulen = spec.control_len();
    let mut tangent = vec![0.0; ns * nt];
    let mut dh = vec![0.0; ns * nt];
    for (c, lam) in lambda.iter().enumerate() {
        let r = &rows[c];
        for d in 0..ns {
            let h = &r[d * nt..(d + 1) * nt];
            let inv = 1.0 / spec.noise.variance(d);
            let mut quad = 0.0;
            for i in 0..nt {
                let mut lh = 0.0;
                for j in 0..nt {
                    lh += lam[(i, j)] * h[j];
                }
                quad += h[i] * lh;
                dh[d * nt + i] = 2.0 * w[c * ns + d] * inv * lh;
            }
            grad[ulen + c * ns + d] += quad * inv;
        }
        if refs.directions == 0 {
            continue;
        }
        let interval = spec.control_of_cell(c);
        for i in 0..(interval + 1) * nu {
            sensitivity_rows_tangent(
                &spec.model,
                refs.state(c),
                refs.sensitivity(c),
                refs.state_tangent(c, i),
                refs.sensitivity_tangent(c, i),
                nt,
                &mut tangent,
            );
            let s: f64 = tangent.iter().zip(&dh).map(|(a, b)| a * b).sum();
            grad[i] += s;
        }
    }
}

fn scalarize(f: &DMatrix<f64>, criterion: FisherCriterion) -> Result<(f64, DMatrix<f64>)> {
    let n = f.nrows();
    let m = f + DMatrix::identity(n, n) * FISHER_RIDGE;
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| OedError::Numeric("information matrix is not positive definite".into()))?;
    let inv = chol.inverse();
    Ok(match criterion {
        FisherCriterion::D => {
            let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            (-logdet, -inv)
        }
        FisherCriterion::A => {
            let sens = -(&inv * &inv);
            (inv.trace(), sens)
        }
    })
}

pub(crate) fn fisher_eval<M: Model>(
    design: &RelaxedDesign,
    theta_nom: &[f64],
    spec: &ProblemSpec<M>,
    criterion: FisherCriterion,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    design.validate(spec)?;
    let refs = reference_states(spec, &design.u, theta_nom, &spec.grid(), want_grad)?;
    let rows = reference_rows(spec, &refs);
    let acc = accumulate(spec, &rows, &design.w);
    let (value, dv) = scalarize(acc.terminal(), criterion)?;
    if !value.is_finite() {
        return Err(OedError::Numeric("non-finite Fisher criterion".into()));
    }
    if !want_grad {
        return Ok((value, None));
    }
    let lam = dv * spec.cell_width();
    let lambda = vec![lam; spec.weight_cells];
    let mut grad = vec![0.0; spec.control_len() + spec.weight_len()];
    chain_increments(spec, &refs, &rows, &design.w, &lambda, &mut grad);
    Ok((value, Some(grad)))
}

/// A- or D-optimality of the information accumulated at `theta_nom`.
pub fn fisher_objective<M: Model>(
    design: &RelaxedDesign,
    theta_nom: &[f64],
    spec: &ProblemSpec<M>,
    criterion: FisherCriterion,
) -> Result<ObjectiveEval> {
    let (value, gradient) = fisher_eval(design, theta_nom, spec, criterion, true)?;
    Ok(ObjectiveEval {
        value,
        gradient: gradient.expect("gradient requested"),
    })
}

/// Value of [`fisher_objective`] without the gradient.
pub fn fisher_value<M: Model>(
    design: &RelaxedDesign,
    theta_nom: &[f64],
    spec: &ProblemSpec<M>,
    criterion: FisherCriterion,
) -> Result<f64> {
    Ok(fisher_eval(design, theta_nom, spec, criterion, false)?.0)
}
