use rand::RngExt;
use rayon::prelude::*;

use super::problem::{objective_and_gradient, objective_value, Criterion, DesignProblem};
use super::project::project_feasible;
use crate::criteria::RelaxedDesign;
use crate::dynamics::Model;
use crate::error::{OedError, Result};
use crate::rng::stream_rng;

/// Settings of the multi-start projected-gradient method.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerOptions {
    pub max_iters: usize,
    /// Stop when an accepted step changes the objective by less than this
    /// fraction of its magnitude.
    pub rel_tol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Half-width of the uniform control perturbation of restarts after the
    /// first, as a fraction of the control range.
    pub perturbation: f64,
    /// Keep the controls at their starting values and optimize weights only.
    pub fix_controls: bool,
    /// Starting point of the first restart (later restarts perturb its
    /// controls); defaults to box-midpoint controls and uniform weights.
    pub initial: Option<Vec<f64>>,
    /// Weight entries held at zero, indexed like the weight block.
    pub excluded_weights: Option<Vec<bool>>,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            rel_tol: 1e-6,
            armijo_c: 1e-4,
            backtrack: 0.5,
            restarts: 5,
            seed: 0,
            perturbation: 0.25,
            fix_controls: false,
            initial: None,
            excluded_weights: None,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.restarts > 0
            && self.rel_tol > 0.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.perturbation >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(OedError::Config("invalid optimizer options".into()))
        }
    }
}

/// Outcome of one restart.
#[derive(Clone, Debug, PartialEq)]
pub struct RestartTrace {
    pub restart: usize,
    /// Objective after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub projected_gradient_norm: f64,
    pub z: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeReport {
    pub criterion: Criterion,
    pub design: RelaxedDesign,
    pub value: f64,
    pub best_restart: usize,
    /// Max-norm of `P(z − ∇f) − z` at the returned point.
    pub projected_gradient_norm: f64,
    pub traces: Vec<RestartTrace>,
    /// Restarts that failed, with their error messages.
    pub failures: Vec<(usize, String)>,
}

fn starting_point<M: Model>(problem: &DesignProblem<M>, opts: &OptimizerOptions, restart: usize) -> Result<Vec<f64>> {
    let spec = &problem.spec;
    let nu = spec.control_dim();
    let ulen = spec.control_len();
    if opts.excluded_weights.as_ref().is_some_and(|m| m.len() != spec.weight_len()) {
        return Err(OedError::Argument("weight mask has the wrong length".into()));
    }
    let mut z = match &opts.initial {
        Some(z) if z.len() == problem.decision_len() => z.clone(),
        Some(_) => return Err(OedError::Argument("initial decision vector has the wrong length".into())),
        None => {
            let free = match &opts.excluded_weights {
                Some(m) => m.iter().filter(|x| !**x).count(),
                None => spec.weight_len(),
            };
            let w0 = (spec.budget as f64 / free.max(1) as f64).min(1.0);
            (0..ulen)
                .map(|i| 0.5 * (spec.u_lower[i % nu] + spec.u_upper[i % nu]))
                .chain(std::iter::repeat_n(w0, spec.weight_len()))
                .collect()
        }
    };
    if restart > 0 && !opts.fix_controls {
        let mut rng = stream_rng(opts.seed, restart as u64);
        for (i, v) in z[..ulen].iter_mut().enumerate() {
            let range = spec.u_upper[i % nu] - spec.u_lower[i % nu];
            *v += opts.perturbation * range * rng.random_range(-1.0..1.0);
        }
    }
    Ok(project_masked(problem, opts, z))
}

fn project_masked<M: Model>(problem: &DesignProblem<M>, opts: &OptimizerOptions, mut z: Vec<f64>) -> Vec<f64> {
    if let Some(mask) = &opts.excluded_weights {
        let ulen = problem.spec.control_len();
        for (v, off) in z[ulen..].iter_mut().zip(mask) {
            if *off {
                *v = 0.0;
            }
        }
    }
    project_feasible(&z, &problem.spec)
}

fn masked_gradient(mut g: Vec<f64>, ulen: usize, opts: &OptimizerOptions) -> Vec<f64> {
    if opts.fix_controls {
        g[..ulen].iter_mut().for_each(|v| *v = 0.0);
    }
    if let Some(mask) = &opts.excluded_weights {
        for (v, off) in g[ulen..].iter_mut().zip(mask) {
            if *off {
                *v = 0.0;
            }
        }
    }
    g
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn step<M: Model>(problem: &DesignProblem<M>, opts: &OptimizerOptions, z: &[f64], g: &[f64], alpha: f64) -> Vec<f64> {
    let trial: Vec<f64> = z.iter().zip(g).map(|(a, b)| a - alpha * b).collect();
    project_masked(problem, opts, trial)
}

fn projected_gradient_norm<M: Model>(problem: &DesignProblem<M>, opts: &OptimizerOptions, z: &[f64], g: &[f64]) -> f64 {
    step(problem, opts, z, g, 1.0)
        .iter()
        .zip(z)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn run_restart<M: Model>(
    problem: &DesignProblem<M>,
    criterion: Criterion,
    opts: &OptimizerOptions,
    restart: usize,
) -> Result<RestartTrace> {
    let ulen = problem.spec.control_len();
    let mut z = starting_point(problem, opts, restart)?;
    let first = objective_and_gradient(problem, criterion, &z)?;
    let mut f = first.value;
    let mut g = masked_gradient(first.gradient, ulen, opts);
    let mut history = vec![f];
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut alpha = if gmax > 0.0 { 0.1 / gmax } else { 1.0 };
    let mut iterations = 0;
    while iterations < opts.max_iters {
        // first trial with gradient, backtracking with values only
        let mut trial = step(problem, opts, &z, &g, alpha);
        let mut d: Vec<f64> = trial.iter().zip(&z).map(|(a, b)| a - b).collect();
        if d.iter().all(|v| *v == 0.0) {
            break;
        }
        let eval = objective_and_gradient(problem, criterion, &trial)?;
        let mut accepted = None;
        if eval.value <= f + opts.armijo_c * dot(&g, &d) {
            accepted = Some((eval.value, Some(eval.gradient)));
        } else {
            for _ in 0..60 {
                alpha *= opts.backtrack;
                trial = step(problem, opts, &z, &g, alpha);
                d = trial.iter().zip(&z).map(|(a, b)| a - b).collect();
                if d.iter().all(|v| *v == 0.0) {
                    break;
                }
                let v = objective_value(problem, criterion, &trial)?;
                if v <= f + opts.armijo_c * dot(&g, &d) {
                    accepted = Some((v, None));
                    break;
                }
            }
        }
        let Some((f_new, grad)) = accepted else {
            break;
        };
        let g_new = match grad {
            Some(gr) => gr,
            None => objective_and_gradient(problem, criterion, &trial)?.gradient,
        };
        let g_new = masked_gradient(g_new, ulen, opts);
        iterations += 1;
        let s: Vec<f64> = trial.iter().zip(&z).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        alpha = if sy > 0.0 { dot(&s, &s) / sy } else { alpha * 2.0 };
        alpha = alpha.clamp(1e-12, 1e12);
        let change = (f - f_new).abs();
        let scale = f.abs().max(f_new.abs());
        z = trial;
        f = f_new;
        g = g_new;
        history.push(f);
        if change <= opts.rel_tol * scale {
            break;
        }
    }
    Ok(RestartTrace {
        restart,
        projected_gradient_norm: projected_gradient_norm(problem, opts, &z, &g),
        history,
        iterations,
        z,
    })
}

/// Multi-start projected gradient with Armijo backtracking and
/// Barzilai–Borwein trial steps. Restarts run in parallel; the best final
/// iterate wins, ties going to the lower restart index.
pub fn optimize<M: Model>(
    problem: &DesignProblem<M>,
    criterion: Criterion,
    opts: &OptimizerOptions,
) -> Result<OptimizeReport> {
    opts.validate()?;
    problem.spec.validate()?;
    let results: Vec<Result<RestartTrace>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| run_restart(problem, criterion, opts, r))
        .collect();
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(t) if t.history.last().is_some_and(|v| v.is_finite()) => traces.push(t),
            Ok(_) => failures.push((r, "non-finite objective".to_string())),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    let best = traces
        .iter()
        .min_by(|a, b| {
            let (va, vb) = (a.history.last().unwrap(), b.history.last().unwrap());
            va.total_cmp(vb).then(a.restart.cmp(&b.restart))
        })
        .cloned()
        .ok_or_else(|| {
            let detail: Vec<String> = failures.iter().map(|(r, e)| format!("restart {r}: {e}")).collect();
            OptimizationFailureDetail(detail.join("; ")).into_error()
        })?;
    Ok(OptimizeReport {
        criterion,
        design: RelaxedDesign::from_decision(&problem.spec, &best.z)?,
        value: *best.history.last().unwrap(),
        best_restart: best.restart,
        projected_gradient_norm: best.projected_gradient_norm,
        traces,
        failures,
    })
}

struct OptimizationFailureDetail(String);

impl OptimizationFailureDetail {
    fn into_error(self) -> OedError {
        OedError::OptimizationFailure(format!("all restarts failed: {}", self.0))
    }
}
