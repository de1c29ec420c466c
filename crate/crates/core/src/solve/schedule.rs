use super::optimize::{optimize, OptimizeReport, OptimizerOptions};
use super::problem::{Criterion, DesignProblem};
use super::round::{round_design, DiscreteDesign};
use crate::dynamics::Model;
use crate::error::Result;

/// Relaxed optimum, its rounding, and how many re-optimizations it took.
#[derive(Clone, Debug)]
pub struct ScheduleReport {
    pub relaxed: OptimizeReport,
    pub discrete: DiscreteDesign,
    pub refinements: usize,
}

/// Optimizes the relaxed design and rounds it.
///
/// When the weight cells are narrower than the minimum separation, a relaxed
/// optimum may concentrate its budget on neighbouring cells that cannot all
/// be kept. In that case the cells conflicting with the selected times are
/// excluded and the weights are re-optimized from the previous optimum, until
/// the rounding uses the whole budget or no new cell gets excluded.
pub fn optimize_schedule<M: Model>(
    problem: &DesignProblem<M>,
    criterion: Criterion,
    opts: &OptimizerOptions,
) -> Result<ScheduleReport> {
    let spec = &problem.spec;
    let ns = spec.sensor_count();
    let mut relaxed = optimize(problem, criterion, opts)?;
    let mut discrete = round_design(&relaxed.design, spec)?;
    let mut mask = opts
        .excluded_weights
        .clone()
        .unwrap_or_else(|| vec![false; spec.weight_len()]);
    let mut refinements = 0;
    while discrete.activations.len() < spec.budget {
        let mut changed = false;
        for c in 0..spec.weight_cells {
            let t = spec.cell_midpoint(c);
            let conflict = discrete
                .activations
                .iter()
                .any(|a| a.cell != c && (a.time - t).abs() < spec.min_separation - 1e-9);
            if conflict {
                for d in 0..ns {
                    changed |= !mask[c * ns + d];
                    mask[c * ns + d] = true;
                }
            }
        }
        if !changed {
            break;
        }
        let stage = OptimizerOptions {
            restarts: 1,
            fix_controls: false,
            initial: Some(relaxed.design.to_decision()),
            excluded_weights: Some(mask.clone()),
            ..opts.clone()
        };
        relaxed = optimize(problem, criterion, &stage)?;
        discrete = round_design(&relaxed.design, spec)?;
        refinements += 1;
    }
    Ok(ScheduleReport {
        relaxed,
        discrete,
        refinements,
    })
}
