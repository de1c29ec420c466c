//! End-to-end workflow of a benchmark study: optimize every criterion,
//! round, and compare the resulting schedules by Monte Carlo estimation.

use crate::dynamics::{benchmark_setup, BenchmarkModel, BenchmarkSetup};
use crate::error::{OedError, Result};
use crate::evaluate::{mc_evaluate, EvalReport};
use crate::solve::{optimize_schedule, Criterion, DesignProblem, OptimizerOptions, ScheduleReport};

/// Benchmark scenario behind each figure of the study.
pub fn figure_scenario(figure: u32) -> Result<(&'static str, &'static str)> {
    match figure {
        1 => Ok(("harmonic", "similar")),
        2 => Ok(("harmonic", "uneven")),
        3 => Ok(("lotka_volterra", "lognormal")),
        4 => Ok(("lotka_volterra", "mixture")),
        _ => Err(OedError::Argument(format!("unknown figure {figure} (expected 1-4)"))),
    }
}

/// Designs of every requested criterion for one problem.
pub fn design_all(
    problem: &DesignProblem<BenchmarkModel>,
    criteria: &[Criterion],
    opts: &OptimizerOptions,
) -> Result<Vec<(Criterion, ScheduleReport)>> {
    criteria
        .iter()
        .map(|&c| Ok((c, optimize_schedule(problem, c, opts)?)))
        .collect()
}

/// Outcome of [`run_study`].
#[derive(Clone, Debug)]
pub struct Study {
    pub setup: BenchmarkSetup,
    pub designs: Vec<(Criterion, ScheduleReport)>,
    pub report: EvalReport,
}

/// Designs all five criteria for a benchmark scenario and evaluates them with
/// `runs` paired Monte Carlo runs.
pub fn run_study(benchmark: &str, scenario: &str, runs: usize, seed: u64, opts: &OptimizerOptions) -> Result<Study> {
    let setup = benchmark_setup(benchmark, scenario)?;
    let problem = DesignProblem::<BenchmarkModel>::from_setup(&setup)?;
    let designs = design_all(&problem, &Criterion::ALL, opts)?;
    let named: Vec<_> = designs
        .iter()
        .map(|(c, s)| (c.name().to_string(), s.discrete.clone()))
        .collect();
    let report = mc_evaluate(&problem.spec, &named, &setup.prior, &problem.prior, runs, seed)?;
    Ok(Study {
        setup,
        designs,
        report,
    })
}
