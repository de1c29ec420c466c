//! Self-checks of the library against exact oracles and the benchmark
//! studies, grouped into suites.

use std::time::Instant;

use crate::criteria::{
    cloud_centers, fisher_objective, fisher_value, inst_objective, inst_value, mean_center, tilt_objective, tilt_value,
    tilt_weight_path, Center, FisherCriterion, RelaxedDesign,
};
use crate::dynamics::{benchmark_setup, BenchmarkModel, Model, ProblemSpec};
use crate::error::{OedError, Result};
use crate::evaluate::{median, sign_test, EvalReport};
use crate::measure::{build_prior, NoiseSpec, ParticleCloud};
use crate::oracle::{
    entropy_decomposition, enumerate_mi, lg_eig_closed_form, lg_tilt_exact, lg_tilt_particle, replicator_rk4,
    scalar_lg_benchmark, DiscreteModel, LinearGaussianModel,
};
use crate::pipeline::{design_all, run_study, Study};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::solve::{
    objective_value, optimize, write_discrete_design, Criterion, DesignProblem, OptimizerOptions,
};
use rand::RngExt;

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Oracle,
    Gradients,
    Benchmarks,
}

impl std::str::FromStr for Suite {
    type Err = OedError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Suite::Oracle),
            "gradients" => Ok(Suite::Gradients),
            "benchmarks" => Ok(Suite::Benchmarks),
            _ => Err(OedError::Argument(format!(
                "unknown suite '{s}' (expected oracle, gradients or benchmarks)"
            ))),
        }
    }
}

/// Runs `f`, timing it; an error becomes a failed check.
pub fn run_check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Check {
        name: name.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn lg_exactness() -> Check {
    run_check("linear-Gaussian tilt exactness", || {
        let mut rng = stream_rng(1, 0);
        let mut worst = 0.0f64;
        for i in 0..20 {
            let m = LinearGaussianModel::random(&mut rng, 1 + i % 3, 1 + i % 5, 2);
            let (exact, _) = lg_eig_closed_form(&m)?;
            worst = worst.max((lg_tilt_exact(&m)? - exact).abs());
        }
        Ok((worst <= 1e-10, format!("max |tilt - EIG| = {worst:.3e} over 20 models")))
    })
}

fn random_discrete_models() -> Vec<DiscreteModel> {
    let mut rng = stream_rng(2, 0);
    (0..100)
        .map(|i| DiscreteModel::random(&mut rng, 2 + i % 4, 1 + i % 4, 2 + i % 3))
        .collect()
}

pub fn redundancy_identity() -> Check {
    run_check("redundancy identity", || {
        let mut worst = 0.0f64;
        for m in random_discrete_models() {
            let r = enumerate_mi(&m)?;
            for s in 0..r.increments.len() {
                worst = worst.max((r.instantaneous[s] - r.increments[s] - r.gaps[s]).abs());
            }
            worst = worst.max((r.increments.iter().sum::<f64>() - r.eig).abs());
        }
        Ok((worst <= 1e-12, format!("max identity residual {worst:.3e} over 100 models")))
    })
}

pub fn mi_bounds() -> Check {
    run_check("instantaneous bounds on the EIG", || {
        let mut slack = f64::INFINITY;
        for m in random_discrete_models() {
            let r = enumerate_mi(&m)?;
            let inst = r.instantaneous_total();
            slack = slack.min(inst - r.eig).min(r.eig - inst / r.k_time as f64);
        }
        Ok((slack >= -1e-12, format!("min slack {slack:.3e} over 100 models")))
    })
}

pub fn tilt_convergence() -> Check {
    run_check("particle tilt convergence", || {
        let m = scalar_lg_benchmark();
        let (exact, _) = lg_eig_closed_form(&m)?;
        let errors = [2, 5, 10, 20]
            .iter()
            .map(|&n| Ok((lg_tilt_particle(&m, n, n)? - exact).abs() / exact))
            .collect::<Result<Vec<f64>>>()?;
        let monotone = errors.windows(2).all(|p| p[1] <= p[0]);
        let detail = format!(
            "relative errors at orders 2/5/10/20: {}",
            errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" ")
        );
        Ok((monotone && errors[3] <= 1e-3, detail))
    })
}

pub fn entropy_check() -> Check {
    run_check("entropy decomposition", || {
        let noise = NoiseSpec::uniform_order(vec![0.03, 0.025], 5)?;
        let c = entropy_decomposition(&noise, &[0.3, 0.8], 1_000_000, 0)?;
        let z = (c.monte_carlo - c.closed_form).abs() / c.std_error;
        Ok((
            z <= 3.0,
            format!(
                "Monte Carlo {:.6} vs closed form {:.6} ({z:.2} standard errors)",
                c.monte_carlo, c.closed_form
            ),
        ))
    })
}

fn random_design<M: Model>(spec: &ProblemSpec<M>, seed: u64) -> RelaxedDesign {
    let mut rng = stream_rng(seed, 0);
    RelaxedDesign {
        u: (0..spec.control_len()).map(|_| rng.random_range(0.05..0.95)).collect(),
        w: (0..spec.weight_len()).map(|_| rng.random_range(0.02..0.12)).collect(),
    }
}

/// `max |g − fd| / max |fd|` with central differences of step 1e-6.
fn fd_mismatch(f: impl Fn(&[f64]) -> Result<f64>, z: &[f64], grad: &[f64]) -> Result<f64> {
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    let mut zp = z.to_vec();
    for i in 0..z.len() {
        zp[i] = z[i] + h;
        let p = f(&zp)?;
        zp[i] = z[i] - h;
        let m = f(&zp)?;
        zp[i] = z[i];
        let fd = (p - m) / (2.0 * h);
        scale = scale.max(fd.abs());
        worst = worst.max((fd - grad[i]).abs());
    }
    Ok(worst / scale)
}

/// Gradients of every criterion against finite differences at five random
/// designs per benchmark. The particle clouds are coarse (3 × 3) to keep the
/// difference quotients affordable.
pub fn gradient_exactness() -> Check {
    run_check("gradient exactness", || {
        let mut worst = 0.0f64;
        let mut parts = Vec::new();
        for (name, sc) in [("harmonic", "similar"), ("lotka_volterra", "mixture")] {
            let setup = benchmark_setup(name, sc)?;
            let spec = &setup.spec;
            let prior = build_prior(&setup.prior, &[3, 3])?;
            let single = mean_center(&prior);
            let multi = cloud_centers(&build_prior(&setup.prior, &setup.center_orders)?);
            let theta = prior.mean().to_vec();
            let at = |z: &[f64]| RelaxedDesign::from_decision(spec, z);
            let mut local = 0.0f64;
            for seed in 0..5 {
                let d = random_design(spec, 100 + seed);
                let z = d.to_decision();
                for fc in [FisherCriterion::A, FisherCriterion::D] {
                    let g = fisher_objective(&d, &theta, spec, fc)?.gradient;
                    local = local.max(fd_mismatch(|z| fisher_value(&at(z)?, &theta, spec, fc), &z, &g)?);
                }
                let g = inst_objective(&d, &prior, spec)?.gradient;
                local = local.max(fd_mismatch(|z| inst_value(&at(z)?, &prior, spec), &z, &g)?);
                for centers in [&single, &multi] {
                    let g = tilt_objective(&d, &prior, spec, centers)?.gradient;
                    local = local.max(fd_mismatch(|z| tilt_value(&at(z)?, &prior, spec, centers), &z, &g)?);
                }
            }
            parts.push(format!("{name} {local:.2e}"));
            worst = worst.max(local);
        }
        Ok((worst <= 1e-5, format!("max relative mismatch: {}", parts.join(", "))))
    })
}

pub fn replicator_invariants() -> Check {
    run_check("replicator simplex invariants", || {
        let mut simplex = 0.0f64;
        let mut negative = 0.0f64;
        let mut ode_gap = 0.0f64;
        for (name, sc) in [("harmonic", "similar"), ("lotka_volterra", "mixture")] {
            let setup = benchmark_setup(name, sc)?;
            let spec = &setup.spec;
            let prior = build_prior(&setup.prior, &setup.prior_orders)?;
            let multi = cloud_centers(&build_prior(&setup.prior, &setup.center_orders)?);
            let single = mean_center(&prior);
            for seed in 0..2 {
                let mut d = random_design(spec, 200 + seed);
                d.w.iter_mut().for_each(|w| *w = (*w * 6.0).min(1.0));
                for centers in [&single, &multi] {
                    let path = tilt_weight_path(&d, &prior, spec, centers)?;
                    for s in 0..path.times.len() {
                        let mu = path.at(s);
                        simplex = simplex.max((mu.iter().sum::<f64>() - 1.0).abs());
                        negative = negative.min(mu.iter().cloned().fold(f64::INFINITY, f64::min));
                    }
                    let ode = replicator_rk4(&prior, centers, &path.accumulators, &spec.grid())?;
                    let gap = ode.iter().zip(&path.masses).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    ode_gap = ode_gap.max(gap);
                }
            }
        }
        Ok((
            simplex <= 1e-9 && negative >= -1e-12 && ode_gap <= 1e-6,
            format!("max |sum - 1| {simplex:.2e}, min mass {negative:.2e}, max ODE gap {ode_gap:.2e}"),
        ))
    })
}

/// `ẋ = θ x`, observed directly.
#[derive(Clone, Debug)]
struct Growth;

impl Model for Growth {
    fn state_dim(&self) -> usize {
        1
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn sensor_count(&self) -> usize {
        1
    }
    fn rhs<S: Scalar>(&self, x: &[S], _u: &[S], theta: &[S], _t: f64, dx: &mut [S]) {
        dx[0] = theta[0] * x[0];
    }
    fn observe<S: Scalar>(&self, _sensor: usize, x: &[S]) -> S {
        x[0]
    }
}

/// Six weight cells, one sensor, a budget covering every cell, fixed
/// controls: the instantaneous optimum must sit on the best vertex.
pub fn bang_bang() -> Check {
    run_check("bang-bang toy optimum", || {
        let spec = ProblemSpec {
            model: Growth,
            x0: vec![1.0],
            horizon: 1.2,
            u_lower: vec![0.0],
            u_upper: vec![1.0],
            control_intervals: 1,
            weight_cells: 6,
            steps_per_cell: 6,
            noise: NoiseSpec::uniform_order(vec![0.2], 5)?,
            budget: 6,
            min_separation: 0.0,
        };
        let prior = ParticleCloud::new(1, vec![-0.5, 0.2, 0.9], vec![0.3, 0.4, 0.3])?;
        let centers: Vec<Center> = mean_center(&prior);
        let problem = DesignProblem::new(spec, prior, centers)?;
        let opts = OptimizerOptions {
            fix_controls: true,
            restarts: 1,
            ..OptimizerOptions::default()
        };
        let report = optimize(&problem, Criterion::Inst, &opts)?;
        let n = problem.spec.weight_len();
        let mut best = (f64::INFINITY, 0u32);
        for mask in 0..(1u32 << n) {
            let mut z = report.design.u.clone();
            z.extend((0..n).map(|i| f64::from((mask >> i) & 1)));
            let v = objective_value(&problem, Criterion::Inst, &z)?;
            if v < best.0 {
                best = (v, mask);
            }
        }
        let dist = report
            .design
            .w
            .iter()
            .enumerate()
            .map(|(i, w)| (w - f64::from((best.1 >> i) & 1)).abs())
            .fold(0.0, f64::max);
        Ok((
            dist <= 1e-3,
            format!(
                "distance to vertex {:06b}: {dist:.2e}, projected gradient {:.2e}",
                best.1, report.projected_gradient_norm
            ),
        ))
    })
}

fn header(scenario: &str, seed: u64, runs: usize, opts: &OptimizerOptions) -> Vec<String> {
    vec![
        format!("scenario: {scenario}"),
        format!("seed: {seed}"),
        format!("runs: {runs}"),
        format!("restarts: {}", opts.restarts),
    ]
}

fn report_csv(report: &EvalReport, comments: &[String]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    report.write_csv(&mut out, comments)?;
    Ok(out)
}

/// Designs for the harmonic `uneven` scenario and the bytes of their design
/// files.
pub fn uneven_designs(opts: &OptimizerOptions) -> Result<(bool, String, Vec<u8>)> {
    let setup = benchmark_setup("harmonic", "uneven")?;
    let problem = DesignProblem::<BenchmarkModel>::from_setup(&setup)?;
    let criteria = [Criterion::Inst, Criterion::Tilt, Criterion::MultiTilt];
    let designs = design_all(&problem, &criteria, opts)?;
    let mut bytes = Vec::new();
    let mut counts = Vec::new();
    for (c, s) in &designs {
        let mut head = header("harmonic uneven", opts.seed, 0, opts);
        head.push(format!("criterion: {c}"));
        write_discrete_design(&mut bytes, &s.discrete, setup.spec.control_intervals, &head)?;
        counts.push((*c, s.discrete.count_for_sensor(0), s.discrete.count_for_sensor(1)));
    }
    let budget = setup.spec.budget;
    let inst_ok = counts[0].1 == budget && counts[0].2 == 0;
    let tilt_ok = counts[1..].iter().all(|c| c.2 >= 1);
    let detail = counts
        .iter()
        .map(|(c, a, b)| format!("{c}: {a}+{b}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((inst_ok && tilt_ok, format!("activations on sensors 1+2: {detail}"), bytes))
}

fn medians(study: &Study) -> Vec<(Criterion, f64)> {
    study
        .designs
        .iter()
        .map(|(c, _)| (*c, median(&study.report.errors_of(c.name()))))
        .collect()
}

fn median_summary(meds: &[(Criterion, f64)]) -> String {
    meds.iter().map(|(c, m)| format!("{c} {m:.4}")).collect::<Vec<_>>().join(", ")
}

/// Lotka-Volterra with the bimodal prior: every information-gain design
/// beats both Fisher designs and multi-center tilting beats D-optimality in
/// a paired sign test.
pub fn mixture_study(runs: usize, seed: u64, opts: &OptimizerOptions) -> Result<(bool, String, Vec<u8>)> {
    let study = run_study("lotka_volterra", "mixture", runs, seed, opts)?;
    let meds = medians(&study);
    let get = |c: Criterion| meds.iter().find(|m| m.0 == c).map(|m| m.1).unwrap_or(f64::NAN);
    let fisher_best = get(Criterion::AOpt).min(get(Criterion::DOpt));
    let eig_ok = meds
        .iter()
        .filter(|(c, _)| c.is_eig_surrogate())
        .all(|(_, m)| *m < fisher_best);
    let t = sign_test(
        &study.report.errors_of(Criterion::MultiTilt.name()),
        &study.report.errors_of(Criterion::DOpt.name()),
    );
    let sign_ok = t.p_value < 0.05 && t.wins > t.losses;
    let bytes = report_csv(&study.report, &header("lotka_volterra mixture", seed, runs, opts))?;
    Ok((
        eig_ok && sign_ok,
        format!(
            "medians: {}; multi_tilt vs d_opt {}-{} (p = {:.2e})",
            median_summary(&meds),
            t.wins,
            t.losses,
            t.p_value
        ),
        bytes,
    ))
}

/// Harmonic `similar`: information-gain designs within 10% of the best
/// median, multi-center tilting lowest.
pub fn similar_study(runs: usize, seed: u64, opts: &OptimizerOptions) -> Result<(bool, String, Vec<u8>)> {
    let study = run_study("harmonic", "similar", runs, seed, opts)?;
    let meds = medians(&study);
    let best = meds.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let close = meds
        .iter()
        .filter(|(c, _)| c.is_eig_surrogate())
        .all(|(_, m)| *m <= 1.1 * best);
    let multi = meds
        .iter()
        .find(|m| m.0 == Criterion::MultiTilt)
        .map_or(f64::NAN, |m| m.1);
    let bytes = report_csv(&study.report, &header("harmonic similar", seed, runs, opts))?;
    Ok((close && multi <= best, format!("medians: {}", median_summary(&meds)), bytes))
}

/// Every check of `suite`, in order. `runs` sizes the benchmark Monte Carlo
/// studies.
pub fn run_suite(suite: Suite, runs: usize, seed: u64) -> Vec<Check> {
    match suite {
        Suite::Oracle => vec![
            lg_exactness(),
            redundancy_identity(),
            mi_bounds(),
            tilt_convergence(),
            entropy_check(),
            replicator_invariants(),
        ],
        Suite::Gradients => vec![gradient_exactness()],
        Suite::Benchmarks => {
            let opts = OptimizerOptions {
                seed,
                ..OptimizerOptions::default()
            };
            let mut checks = vec![bang_bang()];
            let mut first = Vec::new();
            let mut push = |name: &str, r: Result<(bool, String, Vec<u8>)>, start: Instant| {
                let (passed, detail, bytes) = r.unwrap_or_else(|e| (false, format!("error: {e}"), Vec::new()));
                first.push(bytes);
                checks.push(Check {
                    name: name.into(),
                    passed,
                    detail,
                    seconds: start.elapsed().as_secs_f64(),
                });
            };
            let t = Instant::now();
            push("harmonic uneven allocation", uneven_designs(&opts), t);
            let t = Instant::now();
            push("Lotka-Volterra mixture separation", mixture_study(runs, seed, &opts), t);
            let t = Instant::now();
            push("harmonic similar sanity", similar_study(runs, seed, &opts), t);
            checks.push(determinism(&first, runs, seed, &opts));
            checks
        }
    }
}

/// Reruns the three benchmark studies and compares their output bytes with
/// `first`.
pub fn determinism(first: &[Vec<u8>], runs: usize, seed: u64, opts: &OptimizerOptions) -> Check {
    run_check("determinism", || {
        let again = [
            uneven_designs(opts)?.2,
            mixture_study(runs, seed, opts)?.2,
            similar_study(runs, seed, opts)?.2,
        ];
        let same: Vec<bool> = first.iter().zip(&again).map(|(a, b)| !a.is_empty() && a == b).collect();
        let ok = same.len() == 3 && same.iter().all(|s| *s);
        Ok((ok, format!("identical outputs (uneven, mixture, similar): {same:?}")))
    })
}
