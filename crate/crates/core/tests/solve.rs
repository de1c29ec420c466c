mod common;

use common::{bang_bang_toy, scalar_spec, Decay};
use oed_core::criteria::{mean_center, RelaxedDesign};
use oed_core::dynamics::{benchmark_setup, BenchmarkModel, Model, ProblemSpec};
use oed_core::measure::ParticleCloud;
use oed_core::solve::*;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn one_sensor_spec(cells: usize, horizon: f64, budget: usize, sep: f64) -> ProblemSpec<Decay> {
    let mut spec = scalar_spec(Decay, 1.0, horizon, cells, 2, 1.0);
    spec.budget = budget;
    spec.min_separation = sep;
    spec
}

fn relaxed(spec: &ProblemSpec<Decay>, w: Vec<f64>) -> RelaxedDesign {
    RelaxedDesign {
        u: vec![0.5; spec.control_len()],
        w,
    }
}

fn times(d: &DiscreteDesign) -> Vec<f64> {
    d.activations.iter().map(|a| a.time).collect()
}

#[test]
fn projection_examples() {
    let setup = benchmark_setup("harmonic", "similar").unwrap();
    let spec = &setup.spec;
    let mut z = vec![-3.0; spec.control_len()];
    z.extend(vec![0.01; spec.weight_len()]);
    let p = project_feasible(&z, spec);
    assert!(p[..spec.control_len()].iter().all(|u| *u == 0.0));
    assert_eq!(&p[spec.control_len()..], &z[spec.control_len()..]);
    for v in project_weights(&[1.0; 20], 8.0) {
        assert!((v - 0.4).abs() < 1e-12);
    }
}

/// Variational inequality of the Euclidean projection onto a convex set:
/// `(w − p)·(q − p) ≤ 0` for every feasible `q`.
#[test]
fn projection_satisfies_the_variational_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let n = rng.random_range(1..40);
        let budget = rng.random_range(0.5..n as f64);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
        let p = project_weights(&w, budget);
        assert!(p.iter().all(|v| (-1e-10..=1.0 + 1e-10).contains(v)));
        assert!(p.iter().sum::<f64>() <= budget + 1e-10);
        for _ in 0..50 {
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            let scale = if s > budget { budget / s } else { 1.0 };
            let q: Vec<f64> = raw.iter().map(|v| v * scale).collect();
            let ip: f64 = (0..n).map(|i| (w[i] - p[i]) * (q[i] - p[i])).sum();
            assert!(ip <= 1e-10, "{ip}");
        }
        let again = project_weights(&p, budget);
        assert!(p.iter().zip(&again).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

#[test]
fn uniform_weights_round_to_earliest_separated_times() {
    let spec = one_sensor_spec(10, 1.0, 2, 0.5);
    let d = round_design(&relaxed(&spec, vec![1.0; 10]), &spec).unwrap();
    let t = times(&d);
    assert_eq!(t.len(), 2);
    assert!((t[0] - 0.05).abs() < 1e-12 && (t[1] - 0.55).abs() < 1e-12);
}

#[test]
fn zero_weights_round_to_nothing() {
    let spec = one_sensor_spec(10, 1.0, 2, 0.5);
    let d = round_design(&relaxed(&spec, vec![0.0; 10]), &spec).unwrap();
    assert!(d.activations.is_empty());
}

#[test]
fn two_bumps_match_exhaustive_search() {
    let spec = one_sensor_spec(100, 10.0, 2, 1.0);
    let w: Vec<f64> = (0..100)
        .map(|c| {
            let t = spec.cell_midpoint(c);
            0.1 + 0.8 * (-((t - 2.05) / 0.3).powi(2)).exp() + 0.7 * (-((t - 7.05) / 0.3).powi(2)).exp()
        })
        .collect();
    let d = round_design(&relaxed(&spec, w.clone()), &spec).unwrap();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for a in 0..100 {
        for b in a + 1..100 {
            if spec.cell_midpoint(b) - spec.cell_midpoint(a) >= spec.min_separation - 1e-9 && w[a] + w[b] > best.0 {
                best = (w[a] + w[b], a, b);
            }
        }
    }
    let cells: Vec<usize> = d.activations.iter().map(|a| a.cell).collect();
    assert_eq!(cells, vec![best.1, best.2]);
    assert!((d.activations[0].time - 2.05).abs() < 1e-9 && (d.activations[1].time - 7.05).abs() < 1e-9);
}

#[test]
fn co_located_sensors_share_a_time() {
    let setup = benchmark_setup("harmonic", "similar").unwrap();
    let spec = &setup.spec;
    let mut w = vec![0.0; spec.weight_len()];
    w[2 * 10] = 0.9;
    w[2 * 10 + 1] = 0.8;
    w[2 * 11] = 0.7;
    let d = round_design(&RelaxedDesign { u: vec![0.5; 12], w }, spec).unwrap();
    assert_eq!(d.activations.len(), 2);
    assert_eq!(d.activations[0].cell, d.activations[1].cell);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rounding_is_always_feasible(
        w in prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], 30),
        budget in 1usize..8,
        sep in 0.0..0.5f64,
    ) {
        let spec = one_sensor_spec(30, 3.0, budget, sep);
        let d = round_design(&relaxed(&spec, w.clone()), &spec).unwrap();
        prop_assert!(d.validate(&spec).is_ok());
        prop_assert!(d.activations.len() <= budget);
        for a in &d.activations {
            prop_assert!(w[a.cell] > 0.0);
        }
    }
}

#[test]
fn design_files_round_trip() {
    let setup = benchmark_setup("lotka_volterra", "mixture").unwrap();
    let spec = &setup.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rel = RelaxedDesign {
        u: (0..spec.control_len()).map(|_| rng.random::<f64>()).collect(),
        w: (0..spec.weight_len()).map(|_| rng.random::<f64>() * 0.2).collect(),
    };
    let mut buf = Vec::new();
    write_relaxed_design(&mut buf, &rel, spec, &["relaxed".into()]).unwrap();
    let back = read_relaxed_design(std::str::from_utf8(&buf).unwrap(), spec).unwrap();
    assert_eq!(back, rel);

    let disc = round_design(&rel, spec).unwrap();
    let mut buf = Vec::new();
    write_discrete_design(&mut buf, &disc, spec.control_intervals, &["seed: 3".into()]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("# seed: 3\n"));
    assert_eq!(read_discrete_design(&text, spec).unwrap(), disc);

    let bad = text.replace("activations", "activation");
    assert!(read_discrete_design(&bad, spec).is_err());
}

fn toy_problem() -> DesignProblem<common::Growth> {
    let (spec, prior) = bang_bang_toy();
    let centers = mean_center(&prior);
    DesignProblem::new(spec, prior, centers).unwrap()
}

fn toy_options() -> OptimizerOptions {
    OptimizerOptions {
        fix_controls: true,
        restarts: 1,
        ..OptimizerOptions::default()
    }
}

#[test]
fn bang_bang_toy_reaches_the_best_vertex() {
    let problem = toy_problem();
    let report = optimize(&problem, Criterion::Inst, &toy_options()).unwrap();
    let n = problem.spec.weight_len();
    let u = report.design.u.clone();
    let mut best = (f64::INFINITY, 0u32);
    for mask in 0..(1u32 << n) {
        let mut z = u.clone();
        z.extend((0..n).map(|i| f64::from((mask >> i) & 1)));
        let v = objective_value(&problem, Criterion::Inst, &z).unwrap();
        if v < best.0 {
            best = (v, mask);
        }
    }
    for (i, w) in report.design.w.iter().enumerate() {
        let vertex = f64::from((best.1 >> i) & 1);
        assert!((w - vertex).abs() <= 1e-3, "cell {i}: {w} vs {vertex}");
    }
    assert!(report.projected_gradient_norm <= 1e-4);
}

#[test]
fn binding_budget_selects_the_most_informative_cells() {
    let mut problem = toy_problem();
    problem.spec.budget = 3;
    let report = optimize(&problem, Criterion::Inst, &toy_options()).unwrap();
    let u = report.design.u.clone();
    let mut best = (f64::INFINITY, 0u32);
    for mask in (0..64u32).filter(|m| m.count_ones() == 3) {
        let mut z = u.clone();
        z.extend((0..6).map(|i| f64::from((mask >> i) & 1)));
        let v = objective_value(&problem, Criterion::Inst, &z).unwrap();
        if v < best.0 {
            best = (v, mask);
        }
    }
    for (i, w) in report.design.w.iter().enumerate() {
        assert!((w - f64::from((best.1 >> i) & 1)).abs() <= 1e-3);
    }
}

fn harmonic_problem() -> DesignProblem<BenchmarkModel> {
    let mut setup = benchmark_setup("harmonic", "uneven").unwrap();
    setup.prior_orders = vec![3, 3];
    DesignProblem::<BenchmarkModel>::from_setup(&setup).unwrap()
}

#[test]
fn accepted_steps_never_increase_the_objective() {
    let problem = harmonic_problem();
    let opts = OptimizerOptions {
        restarts: 2,
        max_iters: 40,
        ..OptimizerOptions::default()
    };
    for c in [Criterion::DOpt, Criterion::Inst, Criterion::Tilt] {
        let report = optimize(&problem, c, &opts).unwrap();
        for trace in &report.traces {
            assert!(trace.history.windows(2).all(|p| p[1] <= p[0]), "{c}");
        }
        let best = report.traces.iter().map(|t| *t.history.last().unwrap()).fold(f64::INFINITY, f64::min);
        assert_eq!(report.value, best);
        assert!(report.design.validate(&problem.spec).is_ok());
        assert!(report.design.budget_used() <= problem.spec.budget as f64 + 1e-9);
    }
}

#[test]
fn optimization_is_deterministic() {
    let problem = harmonic_problem();
    let opts = OptimizerOptions {
        restarts: 3,
        max_iters: 30,
        seed: 5,
        ..OptimizerOptions::default()
    };
    let a = optimize(&problem, Criterion::Inst, &opts).unwrap();
    let b = optimize(&problem, Criterion::Inst, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn schedules_use_the_whole_budget() {
    let problem = harmonic_problem();
    let opts = OptimizerOptions {
        restarts: 1,
        max_iters: 60,
        ..OptimizerOptions::default()
    };
    let s = optimize_schedule(&problem, Criterion::Inst, &opts).unwrap();
    s.discrete.validate(&problem.spec).unwrap();
    assert_eq!(s.discrete.activations.len(), problem.spec.budget);
}

#[test]
fn fisher_objective_of_an_empty_design_is_the_ridge() {
    let problem = harmonic_problem();
    let mut z = vec![0.5; problem.spec.control_len()];
    z.extend(vec![0.0; problem.spec.weight_len()]);
    let v = objective_value(&problem, Criterion::AOpt, &z).unwrap();
    assert!((v - 2.0 / oed_core::criteria::FISHER_RIDGE).abs() < 1e-6);
}

#[test]
fn dirac_prior_tilt_is_zero_with_cancelling_weight_gradients() {
    let setup = benchmark_setup("harmonic", "similar").unwrap();
    let prior = ParticleCloud::dirac(&[7.0, 8.0]).unwrap();
    let problem = DesignProblem::new(setup.spec.clone(), prior.clone(), mean_center(&prior)).unwrap();
    let mut z = vec![0.3; problem.spec.control_len()];
    z.extend(vec![0.02; problem.spec.weight_len()]);
    let e = objective_and_gradient(&problem, Criterion::Tilt, &z).unwrap();
    assert!(e.value.abs() < 1e-10);
    assert!(e.gradient.iter().all(|g| g.abs() < 1e-9));
}

#[test]
fn invalid_options_and_inputs_are_rejected() {
    let problem = toy_problem();
    let opts = OptimizerOptions {
        restarts: 0,
        ..OptimizerOptions::default()
    };
    assert!(optimize(&problem, Criterion::Inst, &opts).is_err());
    assert!(objective_value(&problem, Criterion::Inst, &[f64::NAN; 7]).is_err());
    assert!(objective_value(&problem, Criterion::Inst, &[0.5; 3]).is_err());
    assert!("bogus".parse::<Criterion>().is_err());
    assert_eq!("multi-tilt".parse::<Criterion>().unwrap(), Criterion::MultiTilt);
    let _ = problem.spec.model.param_dim();
}
