mod common;

use common::{fd_relative_error, scalar_spec, Decay, Drift, Flat};
use nalgebra::{DMatrix, DVector};
use oed_core::criteria::*;
use oed_core::dynamics::{benchmark_setup, integrate, BenchmarkSetup, Model, ProblemSpec};
use oed_core::measure::{build_prior, NoiseSpec, ParticleCloud};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_design<M: Model>(spec: &ProblemSpec<M>, seed: u64) -> RelaxedDesign {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RelaxedDesign {
        u: (0..spec.control_len()).map(|_| rng.random_range(0.05..0.95)).collect(),
        w: (0..spec.weight_len()).map(|_| rng.random_range(0.02..0.12)).collect(),
    }
}

fn small_prior(setup: &BenchmarkSetup) -> ParticleCloud {
    build_prior(&setup.prior, &[3, 3]).unwrap()
}

#[test]
fn fim_increment_examples() {
    let noise = NoiseSpec::uniform_order(vec![0.2, 0.2], 3).unwrap();
    let f = fim_increment(&[1.0, 0.0, 0.0, 1.0], &[1.0, 1.0], &noise);
    assert!((f - DMatrix::identity(2, 2) * 25.0).norm() < 1e-12);
    let f = fim_increment(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0], &noise);
    assert_eq!(f, DMatrix::zeros(2, 2));
}

#[test]
fn fim_increment_matches_matrix_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let sigma: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..2.0)).collect();
        let noise = NoiseSpec::uniform_order(sigma.clone(), 3).unwrap();
        let h = DMatrix::from_fn(3, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        let rows: Vec<f64> = (0..3).flat_map(|d| h.row(d).iter().copied().collect::<Vec<_>>()).collect();
        let f = fim_increment(&rows, &w, &noise);
        let scale = DMatrix::from_diagonal(&DVector::from_iterator(3, (0..3).map(|d| w[d] / (sigma[d] * sigma[d]))));
        let oracle = h.transpose() * scale * &h;
        assert!((&f - &oracle).norm() <= 1e-12 * oracle.norm().max(1.0));
        assert!(f.clone().symmetric_eigenvalues().iter().all(|l| *l >= -1e-12));
    }
}

#[test]
fn fisher_criteria_without_measurements_reduce_to_the_ridge() {
    let setup = benchmark_setup("harmonic", "similar").unwrap();
    let d = RelaxedDesign::constant(&setup.spec, 0.5, 0.0);
    let theta = [7.5, 7.5];
    let a = fisher_value(&d, &theta, &setup.spec, FisherCriterion::A).unwrap();
    let dd = fisher_value(&d, &theta, &setup.spec, FisherCriterion::D).unwrap();
    assert!((a - 2.0 / FISHER_RIDGE).abs() < 1e-6);
    assert!((dd + 2.0 * FISHER_RIDGE.ln()).abs() < 1e-10);
}

#[test]
fn drift_information_integrates_t_squared() {
    let spec = scalar_spec(Drift, 0.0, 1.0, 10, 10, 1.0);
    let d = RelaxedDesign::constant(&spec, 0.5, 1.0);
    let f = fisher_accumulator(&d, &[0.3], &spec).unwrap();
    assert!((f.terminal()[(0, 0)] - 1.0 / 3.0).abs() < 2e-3);
}

#[test]
fn accumulated_information_is_monotone() {
    let setup = benchmark_setup("lotka_volterra", "lognormal").unwrap();
    let d = random_design(&setup.spec, 5);
    let f = fisher_accumulator(&d, &[2.0, 2.0], &setup.spec).unwrap();
    let grid = setup.spec.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let v = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut prev = 0.0f64;
        for s in 0..=grid.steps() {
            let q = (v.transpose() * f.at_node(&grid, s) * &v)[(0, 0)];
            assert!(q >= prev - 1e-12 * prev.abs().max(1.0));
            prev = q;
        }
    }
}

#[test]
fn empty_design_carries_no_information() {
    let setup = benchmark_setup("harmonic", "similar").unwrap();
    let prior = small_prior(&setup);
    let d = RelaxedDesign::constant(&setup.spec, 0.4, 0.0);
    let e = inst_objective(&d, &prior, &setup.spec).unwrap();
    assert_eq!(e.value, 0.0);
    assert!(e.gradient[..setup.spec.control_len()].iter().all(|g| *g == 0.0));
    let centers = mean_center(&prior);
    assert_eq!(tilt_value(&d, &prior, &setup.spec, &centers).unwrap(), 0.0);
}

#[test]
fn dirac_prior_is_uninformative() {
    for (name, sc, theta) in [("harmonic", "similar", [7.0, 8.0]), ("lotka_volterra", "mixture", [2.0, 3.0])] {
        let setup = benchmark_setup(name, sc).unwrap();
        let prior = ParticleCloud::dirac(&theta).unwrap();
        for seed in 0..3 {
            let d = random_design(&setup.spec, seed);
            assert!(inst_value(&d, &prior, &setup.spec).unwrap().abs() < 1e-10);
            let centers = mean_center(&prior);
            assert!(tilt_value(&d, &prior, &setup.spec, &centers).unwrap().abs() < 1e-10);
        }
    }
}

#[test]
fn insensitive_center_makes_tilt_equal_inst() {
    let spec = scalar_spec(Flat, 0.0, 2.0, 8, 4, 0.3);
    let prior = ParticleCloud::new(1, vec![0.0, 0.5, 2.0, 3.0], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let centers = [Center {
        theta: vec![1.0],
        mass: 1.0,
    }];
    let d = random_design(&spec, 2);
    let path = tilt_weight_path(&d, &prior, &spec, &centers).unwrap();
    for s in 0..path.times.len() {
        for (a, b) in path.at(s).iter().zip(prior.masses()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
    let inst = inst_value(&d, &prior, &spec).unwrap();
    let tilt = tilt_value(&d, &prior, &spec, &centers).unwrap();
    assert!(inst < 0.0);
    assert!((inst - tilt).abs() <= 1e-12 * inst.abs());
}

#[test]
fn symmetric_atoms_keep_equal_masses() {
    let setup = benchmark_setup("lotka_volterra", "lognormal").unwrap();
    let prior = ParticleCloud::new(2, vec![1.5, 2.0, 2.5, 2.0], vec![0.5, 0.5]).unwrap();
    let centers = [Center {
        theta: vec![2.0, 2.0],
        mass: 1.0,
    }];
    let d = random_design(&setup.spec, 4);
    let path = tilt_weight_path(&d, &prior, &setup.spec, &centers).unwrap();
    for s in 0..path.times.len() {
        let mu = path.at(s);
        assert!((mu[0] - 0.5).abs() < 1e-15 && (mu[1] - 0.5).abs() < 1e-15);
    }
}

#[test]
fn two_atom_replicator_closed_form() {
    let prior = ParticleCloud::new(1, vec![0.0, 2f64.sqrt()], vec![0.5, 0.5]).unwrap();
    let centers = [Center {
        theta: vec![0.0],
        mass: 1.0,
    }];
    let t = 3f64.ln();
    let f = DMatrix::from_element(1, 1, t);
    let (mu, _) = tilt_masses(&prior, &centers, &[&f]);
    assert!((mu[0] - 0.75).abs() < 1e-9);
    assert!((mu[0] - 1.0 / (1.0 + (-t).exp())).abs() < 1e-12);
}

#[test]
fn tilt_paths_stay_on_the_simplex() {
    for (name, sc) in [("harmonic", "similar"), ("lotka_volterra", "mixture")] {
        let setup = benchmark_setup(name, sc).unwrap();
        let prior = build_prior(&setup.prior, &setup.prior_orders).unwrap();
        let centers = cloud_centers(&build_prior(&setup.prior, &setup.center_orders).unwrap());
        let mut d = random_design(&setup.spec, 11);
        d.w.iter_mut().for_each(|w| *w *= 8.0);
        let path = tilt_weight_path(&d, &prior, &setup.spec, &centers).unwrap();
        for s in 0..path.times.len() {
            let mu = path.at(s);
            assert!((mu.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            assert!(mu.iter().all(|m| *m >= -1e-12));
        }
    }
}

#[test]
fn inst_is_affine_in_each_weight() {
    let setup = benchmark_setup("harmonic", "uneven").unwrap();
    let prior = small_prior(&setup);
    let d = random_design(&setup.spec, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let i = rng.random_range(0..d.w.len());
        let at = |v: f64| {
            let mut e = d.clone();
            e.w[i] = v;
            inst_value(&e, &prior, &setup.spec).unwrap()
        };
        let (a, b, c) = (at(0.1), at(0.5), at(0.9));
        assert!((a - 2.0 * b + c).abs() <= 1e-8 * (1.0 + b.abs()), "coordinate {i}");
    }
}

#[test]
fn gradients_match_finite_differences() {
    for (name, sc) in [("harmonic", "similar"), ("lotka_volterra", "mixture")] {
        let setup = benchmark_setup(name, sc).unwrap();
        let spec = &setup.spec;
        let prior = small_prior(&setup);
        let centers = cloud_centers(&build_prior(&setup.prior, &setup.center_orders).unwrap());
        let theta = prior.mean().to_vec();
        let d = random_design(spec, 7);
        let z = d.to_decision();
        let at = |z: &[f64]| RelaxedDesign::from_decision(spec, z).unwrap();
        for fc in [FisherCriterion::A, FisherCriterion::D] {
            let e = fisher_objective(&d, &theta, spec, fc).unwrap();
            let err = fd_relative_error(|z| fisher_value(&at(z), &theta, spec, fc).unwrap(), &z, &e.gradient);
            assert!(err < 1e-5, "{name} {fc:?}: {err:e}");
        }
        let e = inst_objective(&d, &prior, spec).unwrap();
        let err = fd_relative_error(|z| inst_value(&at(z), &prior, spec).unwrap(), &z, &e.gradient);
        assert!(err < 1e-5, "{name} inst: {err:e}");
        let e = tilt_objective(&d, &prior, spec, &centers).unwrap();
        let err = fd_relative_error(|z| tilt_value(&at(z), &prior, spec, &centers).unwrap(), &z, &e.gradient);
        assert!(err < 1e-5, "{name} tilt: {err:e}");
    }
}

#[test]
fn inst_matches_monte_carlo() {
    let setup = benchmark_setup("harmonic", "similar").unwrap();
    let spec = &setup.spec;
    let prior = build_prior(&setup.prior, &setup.prior_orders).unwrap();
    let d = RelaxedDesign::constant(spec, 0.5, 0.4);
    let value = inst_value(&d, &prior, spec).unwrap();

    let grid = spec.grid();
    let (n, ns, cells) = (prior.len(), spec.sensor_count(), spec.weight_cells);
    // h[c][k][d] at the cell midpoints.
    let mut h = vec![0.0; cells * n * ns];
    for k in 0..n {
        let traj = integrate(spec, &d.u, prior.atom(k), &grid).unwrap();
        for c in 0..cells {
            let x = traj.state(grid.midpoint_node(c));
            for s in 0..ns {
                h[(c * n + k) * ns + s] = spec.model.observe(s, x);
            }
        }
    }
    let sigma = spec.noise.sigma.clone();
    let masses = prior.masses();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let samples = 100_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    let mut logp = vec![0.0; n];
    for _ in 0..samples {
        let c = rng.random_range(0..cells);
        let active: Vec<usize> = (0..ns).filter(|&s| rng.random_bool(d.w[c * ns + s])).collect();
        let mut x = 0.0;
        if !active.is_empty() {
            let u: f64 = rng.random();
            let mut k = 0;
            let mut acc = masses[0];
            while acc < u && k + 1 < n {
                k += 1;
                acc += masses[k];
            }
            let y: Vec<f64> = active
                .iter()
                .map(|&s| h[(c * n + k) * ns + s] + sigma[s] * rng.sample::<f64, _>(StandardNormal))
                .collect();
            for j in 0..n {
                logp[j] = active
                    .iter()
                    .zip(&y)
                    .map(|(&s, yv)| {
                        let r = (yv - h[(c * n + j) * ns + s]) / sigma[s];
                        -0.5 * r * r
                    })
                    .sum::<f64>();
            }
            let m = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + (0..n).map(|j| masses[j] * (logp[j] - m).exp()).sum::<f64>().ln();
            x = logp[k] - lse;
        }
        // Uniform cell draw: scale by the number of cells and the cell width.
        let est = -(cells as f64) * spec.cell_width() * x;
        sum += est;
        sum2 += est * est;
    }
    let mean = sum / samples as f64;
    let se = ((sum2 / samples as f64 - mean * mean) / samples as f64).sqrt();
    assert!((value - mean).abs() <= 3.0 * se, "quadrature {value}, Monte Carlo {mean} ± {se}");
}

#[test]
fn parameter_insensitive_observations_give_zero_information() {
    let spec = scalar_spec(Decay, 1.0, 1.0, 10, 10, 0.1);
    let prior = ParticleCloud::new(1, vec![0.0, 1.0, 2.0], vec![0.2, 0.3, 0.5]).unwrap();
    let d = random_design(&spec, 0);
    assert!(inst_value(&d, &prior, &spec).unwrap().abs() < 1e-12);
}
