mod common;

use common::{scalar_spec, Decay, Growth};
use oed_core::dynamics::*;
use oed_core::OedError;

fn terminal<M: Model>(spec: &ProblemSpec<M>, theta: &[f64]) -> Vec<f64> {
    let traj = integrate(spec, &[0.5], theta, &spec.grid()).unwrap();
    traj.state(traj.len() - 1).to_vec()
}

#[test]
fn exponential_decay() {
    let spec = scalar_spec(Decay, 1.0, 1.0, 10, 10, 1.0);
    let x = terminal(&spec, &[0.0])[0];
    assert!((x - (-1f64).exp()).abs() < 1e-6, "{x}");
}

#[test]
fn rk4_is_fourth_order() {
    let exact = (-1f64).exp();
    let err = |steps| (terminal(&scalar_spec(Decay, 1.0, 1.0, 1, steps, 1.0), &[0.0])[0] - exact).abs();
    let ratio = err(10) / err(20);
    assert!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn linear_sensitivity_is_analytic() {
    let spec = scalar_spec(Growth, 1.0, 1.0, 10, 10, 1.0);
    let (traj, sens) = integrate_with_sensitivity(&spec, &[0.5], &[0.5], &spec.grid()).unwrap();
    let last = traj.len() - 1;
    assert!((sens.get(last, 0, 0) - 0.5f64.exp()).abs() < 1e-5);
    assert!((traj.state(last)[0] - 0.5f64.exp()).abs() < 1e-6);
}

#[test]
fn parameter_free_dynamics_have_zero_sensitivity() {
    let spec = scalar_spec(Decay, 1.0, 1.0, 10, 10, 1.0);
    let (_, sens) = integrate_with_sensitivity(&spec, &[0.5], &[3.0], &spec.grid()).unwrap();
    assert!(sens.values.iter().all(|v| *v == 0.0));
}

#[test]
fn lotka_volterra_first_integral() {
    let mut spec = benchmark_model("lotka_volterra", "lognormal").unwrap();
    // Step 0.005 over [0, 12].
    spec.weight_cells = 240;
    spec.steps_per_cell = 10;
    let u = vec![0.0; spec.control_len()];
    let traj = integrate(&spec, &u, &[1.0, 1.0], &spec.grid()).unwrap();
    let invariant = |x: &[f64]| x[0] - x[0].ln() + x[1] - x[1].ln();
    let v0 = invariant(traj.state(0));
    for s in 0..traj.len() {
        assert!((invariant(traj.state(s)) - v0).abs() < 1e-5, "node {s}");
    }
}

#[test]
fn harmonic_energy_decays_without_control() {
    let spec = benchmark_model("harmonic", "similar").unwrap();
    let u = vec![0.0; spec.control_len()];
    let theta = [7.0, 8.0];
    let traj = integrate(&spec, &u, &theta, &spec.grid()).unwrap();
    let energy = |x: &[f64]| 0.5 * (x[2] * x[2] + theta[0] * x[0] * x[0]);
    for s in 1..traj.len() {
        assert!(energy(traj.state(s)) <= energy(traj.state(s - 1)) + 1e-12, "node {s}");
    }
}

fn fd_sensitivity_error(name: &str, scenario: &str, theta: &[f64], u_value: f64) -> f64 {
    let spec = benchmark_model(name, scenario).unwrap();
    let grid = spec.grid();
    let u = vec![u_value; spec.control_len()];
    let (traj, sens) = integrate_with_sensitivity(&spec, &u, theta, &grid).unwrap();
    let last = traj.len() - 1;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for j in 0..theta.len() {
        let (mut tp, mut tm) = (theta.to_vec(), theta.to_vec());
        tp[j] += h;
        tm[j] -= h;
        let xp = integrate(&spec, &u, &tp, &grid).unwrap();
        let xm = integrate(&spec, &u, &tm, &grid).unwrap();
        for s in [last / 3, last / 2, last] {
            for i in 0..spec.state_dim() {
                let fd = (xp.state(s)[i] - xm.state(s)[i]) / (2.0 * h);
                let g = sens.get(s, i, j);
                worst = worst.max((fd - g).abs() / fd.abs().max(1e-3));
            }
        }
    }
    worst
}

#[test]
fn sensitivities_match_finite_differences() {
    assert!(fd_sensitivity_error("lotka_volterra", "lognormal", &[2.0, 2.0], 0.5) < 1e-4);
    assert!(fd_sensitivity_error("harmonic", "similar", &[6.0, 9.0], 0.7) < 1e-4);
}

#[test]
fn benchmark_parameters() {
    let uneven = benchmark_model("harmonic", "uneven").unwrap();
    assert_eq!(uneven.noise.sigma, vec![0.03, 0.03]);
    assert_eq!(uneven.budget, 8);
    let similar = benchmark_model("harmonic", "similar").unwrap();
    assert_eq!(similar.noise.sigma, vec![0.03, 0.025]);
    let lv = benchmark_model("lotka_volterra", "lognormal").unwrap();
    assert_eq!(lv.horizon, 12.0);
    for d in 0..2 {
        assert!((lv.noise.variance(d) - 0.2).abs() < 1e-14);
    }
    assert!(benchmark_model("harmonic", "nope").is_err());
}

#[test]
fn benchmark_jacobians_pass_self_check() {
    for (name, sc, theta) in [("harmonic", "similar", [7.5, 7.5]), ("lotka_volterra", "mixture", [2.0, 10.0])] {
        let spec = benchmark_model(name, sc).unwrap();
        verify_jacobians(&spec, &theta).unwrap();
    }
}

#[test]
fn degenerate_specs_are_rejected() {
    let mut spec = scalar_spec(Decay, 1.0, 1.0, 10, 10, 1.0);
    spec.horizon = 0.0;
    assert!(matches!(spec.validate(), Err(OedError::Config(_))));
    let mut spec = scalar_spec(Decay, 1.0, 1.0, 10, 10, 1.0);
    spec.budget = 0;
    assert!(spec.validate().is_err());
    let mut spec = scalar_spec(Decay, 1.0, 1.0, 10, 10, 1.0);
    spec.min_separation = -1.0;
    assert!(spec.validate().is_err());
}

#[test]
fn repeated_integration_is_bit_identical() {
    let spec = benchmark_model("lotka_volterra", "mixture").unwrap();
    let u = vec![0.3; spec.control_len()];
    let a = integrate_with_sensitivity(&spec, &u, &[2.0, 3.0], &spec.grid()).unwrap();
    let b = integrate_with_sensitivity(&spec, &u, &[2.0, 3.0], &spec.grid()).unwrap();
    assert_eq!(a, b);
}
