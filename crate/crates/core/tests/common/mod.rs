#![allow(dead_code)]

use oed_core::dynamics::{Model, ProblemSpec};
use oed_core::measure::NoiseSpec;
use oed_core::scalar::Scalar;

/// `ẋ = θ x`, observed directly.
#[derive(Clone, Debug)]
pub struct Growth;

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

/// `ẋ = −x`; the parameter does not enter.
#[derive(Clone, Debug)]
pub struct Decay;

impl Model for Decay {
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
    fn rhs<S: Scalar>(&self, x: &[S], _u: &[S], _theta: &[S], _t: f64, dx: &mut [S]) {
        dx[0] = -x[0];
    }
    fn observe<S: Scalar>(&self, _sensor: usize, x: &[S]) -> S {
        x[0]
    }
}

/// `ẋ = θ`, `x(0) = 0`: the sensitivity is `t`.
#[derive(Clone, Debug)]
pub struct Drift;

impl Model for Drift {
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
    fn rhs<S: Scalar>(&self, _x: &[S], _u: &[S], theta: &[S], _t: f64, dx: &mut [S]) {
        dx[0] = theta[0];
    }
    fn observe<S: Scalar>(&self, _sensor: usize, x: &[S]) -> S {
        x[0]
    }
}

/// Observations affine in θ: `x = (u t, t, θ₁ t, θ₂ t)`, `h₀ = x₃ + x₄ x₁`,
/// `h₁ = x₄ x₂`.
#[derive(Clone, Debug)]
pub struct AffineSensors;

impl Model for AffineSensors {
    fn state_dim(&self) -> usize {
        4
    }
    fn param_dim(&self) -> usize {
        2
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn sensor_count(&self) -> usize {
        2
    }
    fn rhs<S: Scalar>(&self, _x: &[S], u: &[S], theta: &[S], _t: f64, dx: &mut [S]) {
        dx[0] = u[0];
        dx[1] = S::constant(1.0);
        dx[2] = theta[0];
        dx[3] = theta[1];
    }
    fn observe<S: Scalar>(&self, sensor: usize, x: &[S]) -> S {
        match sensor {
            0 => x[2] + x[3] * x[0],
            _ => x[3] * x[1],
        }
    }
}

pub fn scalar_spec<M: Model>(model: M, x0: f64, horizon: f64, cells: usize, steps: usize, sigma: f64) -> ProblemSpec<M> {
    ProblemSpec {
        model,
        x0: vec![x0],
        horizon,
        u_lower: vec![0.0],
        u_upper: vec![1.0],
        control_intervals: 1,
        weight_cells: cells,
        steps_per_cell: steps,
        noise: NoiseSpec::uniform_order(vec![sigma], 5).unwrap(),
        budget: cells,
        min_separation: 0.0,
    }
}

/// `ẋ = (θ − 1)²`, `x(0) = 0`: insensitive to θ at θ = 1 only.
#[derive(Clone, Debug)]
pub struct Flat;

impl Model for Flat {
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
    fn rhs<S: Scalar>(&self, _x: &[S], u: &[S], theta: &[S], _t: f64, dx: &mut [S]) {
        let d = theta[0] - 1.0;
        dx[0] = d * d * (u[0] + 1.0);
    }
    fn observe<S: Scalar>(&self, _sensor: usize, x: &[S]) -> S {
        x[0]
    }
}

/// Largest deviation between `grad` and central differences of `f` (step
/// 1e-6) over the decision coordinates, relative to the largest difference.
pub fn fd_relative_error(f: impl Fn(&[f64]) -> f64, z: &[f64], grad: &[f64]) -> f64 {
    let h = 1e-6;
    let mut fd = vec![0.0; z.len()];
    for i in 0..z.len() {
        let (mut zp, mut zm) = (z.to_vec(), z.to_vec());
        zp[i] += h;
        zm[i] -= h;
        fd[i] = (f(&zp) - f(&zm)) / (2.0 * h);
    }
    let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = fd.iter().zip(grad).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    worst / scale
}

/// Six-cell, one-sensor growth problem with a three-atom prior and a budget
/// that covers every cell.
pub fn bang_bang_toy() -> (ProblemSpec<Growth>, oed_core::measure::ParticleCloud) {
    let mut spec = scalar_spec(Growth, 1.0, 1.2, 6, 6, 0.2);
    spec.budget = 6;
    let prior = oed_core::measure::ParticleCloud::new(1, vec![-0.5, 0.2, 0.9], vec![0.3, 0.4, 0.3]).unwrap();
    (spec, prior)
}
