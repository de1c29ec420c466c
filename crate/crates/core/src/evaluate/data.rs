use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{integrate, Model, ProblemSpec};
use crate::error::Result;
use crate::rng::stream_rng;
use crate::solve::DiscreteDesign;

/// One noisy reading.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub cell: usize,
    pub time: f64,
    pub sensor: usize,
    pub value: f64,
}

/// Synthetic measurements of a design, in activation order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub theta_true: Vec<f64>,
    pub seed: u64,
    pub records: Vec<Observation>,
}

/// Noise-free outputs `h_d(x(t))` at the design's activations.
pub fn noiseless_outputs<M: Model>(spec: &ProblemSpec<M>, design: &DiscreteDesign, theta: &[f64]) -> Result<Vec<f64>> {
    let grid = spec.grid();
    let traj = integrate(spec, &design.u, theta, &grid)?;
    Ok(design
        .activations
        .iter()
        .map(|a| spec.model.observe(a.sensor, traj.state(grid.midpoint_node(a.cell))))
        .collect())
}

pub(crate) fn simulate_with<M: Model>(
    spec: &ProblemSpec<M>,
    design: &DiscreteDesign,
    theta_true: &[f64],
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    design.validate(spec)?;
    let clean = noiseless_outputs(spec, design, theta_true)?;
    let records = design
        .activations
        .iter()
        .zip(clean)
        .map(|(a, h)| {
            let z: f64 = StandardNormal.sample(rng);
            Observation {
                cell: a.cell,
                time: a.time,
                sensor: a.sensor,
                value: h + spec.noise.sigma[a.sensor] * z,
            }
        })
        .collect();
    Ok(Dataset {
        theta_true: theta_true.to_vec(),
        seed,
        records,
    })
}

/// `y = h_d(x(t; θ_true)) + σ_d z` at every activation, `z` standard normal.
pub fn simulate_data<M: Model>(
    spec: &ProblemSpec<M>,
    design: &DiscreteDesign,
    theta_true: &[f64],
    seed: u64,
) -> Result<Dataset> {
    simulate_with(spec, design, theta_true, seed, &mut stream_rng(seed, 0))
}
