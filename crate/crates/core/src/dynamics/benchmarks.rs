//! The two controlled benchmark systems and their experimental setups.

use nalgebra::DMatrix;

use super::model::{jacobian_fd_mismatch, Model};
use super::spec::{ProblemSpec, DEFAULT_STEPS_PER_CELL};
use crate::error::{OedError, Result};
use crate::measure::{LogNormalComponent, NoiseSpec, PriorSpec};
use crate::scalar::Scalar;

/// Two damped oscillators sharing one control input; state
/// `(q₁, q₂, q̇₁, q̇₂)`, parameters are the two stiffnesses.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicOscillator {
    pub damping: [f64; 2],
}

impl Default for HarmonicOscillator {
    fn default() -> Self {
        Self { damping: [0.4, 0.8] }
    }
}

impl Model for HarmonicOscillator {
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

    fn rhs<S: Scalar>(&self, x: &[S], u: &[S], theta: &[S], _t: f64, dx: &mut [S]) {
        dx[0] = x[2];
        dx[1] = x[3];
        dx[2] = u[0] - x[2] * self.damping[0] - theta[0] * x[0];
        dx[3] = u[0] - x[3] * self.damping[1] - theta[1] * x[1];
    }

    fn observe<S: Scalar>(&self, sensor: usize, x: &[S]) -> S {
        x[sensor]
    }
}

/// Predator–prey system with a control that harvests both species.
#[derive(Clone, Debug, PartialEq)]
pub struct LotkaVolterra {
    pub control_gain: [f64; 2],
}

impl Default for LotkaVolterra {
    fn default() -> Self {
        Self {
            control_gain: [0.4, 0.2],
        }
    }
}

impl Model for LotkaVolterra {
    fn state_dim(&self) -> usize {
        2
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

    fn rhs<S: Scalar>(&self, x: &[S], u: &[S], theta: &[S], _t: f64, dx: &mut [S]) {
        let inter = x[0] * x[1];
        dx[0] = x[0] - theta[0] * inter - u[0] * x[0] * self.control_gain[0];
        dx[1] = -x[1] + theta[1] * inter - u[0] * x[1] * self.control_gain[1];
    }

    fn observe<S: Scalar>(&self, sensor: usize, x: &[S]) -> S {
        x[sensor]
    }
}

/// Either benchmark, so that file-driven setups have one concrete model type.
#[derive(Clone, Debug, PartialEq)]
pub enum BenchmarkModel {
    Harmonic(HarmonicOscillator),
    LotkaVolterra(LotkaVolterra),
}

impl BenchmarkModel {
    pub fn name(&self) -> &'static str {
        match self {
            BenchmarkModel::Harmonic(_) => "harmonic",
            BenchmarkModel::LotkaVolterra(_) => "lotka_volterra",
        }
    }
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            BenchmarkModel::Harmonic($m) => $e,
            BenchmarkModel::LotkaVolterra($m) => $e,
        }
    };
}

impl Model for BenchmarkModel {
    fn state_dim(&self) -> usize {
        dispatch!(self, m => m.state_dim())
    }
    fn param_dim(&self) -> usize {
        dispatch!(self, m => m.param_dim())
    }
    fn control_dim(&self) -> usize {
        dispatch!(self, m => m.control_dim())
    }
    fn sensor_count(&self) -> usize {
        dispatch!(self, m => m.sensor_count())
    }
    fn rhs<S: Scalar>(&self, x: &[S], u: &[S], theta: &[S], t: f64, dx: &mut [S]) {
        dispatch!(self, m => m.rhs(x, u, theta, t, dx))
    }
    fn observe<S: Scalar>(&self, sensor: usize, x: &[S]) -> S {
        dispatch!(self, m => m.observe(sensor, x))
    }
}

/// Experimental setup of one benchmark scenario: the problem, its prior and
/// the quadrature orders used for particles and for tilting centers.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSetup {
    pub spec: ProblemSpec<BenchmarkModel>,
    pub prior: PriorSpec,
    pub prior_orders: Vec<usize>,
    pub center_orders: Vec<usize>,
}

fn harmonic_spec(sigma: [f64; 2]) -> Result<ProblemSpec<BenchmarkModel>> {
    Ok(ProblemSpec {
        model: BenchmarkModel::Harmonic(HarmonicOscillator::default()),
        x0: vec![1.0, 1.0, 0.0, 0.0],
        horizon: 10.0,
        u_lower: vec![0.0],
        u_upper: vec![1.0],
        control_intervals: 12,
        weight_cells: 120,
        steps_per_cell: DEFAULT_STEPS_PER_CELL,
        noise: NoiseSpec::uniform_order(sigma.to_vec(), 5)?,
        budget: 8,
        min_separation: 0.1,
    })
}

fn lotka_volterra_spec() -> Result<ProblemSpec<BenchmarkModel>> {
    let sd = 0.2f64.sqrt();
    Ok(ProblemSpec {
        model: BenchmarkModel::LotkaVolterra(LotkaVolterra::default()),
        x0: vec![0.5, 0.7],
        horizon: 12.0,
        u_lower: vec![0.0],
        u_upper: vec![1.0],
        control_intervals: 12,
        weight_cells: 96,
        steps_per_cell: DEFAULT_STEPS_PER_CELL,
        noise: NoiseSpec::uniform_order(vec![sd, sd], 6)?,
        budget: 10,
        min_separation: 0.25,
    })
}

fn normalize_name(s: &str) -> String {
    s.trim().to_ascii_lowercase().replace(['-', ' '], "_")
}

/// Verifies the AD Jacobians against finite differences at a few points.
pub fn verify_jacobians<M: Model>(spec: &ProblemSpec<M>, theta: &[f64]) -> Result<()> {
    let u: Vec<f64> = spec
        .u_lower
        .iter()
        .zip(&spec.u_upper)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let mut x = spec.x0.clone();
    for (i, v) in x.iter_mut().enumerate() {
        *v += 0.1 * (i as f64 + 1.0);
    }
    let worst = jacobian_fd_mismatch(&spec.model, &x, &u, theta, 0.3 * spec.horizon);
    if worst > 1e-5 {
        return Err(OedError::Config(format!(
            "model Jacobians disagree with finite differences (relative error {worst:e})"
        )));
    }
    Ok(())
}

/// Problem specification of a named benchmark scenario.
pub fn benchmark_model(name: &str, scenario: &str) -> Result<ProblemSpec<BenchmarkModel>> {
    Ok(benchmark_setup(name, scenario)?.spec)
}

pub fn benchmark_setup(name: &str, scenario: &str) -> Result<BenchmarkSetup> {
    let (name, scenario) = (normalize_name(name), normalize_name(scenario));
    let setup = match (name.as_str(), scenario.as_str()) {
        ("harmonic", "similar") | ("harmonic", "uneven") => {
            let sigma = if scenario == "similar" {
                [0.03, 0.025]
            } else {
                [0.03, 0.03]
            };
            BenchmarkSetup {
                spec: harmonic_spec(sigma)?,
                prior: PriorSpec::UniformBox {
                    lower: vec![5.0, 5.0],
                    upper: vec![10.0, 10.0],
                },
                prior_orders: vec![8, 8],
                center_orders: vec![2, 2],
            }
        }
        ("lotka_volterra", "lognormal") => BenchmarkSetup {
            spec: lotka_volterra_spec()?,
            prior: PriorSpec::LogNormal {
                mean: vec![2f64.ln(); 2],
                cov: DMatrix::identity(2, 2) * 0.2,
            },
            prior_orders: vec![6, 6],
            center_orders: vec![2, 2],
        },
        ("lotka_volterra", "mixture") | ("lotka_volterra", "lognormal_mixture") => BenchmarkSetup {
            spec: lotka_volterra_spec()?,
            prior: PriorSpec::LogNormalMixture {
                components: vec![
                    LogNormalComponent {
                        weight: 0.5,
                        mean: vec![2f64.ln(); 2],
                        cov: DMatrix::identity(2, 2) * 0.2,
                    },
                    LogNormalComponent {
                        weight: 0.5,
                        mean: vec![10f64.ln(); 2],
                        cov: DMatrix::identity(2, 2) * 0.05,
                    },
                ],
            },
            prior_orders: vec![4, 4],
            center_orders: vec![2, 2],
        },
        ("harmonic", _) | ("lotka_volterra", _) => {
            return Err(OedError::Config(format!(
                "unknown scenario '{scenario}' for benchmark '{name}'"
            )))
        }
        _ => return Err(OedError::Config(format!("unknown benchmark '{name}'"))),
    };
    setup.spec.validate()?;
    let probe = match &setup.spec.model {
        BenchmarkModel::Harmonic(_) => vec![7.5, 7.5],
        BenchmarkModel::LotkaVolterra(_) => vec![2.0, 2.0],
    };
    verify_jacobians(&setup.spec, &probe)?;
    Ok(setup)
}

/// Names of all bundled scenarios as `(benchmark, scenario)`.
pub const SCENARIOS: [(&str, &str); 4] = [
    ("harmonic", "similar"),
    ("harmonic", "uneven"),
    ("lotka_volterra", "lognormal"),
    ("lotka_volterra", "mixture"),
];
