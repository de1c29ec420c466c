use rand::{Rng, RngExt};

use crate::error::{OedError, Result};

/// Largest joint support `|Θ| · Π_i |Y_i|` that [`enumerate_mi`] accepts.
pub const MAX_SUPPORT: u128 = 10_000_000;

/// Finite parameter set with conditionally independent stage observations.
/// `tables[i][t][y] = p(y_i = y | θ = t)`; a stage with a one-letter
/// alphabet carries no measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteModel {
    pub prior: Vec<f64>,
    pub tables: Vec<Vec<Vec<f64>>>,
}

impl DiscreteModel {
    pub fn new(prior: Vec<f64>, tables: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let m = Self { prior, tables };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let normalized = |row: &[f64]| {
            row.iter().all(|p| *p >= 0.0 && p.is_finite()) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-12
        };
        if self.prior.is_empty() || !normalized(&self.prior) {
            return Err(OedError::Argument("prior masses must be a probability vector".into()));
        }
        for (i, table) in self.tables.iter().enumerate() {
            let width = table.first().map_or(0, Vec::len);
            if table.len() != self.prior.len() || width == 0 {
                return Err(OedError::Argument(format!("stage {i} table has the wrong shape")));
            }
            if table.iter().any(|row| row.len() != width || !normalized(row)) {
                return Err(OedError::Argument(format!("stage {i} table rows are not normalized")));
            }
        }
        Ok(())
    }

    pub fn alphabet(&self, i: usize) -> usize {
        self.tables[i][0].len()
    }

    /// Number of stages that carry a measurement.
    pub fn k_time(&self) -> usize {
        (0..self.tables.len()).filter(|&i| self.alphabet(i) > 1).count()
    }

    /// `|Θ| · Π_i |Y_i|`, saturating.
    pub fn support_size(&self) -> u128 {
        (0..self.tables.len()).fold(self.prior.len() as u128, |acc, i| acc.saturating_mul(self.alphabet(i) as u128))
    }

    /// Random model with strictly positive, normalized tables.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, params: usize, stages: usize, alphabet: usize) -> Self {
        let simplex = |rng: &mut R, n: usize| {
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0f64).powi(2)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect::<Vec<f64>>()
        };
        let prior = simplex(rng, params);
        let tables = (0..stages)
            .map(|_| (0..params).map(|_| simplex(rng, alphabet)).collect())
            .collect();
        Self { prior, tables }
    }
}

/// Exact information quantities of a [`DiscreteModel`], in nats.
#[derive(Clone, Debug, PartialEq)]
pub struct MiReport {
    /// `I(θ; y_{1:M})`.
    pub eig: f64,
    /// `I(θ; y_i | y_{1:i−1})`.
    pub increments: Vec<f64>,
    /// `I(θ; y_i)`.
    pub instantaneous: Vec<f64>,
    /// `I(y_i; y_{1:i−1})`.
    pub gaps: Vec<f64>,
    pub k_time: usize,
}

impl MiReport {
    pub fn instantaneous_total(&self) -> f64 {
        self.instantaneous.iter().sum()
    }
}

fn xlogy(p: f64, ratio: f64) -> f64 {
    if p > 0.0 {
        p * ratio.ln()
    } else {
        0.0
    }
}

/// Exhaustive enumeration of all `(θ, y_{1:M})`. Each quantity is computed
/// from its own defining sum rather than from the others.
pub fn enumerate_mi(model: &DiscreteModel) -> Result<MiReport> {
    model.validate()?;
    let size = model.support_size();
    if size > MAX_SUPPORT {
        return Err(OedError::Capacity {
            entries: size,
            limit: MAX_SUPPORT,
        });
    }
    let nt = model.prior.len();
    let stages = model.tables.len();
    // joint[t * prefixes + idx] = p(θ = t, y_{1:i} = idx), idx mixed radix with y_i fastest
    let mut joint: Vec<f64> = model.prior.clone();
    let mut prefixes = 1usize;
    let mut increments = Vec::with_capacity(stages);
    let mut instantaneous = Vec::with_capacity(stages);
    let mut gaps = Vec::with_capacity(stages);
    for i in 0..stages {
        let a = model.alphabet(i);
        let table = &model.tables[i];
        let next_len = prefixes * a;
        let mut next = vec![0.0; nt * next_len];
        for t in 0..nt {
            for idx in 0..prefixes {
                let p = joint[t * prefixes + idx];
                for y in 0..a {
                    next[t * next_len + idx * a + y] = p * table[t][y];
                }
            }
        }
        let marg = |arr: &[f64], len: usize| -> Vec<f64> {
            (0..len).map(|idx| (0..nt).map(|t| arr[t * len + idx]).sum()).collect()
        };
        let p_prev = marg(&joint, prefixes);
        let p_cur = marg(&next, next_len);
        let p_yi: Vec<f64> = (0..a)
            .map(|y| (0..nt).map(|t| model.prior[t] * table[t][y]).sum())
            .collect();

        let mut inst = 0.0;
        for t in 0..nt {
            for y in 0..a {
                let p = model.prior[t] * table[t][y];
                if p > 0.0 {
                    inst += xlogy(p, table[t][y] / p_yi[y]);
                }
            }
        }
        instantaneous.push(inst);

        // I(θ; y_i | y_<i) = Σ p(θ, y_{1:i}) log [p(θ, y_{1:i}) p(y_<i) / (p(θ, y_<i) p(y_{1:i}))]
        let mut cond = 0.0;
        for t in 0..nt {
            for idx in 0..prefixes {
                for y in 0..a {
                    let j = idx * a + y;
                    let p = next[t * next_len + j];
                    if p > 0.0 {
                        cond += xlogy(p, p * p_prev[idx] / (joint[t * prefixes + idx] * p_cur[j]));
                    }
                }
            }
        }
        increments.push(cond);

        // I(y_i; y_<i) = Σ p(y_{1:i}) log [p(y_{1:i}) / (p(y_i) p(y_<i))]
        let mut gap = 0.0;
        for idx in 0..prefixes {
            for y in 0..a {
                let p = p_cur[idx * a + y];
                if p > 0.0 {
                    gap += xlogy(p, p / (p_yi[y] * p_prev[idx]));
                }
            }
        }
        gaps.push(gap);

        joint = next;
        prefixes = next_len;
    }
    // I(θ; y_{1:M}) = Σ p(θ, y) log [p(y | θ) / p(y)]
    let p_y: Vec<f64> = (0..prefixes)
        .map(|idx| (0..nt).map(|t| joint[t * prefixes + idx]).sum())
        .collect();
    let mut eig = 0.0;
    for t in 0..nt {
        for idx in 0..prefixes {
            let p = joint[t * prefixes + idx];
            if p > 0.0 {
                eig += xlogy(p, p / (model.prior[t] * p_y[idx]));
            }
        }
    }
    Ok(MiReport {
        eig,
        increments,
        instantaneous,
        gaps,
        k_time: model.k_time(),
    })
}
