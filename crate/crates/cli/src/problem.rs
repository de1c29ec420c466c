//! Problem files: bracketed sections of `key = value` lines.
//!
//! ```text
//! [model]
//! name = harmonic            # or lotka_volterra
//! x0 = 1 1 0 0
//! horizon = 10
//! steps_per_cell = 10
//! damping = 0.4 0.8          # harmonic only; lotka_volterra takes control_gain
//! [control]
//! lower = 0
//! upper = 1
//! intervals = 12
//! [sensors]
//! weight_cells = 120
//! sigma_1 = 0.03
//! order_1 = 5
//! ...
//! [prior]
//! kind = uniform_box         # lower, upper
//! orders = 8 8
//! center_orders = 2 2
//! [budget]
//! activations = 8
//! min_separation = 0.1
//! ```
//!
//! A `lognormal` prior takes `mean` and `cov`; a `lognormal_mixture` takes
//! `components = m` and `weight_i`, `mean_i`, `cov_i` for `i = 1..m`. Matrix
//! rows are separated by `;`. Every key is required and unknown keys are
//! rejected.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use oed_core::dynamics::{verify_jacobians, BenchmarkModel, BenchmarkSetup, HarmonicOscillator, LotkaVolterra, ProblemSpec};
use oed_core::measure::{LogNormalComponent, NoiseSpec, PriorSpec};
use oed_core::{OedError, Result};

/// Problem files shipped with the binary, by name.
pub const BUNDLED: [(&str, &str); 4] = [
    ("harmonic_similar", include_str!("../problems/harmonic_similar.spec")),
    ("harmonic_uneven", include_str!("../problems/harmonic_uneven.spec")),
    ("lotka_volterra_lognormal", include_str!("../problems/lotka_volterra_lognormal.spec")),
    ("lotka_volterra_mixture", include_str!("../problems/lotka_volterra_mixture.spec")),
];

const SECTIONS: [&str; 5] = ["model", "control", "sensors", "prior", "budget"];

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Document {
    entries: BTreeMap<(String, String), Entry>,
}

fn err(line: usize, msg: impl std::fmt::Display) -> OedError {
    OedError::Parse(format!("line {line}: {msg}"))
}

impl Document {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, "malformed section header"))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(err(line, format!("unknown section [{name}]")));
                }
                if entries.keys().any(|(s, _): &(String, String)| s == name) {
                    return Err(err(line, format!("section [{name}] appears twice")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected 'key = value', found '{content}'")))?;
            let key = key.trim();
            let sec = section
                .clone()
                .ok_or_else(|| err(line, format!("key '{key}' appears before any section")))?;
            let slot = (sec.clone(), key.to_string());
            if entries.contains_key(&slot) {
                return Err(err(line, format!("duplicate key '{key}' in [{sec}]")));
            }
            entries.insert(
                slot,
                Entry {
                    value: value.trim().to_string(),
                    line,
                    used: false,
                },
            );
        }
        Ok(Self { entries })
    }

    fn raw(&mut self, section: &str, key: &str) -> Result<(String, usize)> {
        let e = self
            .entries
            .get_mut(&(section.to_string(), key.to_string()))
            .ok_or_else(|| OedError::Parse(format!("missing key '{key}' in [{section}]")))?;
        e.used = true;
        Ok((e.value.clone(), e.line))
    }

    fn reals(&mut self, section: &str, key: &str) -> Result<Vec<f64>> {
        let (v, line) = self.raw(section, key)?;
        let vals = v
            .split_whitespace()
            .map(|t| t.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| err(line, format!("{key} must be a list of finite numbers")))?;
        if vals.is_empty() {
            return Err(err(line, format!("{key} is empty")));
        }
        Ok(vals)
    }

    fn real(&mut self, section: &str, key: &str) -> Result<(f64, usize)> {
        let line = self.raw(section, key)?.1;
        match self.reals(section, key)?.as_slice() {
            [v] => Ok((*v, line)),
            _ => Err(err(line, format!("{key} must be a single number"))),
        }
    }

    fn positive(&mut self, section: &str, key: &str) -> Result<f64> {
        let (v, line) = self.real(section, key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(err(line, format!("{key} must be positive")))
        }
    }

    fn count(&mut self, section: &str, key: &str) -> Result<usize> {
        let (v, line) = self.raw(section, key)?;
        v.parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| err(line, format!("{key} must be a positive integer")))
    }

    fn counts(&mut self, section: &str, key: &str) -> Result<Vec<usize>> {
        let (v, line) = self.raw(section, key)?;
        v.split_whitespace()
            .map(|t| t.parse::<usize>().ok().filter(|n| *n > 0))
            .collect::<Option<Vec<usize>>>()
            .filter(|c| !c.is_empty())
            .ok_or_else(|| err(line, format!("{key} must be a list of positive integers")))
    }

    fn pair(&mut self, section: &str, key: &str) -> Result<[f64; 2]> {
        let line = self.raw(section, key)?.1;
        match self.reals(section, key)?.as_slice() {
            [a, b] => Ok([*a, *b]),
            _ => Err(err(line, format!("{key} must hold two numbers"))),
        }
    }

    fn matrix(&mut self, section: &str, key: &str, dim: usize) -> Result<DMatrix<f64>> {
        let (v, line) = self.raw(section, key)?;
        let rows: Vec<Vec<f64>> = v
            .split(';')
            .map(|r| r.split_whitespace().map(|t| t.parse::<f64>().ok().filter(|x| x.is_finite())).collect())
            .collect::<Option<_>>()
            .ok_or_else(|| err(line, format!("{key} must be a matrix of finite numbers")))?;
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(err(line, format!("{key} must be a {dim} x {dim} matrix with rows separated by ';'")));
        }
        Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
    }

    fn finish(self) -> Result<()> {
        match self.entries.iter().find(|(_, e)| !e.used) {
            Some(((sec, key), e)) => Err(err(e.line, format!("unknown key '{key}' in [{sec}]"))),
            None => Ok(()),
        }
    }
}

fn prior_spec(doc: &mut Document, dim: usize) -> Result<PriorSpec> {
    let (kind, line) = doc.raw("prior", "kind")?;
    let check_dim = |v: &[f64], key: &str| {
        if v.len() == dim {
            Ok(())
        } else {
            Err(OedError::Parse(format!("{key} must hold {dim} values")))
        }
    };
    let prior = match kind.as_str() {
        "uniform_box" => {
            let lower = doc.reals("prior", "lower")?;
            let upper = doc.reals("prior", "upper")?;
            check_dim(&lower, "lower")?;
            check_dim(&upper, "upper")?;
            PriorSpec::UniformBox { lower, upper }
        }
        "lognormal" => {
            let mean = doc.reals("prior", "mean")?;
            check_dim(&mean, "mean")?;
            let cov = doc.matrix("prior", "cov", dim)?;
            PriorSpec::LogNormal { mean, cov }
        }
        "lognormal_mixture" => {
            let m = doc.count("prior", "components")?;
            let mut components = Vec::with_capacity(m);
            for i in 1..=m {
                let weight = doc.positive("prior", &format!("weight_{i}"))?;
                let mean = doc.reals("prior", &format!("mean_{i}"))?;
                check_dim(&mean, &format!("mean_{i}"))?;
                let cov = doc.matrix("prior", &format!("cov_{i}"), dim)?;
                components.push(LogNormalComponent { weight, mean, cov });
            }
            PriorSpec::LogNormalMixture { components }
        }
        other => {
            return Err(err(
                line,
                format!("unknown prior kind '{other}' (expected uniform_box, lognormal or lognormal_mixture)"),
            ))
        }
    };
    prior.validate()?;
    Ok(prior)
}

/// Parses the text of a problem file.
pub fn parse_problem_str(text: &str) -> Result<BenchmarkSetup> {
    let mut doc = Document::parse(text)?;
    let (name, line) = doc.raw("model", "name")?;
    let model = match name.as_str() {
        "harmonic" => BenchmarkModel::Harmonic(HarmonicOscillator {
            damping: doc.pair("model", "damping")?,
        }),
        "lotka_volterra" => BenchmarkModel::LotkaVolterra(LotkaVolterra {
            control_gain: doc.pair("model", "control_gain")?,
        }),
        other => return Err(err(line, format!("unknown model '{other}' (expected harmonic or lotka_volterra)"))),
    };
    let x0 = doc.reals("model", "x0")?;
    let horizon = doc.positive("model", "horizon")?;
    let steps_per_cell = doc.count("model", "steps_per_cell")?;

    let u_lower = doc.reals("control", "lower")?;
    let u_upper = doc.reals("control", "upper")?;
    let control_intervals = doc.count("control", "intervals")?;

    let weight_cells = doc.count("sensors", "weight_cells")?;
    let sensors = match &model {
        BenchmarkModel::Harmonic(_) | BenchmarkModel::LotkaVolterra(_) => 2,
    };
    let mut sigma = Vec::with_capacity(sensors);
    let mut orders = Vec::with_capacity(sensors);
    for d in 1..=sensors {
        sigma.push(doc.positive("sensors", &format!("sigma_{d}"))?);
        orders.push(doc.count("sensors", &format!("order_{d}"))?);
    }

    let prior = prior_spec(&mut doc, 2)?;
    let prior_orders = doc.counts("prior", "orders")?;
    let center_orders = doc.counts("prior", "center_orders")?;

    let budget = doc.count("budget", "activations")?;
    let (min_separation, sep_line) = doc.real("budget", "min_separation")?;
    if min_separation < 0.0 {
        return Err(err(sep_line, "min_separation must be non-negative"));
    }
    doc.finish()?;

    let spec = ProblemSpec {
        model,
        x0,
        horizon,
        u_lower,
        u_upper,
        control_intervals,
        weight_cells,
        steps_per_cell,
        noise: NoiseSpec::new(sigma, orders)?,
        budget,
        min_separation,
    };
    spec.validate()?;
    for (key, o) in [("orders", &prior_orders), ("center_orders", &center_orders)] {
        if o.len() != prior.dim() {
            return Err(OedError::Parse(format!("{key} must hold {} values", prior.dim())));
        }
    }
    let probe: Vec<f64> = match &prior {
        PriorSpec::UniformBox { lower, upper } => lower.iter().zip(upper).map(|(a, b)| 0.5 * (a + b)).collect(),
        PriorSpec::LogNormal { mean, .. } => mean.iter().map(|m| m.exp()).collect(),
        PriorSpec::LogNormalMixture { components } => components[0].mean.iter().map(|m| m.exp()).collect(),
    };
    verify_jacobians(&spec, &probe)?;
    Ok(BenchmarkSetup {
        spec,
        prior,
        prior_orders,
        center_orders,
    })
}

/// Reads a problem file from disk.
pub fn parse_problem(path: &Path) -> Result<BenchmarkSetup> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| OedError::Io(format!("cannot read problem file {}: {e}", path.display())))?;
    parse_problem_str(&text)
}

/// A bundled problem name or a path to a problem file.
pub fn load_problem(name_or_path: &str) -> Result<BenchmarkSetup> {
    match BUNDLED.iter().find(|(n, _)| *n == name_or_path) {
        Some((_, text)) => parse_problem_str(text),
        None => {
            let path = Path::new(name_or_path);
            if path.exists() {
                parse_problem(path)
            } else {
                let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
                Err(OedError::Argument(format!(
                    "problem '{name_or_path}' is neither a file nor a bundled problem ({})",
                    names.join(", ")
                )))
            }
        }
    }
}
