use std::io::{BufRead, Write};

use crate::error::{OedError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// No start of the likelihood fit succeeded; the estimate is the prior mean.
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Failed => "failed",
        }
    }
}

/// One (method, run) row.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub method: String,
    pub run: usize,
    pub theta_true: Vec<f64>,
    pub theta_hat: Vec<f64>,
    /// `|θ̂_i − θ_i|`.
    pub errors: Vec<f64>,
    pub err_l2: f64,
    pub status: RunStatus,
}

impl RunRecord {
    pub fn new(method: &str, run: usize, theta_true: Vec<f64>, theta_hat: Vec<f64>, status: RunStatus) -> Self {
        let errors: Vec<f64> = theta_hat.iter().zip(&theta_true).map(|(a, b)| (a - b).abs()).collect();
        let err_l2 = errors.iter().map(|e| e * e).sum::<f64>().sqrt();
        Self {
            method: method.to_string(),
            run,
            theta_true,
            theta_hat,
            errors,
            err_l2,
            status,
        }
    }
}

/// Per-method error statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub failures: usize,
    pub median_l2: f64,
    pub mean_l2: f64,
}

/// Monte Carlo estimation errors of several designs.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub param_dim: usize,
    /// In column order of the comparison.
    pub methods: Vec<String>,
    /// Sorted by method order, then run.
    pub records: Vec<RunRecord>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl EvalReport {
    pub fn runs(&self) -> usize {
        self.records.iter().map(|r| r.run + 1).max().unwrap_or(0)
    }

    /// Euclidean errors of `method` by run, failed runs included.
    pub fn errors_of(&self, method: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.err_l2)
            .collect()
    }

    pub fn summary(&self) -> Vec<MethodSummary> {
        self.methods
            .iter()
            .map(|m| {
                let rows: Vec<&RunRecord> = self.records.iter().filter(|r| &r.method == m).collect();
                let errs: Vec<f64> = rows.iter().map(|r| r.err_l2).collect();
                MethodSummary {
                    method: m.clone(),
                    runs: rows.len(),
                    failures: rows.iter().filter(|r| r.status == RunStatus::Failed).count(),
                    median_l2: median(&errs),
                    mean_l2: errs.iter().sum::<f64>() / errs.len().max(1) as f64,
                }
            })
            .collect()
    }

    fn header(&self) -> String {
        let n = self.param_dim;
        let mut cols = vec!["method".to_string(), "run".to_string()];
        cols.extend((1..=n).map(|i| format!("theta_true_{i}")));
        cols.extend((1..=n).map(|i| format!("theta_hat_{i}")));
        cols.extend((1..=n).map(|i| format!("err_{i}")));
        cols.push("err_l2".into());
        cols.push("status".into());
        cols.join(",")
    }

    /// CSV with `#` comment lines first; numbers carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "{}", self.header())?;
        for r in &self.records {
            let mut fields = vec![r.method.clone(), r.run.to_string()];
            for v in r.theta_true.iter().chain(&r.theta_hat).chain(&r.errors) {
                fields.push(format!("{v:.16e}"));
            }
            fields.push(format!("{:.16e}", r.err_l2));
            fields.push(r.status.as_str().into());
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    /// Reads what [`EvalReport::write_csv`] wrote; comment lines are skipped.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().filter(|l| !l.as_ref().is_ok_and(|s| s.starts_with('#')));
        let header = lines
            .next()
            .ok_or_else(|| OedError::Parse("empty report".into()))??;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 5 || cols[0] != "method" || cols[1] != "run" || (cols.len() - 4) % 3 != 0 {
            return Err(OedError::Parse(format!("unexpected report header '{header}'")));
        }
        let n = (cols.len() - 4) / 3;
        let mut report = EvalReport {
            param_dim: n,
            methods: Vec::new(),
            records: Vec::new(),
        };
        if report.header() != header {
            return Err(OedError::Parse(format!("unexpected report header '{header}'")));
        }
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(OedError::Parse(format!("row {} has {} fields", i + 1, f.len())));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| OedError::Parse(format!("row {}: bad number '{s}'", i + 1)))
            };
            let vals = f[2..2 + 3 * n + 1].iter().map(|s| num(s)).collect::<Result<Vec<f64>>>()?;
            let status = match f[cols.len() - 1] {
                "ok" => RunStatus::Ok,
                "failed" => RunStatus::Failed,
                s => return Err(OedError::Parse(format!("row {}: bad status '{s}'", i + 1))),
            };
            let method = f[0].to_string();
            if !report.methods.contains(&method) {
                report.methods.push(method.clone());
            }
            report.records.push(RunRecord {
                method,
                run: f[1]
                    .parse()
                    .map_err(|_| OedError::Parse(format!("row {}: bad run index", i + 1)))?,
                theta_true: vals[..n].to_vec(),
                theta_hat: vals[n..2 * n].to_vec(),
                errors: vals[2 * n..3 * n].to_vec(),
                err_l2: vals[3 * n],
                status,
            });
        }
        Ok(report)
    }
}

/// Paired two-sided sign test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignTest {
    /// Runs where the first sample is strictly smaller.
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    pub p_value: f64,
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let lf = |m: usize| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    lf(n) - lf(k) - lf(n - k)
}

/// Exact binomial sign test of `a_r < b_r` against `a_r > b_r`; ties dropped.
pub fn sign_test(a: &[f64], b: &[f64]) -> SignTest {
    let mut wins = 0;
    let mut losses = 0;
    let mut ties = 0;
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => wins += 1,
            std::cmp::Ordering::Greater => losses += 1,
            std::cmp::Ordering::Equal => ties += 1,
        }
    }
    let n = wins + losses;
    let k = wins.min(losses);
    let p_value = if n == 0 {
        1.0
    } else {
        let tail: f64 = (0..=k)
            .map(|i| (ln_choose(n, i) - n as f64 * 2f64.ln()).exp())
            .sum();
        (2.0 * tail).min(1.0)
    };
    SignTest {
        wins,
        losses,
        ties,
        p_value,
    }
}
