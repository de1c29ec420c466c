//! Plain-text design files.
//!
//! ```text
//! # comment lines
//! controls <N_u> <n_u>
//! <u values of one interval, space separated>
//! ...
//! activations <count>
//! <time> <sensor>
//! ...
//! ```
//!
//! Sensors are numbered from 1. A relaxed design replaces the activation
//! block with `weights <N_w> <n_exp>` followed by one `<time> <w_1> ...` line
//! per cell.

use std::io::Write;

use super::round::{Activation, DiscreteDesign};
use crate::criteria::RelaxedDesign;
use crate::dynamics::{Model, ProblemSpec};
use crate::error::{OedError, Result};

fn write_header(out: &mut impl Write, header: &[String]) -> std::io::Result<()> {
    for line in header {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

fn write_controls(out: &mut impl Write, u: &[f64], intervals: usize) -> std::io::Result<()> {
    let nu = u.len() / intervals.max(1);
    writeln!(out, "controls {intervals} {nu}")?;
    for row in u.chunks(nu.max(1)) {
        let cols: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", cols.join(" "))?;
    }
    Ok(())
}

pub fn write_discrete_design(out: &mut impl Write, design: &DiscreteDesign, intervals: usize, header: &[String]) -> Result<()> {
    write_header(out, header)?;
    write_controls(out, &design.u, intervals)?;
    writeln!(out, "activations {}", design.activations.len())?;
    for a in &design.activations {
        writeln!(out, "{:.16e} {}", a.time, a.sensor + 1)?;
    }
    Ok(())
}

pub fn write_relaxed_design<M: Model>(
    out: &mut impl Write,
    design: &RelaxedDesign,
    spec: &ProblemSpec<M>,
    header: &[String],
) -> Result<()> {
    write_header(out, header)?;
    write_controls(out, &design.u, spec.control_intervals)?;
    let ns = spec.sensor_count();
    writeln!(out, "weights {} {}", spec.weight_cells, ns)?;
    for c in 0..spec.weight_cells {
        let mut line = format!("{:.16e}", spec.cell_midpoint(c));
        for w in design.cell_weights(c, ns) {
            line.push_str(&format!(" {w:.16e}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok((i + 1, t.split_whitespace().collect()));
        }
        Err(OedError::Parse("unexpected end of design file".into()))
    }

    fn section(&mut self, name: &str, fields: usize) -> Result<(usize, Vec<usize>)> {
        let (line, toks) = self.next()?;
        if toks.first() != Some(&name) || toks.len() != fields + 1 {
            return Err(OedError::Parse(format!("line {line}: expected '{name}' with {fields} counts")));
        }
        let counts = toks[1..]
            .iter()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| OedError::Parse(format!("line {line}: invalid count")))?;
        Ok((line, counts))
    }
}

fn number(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| OedError::Parse(format!("line {line}: invalid number '{tok}'")))
}

fn read_controls<M: Model>(lines: &mut Lines, spec: &ProblemSpec<M>) -> Result<Vec<f64>> {
    let (line, counts) = lines.section("controls", 2)?;
    if counts[0] != spec.control_intervals || counts[1] != spec.control_dim() {
        return Err(OedError::Parse(format!(
            "line {line}: design has {} x {} controls, problem expects {} x {}",
            counts[0],
            counts[1],
            spec.control_intervals,
            spec.control_dim()
        )));
    }
    let mut u = Vec::with_capacity(spec.control_len());
    for _ in 0..counts[0] {
        let (line, toks) = lines.next()?;
        if toks.len() != counts[1] {
            return Err(OedError::Parse(format!("line {line}: expected {} control values", counts[1])));
        }
        for t in toks {
            u.push(number(t, line)?);
        }
    }
    Ok(u)
}

fn end_of_file(lines: &mut Lines) -> Result<()> {
    match lines.next() {
        Ok((line, _)) => Err(OedError::Parse(format!("line {line}: unexpected trailing content"))),
        Err(_) => Ok(()),
    }
}

pub fn read_discrete_design<M: Model>(text: &str, spec: &ProblemSpec<M>) -> Result<DiscreteDesign> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let u = read_controls(&mut lines, spec)?;
    let (_, counts) = lines.section("activations", 1)?;
    let width = spec.cell_width();
    let mut acts = Vec::with_capacity(counts[0]);
    for _ in 0..counts[0] {
        let (line, toks) = lines.next()?;
        if toks.len() != 2 {
            return Err(OedError::Parse(format!("line {line}: expected '<time> <sensor>'")));
        }
        let time = number(toks[0], line)?;
        let sensor: usize = toks[1]
            .parse()
            .ok()
            .filter(|s| (1..=spec.sensor_count()).contains(s))
            .ok_or_else(|| OedError::Parse(format!("line {line}: invalid sensor '{}'", toks[1])))?;
        let cell = (time / width - 0.5).round();
        if !(0.0..spec.weight_cells as f64).contains(&cell) {
            return Err(OedError::Parse(format!("line {line}: time {time} outside the horizon")));
        }
        acts.push(Activation {
            cell: cell as usize,
            time,
            sensor: sensor - 1,
        });
    }
    end_of_file(&mut lines)?;
    DiscreteDesign::new(spec, u, acts)
}

pub fn read_relaxed_design<M: Model>(text: &str, spec: &ProblemSpec<M>) -> Result<RelaxedDesign> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let u = read_controls(&mut lines, spec)?;
    let (line, counts) = lines.section("weights", 2)?;
    let ns = spec.sensor_count();
    if counts[0] != spec.weight_cells || counts[1] != ns {
        return Err(OedError::Parse(format!("line {line}: weight table does not match the problem")));
    }
    let mut w = Vec::with_capacity(spec.weight_len());
    for _ in 0..counts[0] {
        let (line, toks) = lines.next()?;
        if toks.len() != ns + 1 {
            return Err(OedError::Parse(format!("line {line}: expected a time and {ns} weights")));
        }
        for t in &toks[1..] {
            w.push(number(t, line)?);
        }
    }
    end_of_file(&mut lines)?;
    let d = RelaxedDesign { u, w };
    d.validate(spec)?;
    Ok(d)
}
