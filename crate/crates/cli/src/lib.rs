//! The `oed` command-line tool: design, evaluate, validate and reproduce.

pub mod problem;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use clap::{Args, Parser, Subcommand};
use oed_core::dynamics::{BenchmarkModel, BenchmarkSetup};
use oed_core::evaluate::{mc_evaluate, sign_test, EvalReport};
use oed_core::measure::build_prior;
use oed_core::pipeline::figure_scenario;
use oed_core::solve::{
    optimize_schedule, read_discrete_design, write_discrete_design, write_relaxed_design, Criterion, DesignProblem,
    DiscreteDesign, OptimizerOptions, ScheduleReport,
};
use oed_core::validation::{run_suite, Check, Suite};
use oed_core::{OedError, Result};

use problem::load_problem;

#[derive(Parser, Debug)]
#[command(name = "oed", version, about = "Optimal experimental design for controlled ODE models")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "OED_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimize designs and write them to a directory.
    Design(DesignArgs),
    /// Compare designs by Monte Carlo maximum-likelihood estimation.
    Evaluate(EvaluateArgs),
    /// Run the built-in correctness checks.
    Validate(ValidateArgs),
    /// Regenerate the designs and error table of one benchmark figure.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug)]
struct OptimizerArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
}

impl OptimizerArgs {
    fn options(&self) -> OptimizerOptions {
        OptimizerOptions {
            seed: self.seed,
            restarts: self.restarts,
            max_iters: self.max_iters,
            ..OptimizerOptions::default()
        }
    }
}

#[derive(Args, Debug)]
struct DesignArgs {
    /// Bundled problem name or path to a problem file.
    #[arg(long)]
    problem: String,
    /// Criteria, comma separated: a_opt, d_opt, inst, tilt, multi_tilt or all.
    #[arg(long, value_delimiter = ',', required = true)]
    criterion: Vec<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    problem: String,
    /// Directory holding `<method>.design` files.
    #[arg(long)]
    designs: PathBuf,
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// oracle, gradients or benchmarks; all three when omitted.
    #[arg(long)]
    suite: Option<String>,
    /// Monte Carlo runs of the benchmark studies.
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=4))]
    figure: u32,
    #[arg(long, default_value_t = 200)]
    runs: usize,
    /// Use 1000 Monte Carlo runs.
    #[arg(long)]
    paper_scale: bool,
    /// Output directory; defaults to `figure<N>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

fn exit_code(e: &OedError) -> i32 {
    match e {
        OedError::Argument(_) | OedError::Config(_) | OedError::Parse(_) => 2,
        _ => 1,
    }
}

/// Runs the tool on `args` (program name first) and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return 2;
        }
        // A pool may already exist when called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let argv = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let result = match &cli.command {
        Command::Design(a) => design(a, &argv),
        Command::Evaluate(a) => evaluate(a, &argv),
        Command::Validate(a) => validate(a),
        Command::Reproduce(a) => reproduce(a, &argv),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn parse_criteria(names: &[String]) -> Result<Vec<Criterion>> {
    let mut out = Vec::new();
    for n in names {
        if n.trim() == "all" {
            out.extend(Criterion::ALL);
        } else {
            out.push(n.parse()?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| OedError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| OedError::Io(format!("cannot write {}: {e}", path.display())))
}

fn timestamp() -> String {
    humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
}

fn optimization_log(report: &ScheduleReport, header: &[String], started: &str) -> Vec<u8> {
    let r = &report.relaxed;
    let mut out = Vec::new();
    for line in header {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "started: {started}");
    let _ = writeln!(out, "finished: {}", timestamp());
    let _ = writeln!(out, "criterion: {}", r.criterion);
    let _ = writeln!(out, "best restart: {} value {:.16e}", r.best_restart, r.value);
    let _ = writeln!(out, "projected gradient norm: {:.3e}", r.projected_gradient_norm);
    let _ = writeln!(out, "rounding refinements: {}", report.refinements);
    let _ = writeln!(out, "activations: {}", report.discrete.activations.len());
    for t in &r.traces {
        let _ = writeln!(
            out,
            "restart {} iterations {} final {:.16e} pgnorm {:.3e}",
            t.restart,
            t.iterations,
            t.history.last().copied().unwrap_or(f64::NAN),
            t.projected_gradient_norm
        );
        let hist: Vec<String> = t.history.iter().map(|v| format!("{v:.10e}")).collect();
        let _ = writeln!(out, "  history {}", hist.join(" "));
    }
    for (restart, msg) in &r.failures {
        let _ = writeln!(out, "restart {restart} failed: {msg}");
    }
    out
}

fn write_designs(
    dir: &Path,
    setup: &BenchmarkSetup,
    criterion: Criterion,
    report: &ScheduleReport,
    header: &[String],
    started: &str,
) -> Result<()> {
    let spec = &setup.spec;
    let mut lines = header.to_vec();
    lines.push(format!("criterion: {criterion}"));
    let mut buf = Vec::new();
    write_discrete_design(&mut buf, &report.discrete, spec.control_intervals, &lines)?;
    write_file(&dir.join(format!("{criterion}.design")), &buf)?;
    let mut buf = Vec::new();
    write_relaxed_design(&mut buf, &report.relaxed.design, spec, &lines)?;
    write_file(&dir.join(format!("{criterion}.relaxed")), &buf)?;
    write_file(&dir.join(format!("{criterion}.log")), &optimization_log(report, &lines, started))
}

fn design_into(
    dir: &Path,
    setup: &BenchmarkSetup,
    criteria: &[Criterion],
    opts: &OptimizerOptions,
    header: &[String],
) -> Result<Vec<(String, DiscreteDesign)>> {
    create_dir(dir)?;
    let problem = DesignProblem::<BenchmarkModel>::from_setup(setup)?;
    let mut out = Vec::new();
    for &c in criteria {
        let started = timestamp();
        let report = optimize_schedule(&problem, c, opts)?;
        write_designs(dir, setup, c, &report, header, &started)?;
        println!(
            "{:<11} value {:>12.6e}  activations {:>3}  sensors {}",
            c.name(),
            report.relaxed.value,
            report.discrete.activations.len(),
            (0..setup.spec.sensor_count())
                .map(|d| report.discrete.count_for_sensor(d).to_string())
                .collect::<Vec<_>>()
                .join("/")
        );
        out.push((c.name().to_string(), report.discrete));
    }
    Ok(out)
}

fn design(a: &DesignArgs, argv: &str) -> Result<i32> {
    let setup = load_problem(&a.problem)?;
    let criteria = parse_criteria(&a.criterion)?;
    let opts = a.optimizer.options();
    opts.validate()?;
    let header = vec![
        format!("argv: {argv}"),
        format!("seed: {}", opts.seed),
        format!("problem: {}", a.problem),
    ];
    design_into(&a.out, &setup, &criteria, &opts, &header)?;
    Ok(0)
}

fn method_rank(name: &str) -> usize {
    Criterion::ALL
        .iter()
        .position(|c| c.name() == name)
        .unwrap_or(Criterion::ALL.len())
}

fn read_designs(dir: &Path, setup: &BenchmarkSetup) -> Result<Vec<(String, DiscreteDesign)>> {
    let expected = || {
        Criterion::ALL
            .iter()
            .map(|c| format!("{c}.design"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let entries = fs::read_dir(dir)
        .map_err(|e| OedError::Argument(format!("cannot read design directory {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "design") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                files.push((stem.to_string(), path));
            }
        }
    }
    if files.is_empty() {
        return Err(OedError::Argument(format!(
            "no design files in {}; expected <method>.design files such as {} (written by `oed design`)",
            dir.display(),
            expected()
        )));
    }
    files.sort_by(|a, b| (method_rank(&a.0), &a.0).cmp(&(method_rank(&b.0), &b.0)));
    files
        .into_iter()
        .map(|(name, path)| {
            let text = fs::read_to_string(&path)?;
            let d = read_discrete_design(&text, &setup.spec)
                .map_err(|e| OedError::Parse(format!("{}: {e}", path.display())))?;
            Ok((name, d))
        })
        .collect()
}

fn print_report(report: &EvalReport) {
    println!("{:<12} {:>6} {:>8} {:>14} {:>14}", "method", "runs", "failed", "median l2", "mean l2");
    for s in report.summary() {
        println!(
            "{:<12} {:>6} {:>8} {:>14.6e} {:>14.6e}",
            s.method, s.runs, s.failures, s.median_l2, s.mean_l2
        );
    }
    let baseline = Criterion::DOpt.name();
    if report.methods.iter().any(|m| m == baseline) {
        let base = report.errors_of(baseline);
        for m in report.methods.iter().filter(|m| *m != baseline) {
            let t = sign_test(&report.errors_of(m), &base);
            println!(
                "sign test {m} vs {baseline}: wins {} losses {} ties {} p = {:.3e}",
                t.wins, t.losses, t.ties, t.p_value
            );
        }
    }
}

fn evaluate_into(
    dir: &Path,
    setup: &BenchmarkSetup,
    designs: &[(String, DiscreteDesign)],
    runs: usize,
    seed: u64,
    header: &[String],
) -> Result<()> {
    let cloud = build_prior(&setup.prior, &setup.prior_orders)?;
    let report = mc_evaluate(&setup.spec, designs, &setup.prior, &cloud, runs, seed)?;
    create_dir(dir)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf, header)?;
    write_file(&dir.join("errors.csv"), &buf)?;
    print_report(&report);
    Ok(())
}

fn evaluate(a: &EvaluateArgs, argv: &str) -> Result<i32> {
    let setup = load_problem(&a.problem)?;
    let designs = read_designs(&a.designs, &setup)?;
    let header = vec![
        format!("argv: {argv}"),
        format!("seed: {}", a.seed),
        format!("runs: {}", a.runs),
        format!("problem: {}", a.problem),
    ];
    evaluate_into(&a.out, &setup, &designs, a.runs, a.seed, &header)?;
    Ok(0)
}

fn print_checks(checks: &[Check]) {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    println!("{:<6} {:<width$} {:>9}  detail", "result", "check", "time");
    for c in checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag:<6} {:<width$} {:>7.1} s  {}", c.name, c.seconds, c.detail);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    println!("{passed}/{} checks passed", checks.len());
}

fn validate(a: &ValidateArgs) -> Result<i32> {
    let suites = match &a.suite {
        Some(s) => vec![s.parse::<Suite>()?],
        None => vec![Suite::Oracle, Suite::Gradients, Suite::Benchmarks],
    };
    if a.runs == 0 {
        return Err(OedError::Argument("--runs must be positive".into()));
    }
    let checks: Vec<Check> = suites.into_iter().flat_map(|s| run_suite(s, a.runs, a.seed)).collect();
    print_checks(&checks);
    Ok(if checks.iter().all(|c| c.passed) { 0 } else { 1 })
}

fn reproduce(a: &ReproduceArgs, argv: &str) -> Result<i32> {
    let (benchmark, scenario) = figure_scenario(a.figure)?;
    let name = format!("{benchmark}_{scenario}");
    let setup = load_problem(&name)?;
    let runs = if a.paper_scale { 1000 } else { a.runs };
    let opts = a.optimizer.options();
    opts.validate()?;
    let dir = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("figure{}", a.figure)));
    let header = vec![
        format!("argv: {argv}"),
        format!("seed: {}", opts.seed),
        format!("problem: {name}"),
        format!("runs: {runs}"),
    ];
    let designs = design_into(&dir, &setup, &Criterion::ALL, &opts, &header)?;
    evaluate_into(&dir, &setup, &designs, runs, opts.seed, &header)?;
    Ok(0)
}
