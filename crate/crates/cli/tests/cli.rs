use std::path::Path;
use std::process::{Command, Output};

use oed_cli::problem::{load_problem, parse_problem, parse_problem_str, BUNDLED};
use oed_core::dynamics::{benchmark_setup, SCENARIOS};
use oed_core::evaluate::EvalReport;
use oed_core::solve::read_discrete_design;
use oed_core::OedError;

fn oed(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oed"))
        .current_dir(cwd)
        .env_remove("OED_THREADS")
        .args(args)
        .output()
        .expect("failed to launch oed")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn bundled(name: &str) -> &'static str {
    BUNDLED.iter().find(|(n, _)| *n == name).unwrap().1
}

fn parse_error(text: &str) -> String {
    match parse_problem_str(text) {
        Err(OedError::Parse(msg)) => msg,
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn bundled_problems_match_the_builtin_setups() {
    for (bench, scenario) in SCENARIOS {
        let parsed = load_problem(&format!("{bench}_{scenario}")).unwrap();
        assert_eq!(parsed, benchmark_setup(bench, scenario).unwrap(), "{bench}/{scenario}");
    }
}

#[test]
fn problem_files_load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.spec");
    std::fs::write(&path, bundled("harmonic_uneven")).unwrap();
    assert_eq!(parse_problem(&path).unwrap(), benchmark_setup("harmonic", "uneven").unwrap());
    assert_eq!(load_problem(path.to_str().unwrap()).unwrap(), parse_problem(&path).unwrap());
    assert!(matches!(load_problem("no_such_problem"), Err(OedError::Argument(_))));
}

#[test]
fn negative_noise_is_reported_with_its_line() {
    let text = bundled("harmonic_similar").replace("sigma_1 = 0.03", "sigma_1 = -0.03");
    let line = text.lines().position(|l| l.starts_with("sigma_1")).unwrap() + 1;
    let msg = parse_error(&text);
    assert!(msg.contains("sigma_1 must be positive"), "{msg}");
    assert!(msg.contains(&format!("line {line}")), "{msg}");
}

#[test]
fn unknown_and_missing_keys_are_rejected() {
    let text = bundled("harmonic_similar").replace("[budget]", "[budget]\nactivation = 3");
    let msg = parse_error(&text);
    let line = text.lines().position(|l| l.starts_with("activation =")).unwrap() + 1;
    assert!(msg.contains("unknown key 'activation' in [budget]"), "{msg}");
    assert!(msg.contains(&format!("line {line}")), "{msg}");

    let text = bundled("lotka_volterra_lognormal").replace("horizon = 12\n", "");
    assert!(parse_error(&text).contains("missing key 'horizon' in [model]"));

    let text = bundled("harmonic_similar").replace("damping", "control_gain");
    assert!(parse_error(&text).contains("missing key 'damping' in [model]"));

    let text = bundled("harmonic_uneven").replace("[prior]", "[priors]");
    assert!(parse_error(&text).contains("unknown section [priors]"));

    let text = bundled("harmonic_uneven").replace("horizon = 10", "horizon = 10\nhorizon = 11");
    assert!(parse_error(&text).contains("duplicate key 'horizon'"));
}

#[test]
fn malformed_values_are_rejected() {
    let cases = [
        ("cov = 0.2 0; 0 0.2", "cov = 0.2 0 0 0.2", "2 x 2 matrix"),
        ("orders = 6 6", "orders = 6 x", "positive integers"),
        ("kind = lognormal", "kind = gamma", "unknown prior kind"),
        ("horizon = 12", "horizon = 0", "horizon must be positive"),
        ("x0 = 0.5 0.7", "x0 = 0.5 nan", "finite numbers"),
    ];
    for (from, to, expected) in cases {
        let text = bundled("lotka_volterra_lognormal").replace(from, to);
        assert_ne!(text, bundled("lotka_volterra_lognormal"));
        let msg = parse_error(&text);
        assert!(msg.contains(expected), "{to}: {msg}");
    }
    let text = bundled("lotka_volterra_lognormal").replace("x0 = 0.5 0.7", "x0 = 0.5 0.7 0.1");
    assert!(parse_problem_str(&text).is_err());
}

#[test]
fn design_writes_a_full_schedule_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let o = oed(
        dir.path(),
        &["design", "--problem", "harmonic_uneven", "--criterion", "d_opt", "--seed", "4", "--out", "out"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for ext in ["design", "relaxed", "log"] {
        let text = std::fs::read_to_string(out.join(format!("d_opt.{ext}"))).unwrap();
        assert!(text.starts_with("# argv: design --problem harmonic_uneven"), "{ext}");
        assert!(text.contains("\n# seed: 4\n"), "{ext}");
    }
    let log = std::fs::read_to_string(out.join("d_opt.log")).unwrap();
    let started = log.lines().find_map(|l| l.strip_prefix("started: ")).unwrap();
    assert!(humantime_like(started), "{started}");

    let setup = load_problem("harmonic_uneven").unwrap();
    let text = std::fs::read_to_string(out.join("d_opt.design")).unwrap();
    let design = read_discrete_design(&text, &setup.spec).unwrap();
    assert_eq!(design.activations.len(), 8);
    design.validate(&setup.spec).unwrap();
}

fn humantime_like(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 20 && b[4] == b'-' && b[7] == b'-' && b[10] == b'T' && b[13] == b':' && b[19] == b'Z'
}

#[test]
fn outputs_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let design = ["design", "--problem", "lotka_volterra_mixture", "--criterion", "inst,d_opt", "--restarts", "2", "--out", "d"];
    let evaluate = ["evaluate", "--problem", "lotka_volterra_mixture", "--designs", "d", "--runs", "4", "--seed", "3", "--out", "e"];
    for dir in [&a, &b] {
        assert!(oed(dir.path(), &design).status.success());
        let o = oed(dir.path(), &evaluate);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["d/inst.design", "d/inst.relaxed", "d/d_opt.design", "d/d_opt.relaxed", "e/errors.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
    let csv = std::fs::read(a.path().join("e/errors.csv")).unwrap();
    let text = String::from_utf8(csv.clone()).unwrap();
    assert!(text.starts_with("# argv: evaluate --problem lotka_volterra_mixture"));
    assert!(text.contains("\n# seed: 3\n"));
    let report = EvalReport::read_csv(&csv[..]).unwrap();
    assert_eq!(report.methods, ["d_opt", "inst"]);
    assert_eq!(report.runs(), 4);
}

#[test]
fn empty_design_directory_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("none")).unwrap();
    let o = oed(dir.path(), &["evaluate", "--problem", "harmonic_uneven", "--designs", "none", "--runs", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("d_opt.design") && err.contains("multi_tilt.design"), "{err}");
    assert!(!dir.path().join("errors.csv").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.spec");
    std::fs::write(&spec, bundled("harmonic_uneven").replace("sigma_2 = 0.03", "sigma_2 = 0")).unwrap();
    let cases: [&[&str]; 6] = [
        &["design", "--problem", "harmonic_uneven", "--criterion", "e_opt"],
        &["design", "--problem", "nowhere", "--criterion", "inst"],
        &["design", "--problem", spec.to_str().unwrap(), "--criterion", "inst"],
        &["validate", "--suite", "everything"],
        &["reproduce", "--figure", "5"],
        &["--threads", "0", "validate", "--suite", "oracle"],
    ];
    for args in cases {
        let o = oed(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    let o = oed(dir.path(), &["design", "--problem", spec.to_str().unwrap(), "--criterion", "inst"]);
    assert!(stderr(&o).contains("sigma_2 must be positive"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn oracle_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = oed(dir.path(), &["--threads", "1", "validate", "--suite", "oracle"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("6/6 checks passed"));
    assert!(!stdout.contains("FAIL"));
}
