use std::fs;
use std::path::Path;

use wicksync::experiments::{ExperimentConfig, ExperimentKind};
use wicksync::{Field, TorusGrid};
use wicksync_cli::{main_with, parse_config, render_config, RunManifest, EXIT_OK, EXIT_USAGE};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["wicksync"];
    argv.extend_from_slice(args);
    let code = main_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const SMALL_SYNC: &str = "\
[solver]
N = 16
dt = 0.002

[besov]
s_points = 32

[experiment]
kind = sync_rate
ensemble = 2
horizon = 1.4
output_interval = 0.1
fit_start = 1
bootstrap = 20
";

#[test]
fn resolved_config_round_trips_for_every_kind() {
    for kind in ExperimentKind::ALL {
        let config = ExperimentConfig::new(kind).unwrap();
        let text = render_config(&config);
        assert_eq!(parse_config(&text, None).unwrap(), config, "{kind}");
    }
}

#[test]
fn edited_config_round_trips() {
    let text = "[solver]\nL = 2.5\nN = 32\ndt = 0.0005\nscheme = semi_implicit\ncoefficients = 0, 0.5, 0, 1\nrenorm = 0.25\n\
                [noise]\namplitude = 0.3\nseed = 99\n[experiment]\nkind = order\nR_values = 1, 10\nlemma_p = 2, 5\n";
    let config = parse_config(text, None).unwrap();
    assert_eq!(config.solver.grid.side(), 2.5);
    assert_eq!(config.solver.renorm.value, 0.25);
    assert_eq!(config.r_values, vec![1.0, 10.0]);
    assert_eq!(parse_config(&render_config(&config), None).unwrap(), config);
}

#[test]
fn malformed_key_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ini");
    fs::write(&path, "[solver]\nN = 16\n\n[besov]\nalpah = 0.1\n").unwrap();
    let (code, _, err) = run(&["run", "--experiment", "order", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("line 5"), "{err}");
    assert!(err.contains("alpah"), "{err}");
}

#[test]
fn unparsable_value_reports_its_line() {
    let err = parse_config("[experiment]\nkind = order\n[solver]\ndt = fast\n", None).unwrap_err();
    assert_eq!(err.line, Some(4));
}

#[test]
fn unknown_flag_exits_with_usage_error() {
    let (code, _, err) = run(&["run", "--experiment", "order", "--out", "x", "--bogus"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--bogus"));
    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn unknown_experiment_exits_with_usage_error() {
    let (code, _, err) = run(&["run", "--experiment", "nothing", "--out", "x"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("nothing"));
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn small_run_writes_outputs_and_replays_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.ini");
    fs::write(&config, SMALL_SYNC).unwrap();
    let first = dir.path().join("first");
    let (code, out, err) = run(&["run", "--config", config.to_str().unwrap(), "--out", first.to_str().unwrap(), "--threads", "2"]);
    // a two-member ensemble over a short horizon need not meet the statistical thresholds
    assert!(code == EXIT_OK || code == 2, "{out}{err}");

    let csv = read(&first, "sync_rate.csv");
    assert!(csv.starts_with("experiment,seed,t,quantity,value\n"));
    assert!(csv.lines().count() > 10);
    let summary: serde_json::Value = serde_json::from_str(&read(&first, "sync_rate_summary.json")).unwrap();
    assert_eq!(summary["kind"], "sync_rate");
    assert!(summary["checks"].as_array().is_some_and(|c| !c.is_empty()));
    let manifest = RunManifest::from_json(&read(&first, "manifest.json")).unwrap();
    assert_eq!(manifest.seeds.len(), 2);
    assert_eq!(manifest.threads, 2);
    assert_eq!(parse_config(&manifest.config_ini, None).unwrap(), manifest.config);
    for output in &manifest.outputs {
        let bytes = fs::read(first.join(&output.file)).unwrap();
        assert_eq!(wicksync_cli::content_hash(&bytes), output.hash);
    }

    let second = dir.path().join("second");
    let manifest_path = first.join("manifest.json");
    let (code2, _, _) = run(&["run", "--config", manifest_path.to_str().unwrap(), "--out", second.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(code, code2);
    assert_eq!(fs::read(first.join("sync_rate.csv")).unwrap(), fs::read(second.join("sync_rate.csv")).unwrap());
    assert_eq!(read(&first, "config.ini"), read(&second, "config.ini"));
}

#[test]
fn seed_flag_changes_member_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.ini");
    fs::write(&config, SMALL_SYNC.replace("horizon = 1.4", "horizon = 1.1")).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&["run", "--config", config.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    run(&["run", "--config", config.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "7"]);
    let ma = RunManifest::from_json(&read(&a, "manifest.json")).unwrap();
    let mb = RunManifest::from_json(&read(&b, "manifest.json")).unwrap();
    assert_eq!(mb.seed_base, 7);
    assert_ne!(ma.seeds, mb.seeds);
}

#[test]
fn norms_of_a_stored_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.bin");
    let grid = TorusGrid::square(1.0, 16).unwrap();
    Field::constant(grid, 2.0).unwrap().write_binary(&path).unwrap();
    let (code, out, err) = run(&["norms", "--field", path.to_str().unwrap(), "--alpha", "0.6", "--p", "4"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let value: serde_json::Value = serde_json::from_str(&out).unwrap();
    // constants are fixed by the heat flow, so the sup form peaks at s = 1
    assert!((value["sup_norm"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!(value["phi"].as_f64().unwrap() > 0.0);
}

#[test]
fn norms_of_missing_field_is_an_io_error() {
    let (code, _, _) = run(&["norms", "--field", "/nonexistent/u.bin", "--alpha", "0.1", "--p", "4"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn conflicting_kinds_are_rejected() {
    let err = parse_config("[experiment]\nkind = order\n", Some(ExperimentKind::Pullback)).unwrap_err();
    assert_eq!(err.line, Some(2));
    assert_eq!(parse_config("[experiment]\nkind = order\n", Some(ExperimentKind::Order)).unwrap().kind, ExperimentKind::Order);
}
