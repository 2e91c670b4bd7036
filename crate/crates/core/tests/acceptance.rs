//! End-to-end acceptance: every experiment row, the command line contract,
//! reproducibility and config round-trips.

use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use wallwave::harness::config::{BranchConfig, EnvelopeConfig, ModelConfig, WallConfig};
use wallwave::harness::{read_report, run_experiment, ExperimentConfig, ReportRow};
use wallwave::spectral::{Model, Sign};

/// Rows known to fail, as `(experiment, metric, ε, reason)`.
const KNOWN_FAILURES: &[(&str, &str, &str, &str)] = &[(
    "E2",
    "dispersive_m1_ratio_eps_over_eps/4",
    "4.00000000e-3",
    "error at a fixed time samples an O(√ε) interband beat; see the sup-over-time rows",
)];

fn known(r: &ReportRow) -> Option<&'static str> {
    KNOWN_FAILURES
        .iter()
        .find(|(e, m, eps, _)| *e == r.experiment && *m == r.metric && *eps == r.epsilon)
        .map(|k| k.3)
}

/// Prints one line per row and fails on any row outside the known list.
fn check(rows: &[ReportRow]) {
    assert!(!rows.is_empty(), "experiment produced no rows");
    let mut unexpected = Vec::new();
    for r in rows {
        let status = match (r.pass, known(r)) {
            (true, _) => "PASS".to_string(),
            (false, Some(why)) => format!("FAIL (known: {why})"),
            (false, None) => {
                unexpected.push(format!("{} {}", r.experiment, r.metric));
                "FAIL".to_string()
            }
        };
        println!(
            "{status} {} {} eps={} t={} value={} tolerance={}",
            r.experiment, r.metric, r.epsilon, r.t, r.value, r.tolerance
        );
    }
    assert!(unexpected.is_empty(), "failed criteria: {unexpected:?}");
}

fn experiment(id: &str) -> Vec<ReportRow> {
    let cfg = ExperimentConfig::parse(&format!("schema_version = 1\nexperiment = \"{id}\"\nseed = 7\n")).unwrap();
    run_experiment(&cfg, None).unwrap()
}

#[test]
fn e1_flat_wall_kernel_membership() {
    let rows = experiment("E1");
    assert_eq!(rows.len(), 5);
    check(&rows);
}

#[test]
fn e2_curved_wall_error_scaling() {
    check(&experiment("E2"));
}

#[test]
fn e3_dispersive_amplitude_law() {
    check(&experiment("E3"));
}

#[test]
fn e4_one_way_relativistic_transport() {
    check(&experiment("E4"));
}

#[test]
fn e5_support_cone_and_decay() {
    check(&experiment("E5"));
}

#[test]
fn e6_stationary_phase_against_quadrature() {
    check(&experiment("E6"));
}

#[test]
fn property_suites() {
    let rows = experiment("props");
    for needle in ["geometry_", "hermite_", "dispersion_vs_", "eikonal_", "dirac_norm_drift", "kg_energy_drift"] {
        assert!(rows.iter().any(|r| r.metric.starts_with(needle)), "missing {needle}");
    }
    check(&rows);
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let text = "schema_version = 1\nexperiment = \"E6\"\nseed = 3\n";
    let cfg = ExperimentConfig::parse(text).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_experiment(&cfg, Some(&a)).unwrap();
    run_experiment(&cfg, Some(&b)).unwrap();
    assert_eq!(fs::read(a.join("report.csv")).unwrap(), fs::read(b.join("report.csv")).unwrap());
    let other = ExperimentConfig::parse("schema_version = 1\nexperiment = \"E6\"\nseed = 4\n").unwrap();
    let c = run_experiment(&other, None).unwrap();
    assert_ne!(read_report(fs::File::open(a.join("report.csv")).unwrap()).unwrap(), c);
}

fn cli(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_wallwave")).args(args).current_dir(dir).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn cli_experiment_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("e1.toml"), "schema_version = 1\nexperiment = \"E1\"\n").unwrap();
    let (code, stdout) = cli(&["experiment", "--config", "e1.toml", "--out", "run"], dir.path());
    print!("{stdout}");
    assert_eq!(code, 0);
    let rows = read_report(fs::File::open(dir.path().join("run/report.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 5);
    let header = fs::read_to_string(dir.path().join("run/report.csv")).unwrap();
    assert!(header.starts_with("experiment,ε,t,metric,value,tolerance,pass\n"));
}

const PACK: &str = r#"
schema_version = 1
times = [0.0]

[wall]
kind = "circle"
radius = 1.0
bounds = [-2.0, 2.0, -2.0, 2.0]
eta = 0.3

[model]
kind = "dirac"
epsilon = [0.016]

[branch]
m = 1
sign = "+"

[envelope]
kind = "gaussian"
center = 1.0
width = 0.3
"#;

#[test]
fn cli_pack_then_solve_consumes_field_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.toml"), PACK).unwrap();
    assert_eq!(cli(&["pack", "--config", "p.toml"], dir.path()).0, 0);
    let (code, _) = cli(&["solve", "--config", "p.toml", "--init", "pack.bin", "--out", "s"], dir.path());
    assert_eq!(code, 0);
    assert_eq!(fs::read(dir.path().join("pack.bin")).unwrap(), fs::read(dir.path().join("s/solution.bin")).unwrap());
    let obs = fs::read_to_string(dir.path().join("s/observables.csv")).unwrap();
    assert_eq!(obs.lines().count(), 2);
}

#[test]
fn cli_trace_circle_length() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.toml"), PACK).unwrap();
    assert_eq!(cli(&["trace", "--config", "p.toml"], dir.path()).0, 0);
    let mut rd = csv::Reader::from_path(dir.path().join("curve_summary.csv")).unwrap();
    let rec = rd.records().next().unwrap().unwrap();
    let length: f64 = rec[1].parse().unwrap();
    assert!((length - 2.0 * std::f64::consts::PI).abs() < 1e-8, "{length}");
    assert!(dir.path().join("curve.csv").exists());
    assert_eq!(cli(&["phase", "--config", "p.toml"], dir.path()).0, 0);
    assert!(dir.path().join("phase.csv").exists());
}

#[test]
fn cli_usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["nonsense"], dir.path()).0, 2);
    assert_eq!(cli(&["experiment"], dir.path()).0, 2);
    assert_eq!(cli(&["experiment", "--config", "missing.toml"], dir.path()).0, 2);
    fs::write(
        dir.path().join("bad.toml"),
        "schema_version = 1\nexperiment = \"custom\"\n[wall]\nkind = \"expr\"\nexpression = \"y - sin((\"\nbounds = [-1.0, 1.0, -1.0, 1.0]\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wallwave"))
        .args(["experiment", "--config", "bad.toml"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wall.expression"));
}

#[test]
fn cli_report_exit_reflects_failures() {
    let dir = tempfile::tempdir().unwrap();
    let ok = "experiment,ε,t,metric,value,tolerance,pass\nE1,1.00000000e-2,,r,1.00000000e-9,< 1.00000000e-7,true\n";
    fs::write(dir.path().join("ok.csv"), ok).unwrap();
    let bad = ok.replace("true", "false");
    fs::write(dir.path().join("bad.csv"), bad).unwrap();
    assert_eq!(cli(&["report", "ok.csv"], dir.path()).0, 0);
    assert_eq!(cli(&["report", "ok.csv", "bad.csv", "--out", "all"], dir.path()).0, 1);
    let merged = read_report(fs::File::open(dir.path().join("all/report.csv")).unwrap()).unwrap();
    assert_eq!(merged.len(), 2);
}

fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    (
        prop_oneof![Just(Model::Dirac), Just(Model::KleinGordon)],
        prop::collection::vec(1e-4f64..0.1, 1..4),
        0u32..4,
        any::<bool>(),
        (-2.0f64..2.0, 0.05f64..1.0),
        any::<u64>(),
        0.2f64..3.0,
    )
        .prop_map(|(kind, mut eps, m, plus, (center, width), seed, radius)| {
            eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
            eps.dedup();
            ExperimentConfig {
                seed,
                wall: Some(WallConfig::circle(radius, [-4.0, 4.0, -4.0, 4.0])),
                model: Some(ModelConfig { kind, epsilon: eps }),
                branch: Some(BranchConfig { m, sign: if plus && !(kind == Model::Dirac && m == 0) { Sign::Plus } else { Sign::Minus } }),
                envelope: Some(EnvelopeConfig::Gaussian { center, width }),
                times: Some(vec![0.5, 1.0]),
                ..ExperimentConfig::default()
            }
        })
}

proptest! {
    #[test]
    fn config_round_trips(cfg in config_strategy()) {
        let again = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        prop_assert_eq!(cfg, again);
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(cfg.experiment.is_some(), "{}", path.display());
            count += 1;
        }
    }
    assert!(count >= 8);
}
