use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn srf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srf")).args(args).output().expect("spawn srf")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SOLITON: &str = r#"
seed = 4

[testbed]
kind = "gaussian1d"
n = 64

[flow]
form = "h"
soliton_tolerance = 10.0

[flow.integrator]
dt = 1e-3
t_end = 0.2
diagnostics_stride = 50
p_max = 2
"#;

const BLOWUP: &str = r#"
[testbed]
kind = "gaussian1d"
n = 64

[[initial.terms]]
amp = 1.5
k = [1.0]

[flow]
form = "FORM"

[flow.integrator]
dt = 0.05
t_end = 2.0
cfl_guard = 1e9
diagnostics_stride = 1
"#;

fn abort_kind(dir: &Path) -> String {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    v["abort"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn soliton_run_succeeds_and_embeds_provenance() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SOLITON);
    let out = tmp.path().join("out");
    let o = srf(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let first = csv.lines().next().unwrap();
    assert!(first.starts_with("# omega-srf "), "{first}");
    assert!(first.contains("config_sha256="));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["version"], omega_srf::VERSION);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    assert!(first.ends_with(summary["config_hash"].as_str().unwrap()));
    assert!(summary["abort"].is_null());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SOLITON);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = srf(&["run", "--config", &cfg, "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for name in ["trajectory.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn seed_override_changes_the_hash() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SOLITON);
    let hash = |seed: &str, dir: &str| {
        let d = tmp.path().join(dir);
        let o = srf(&["run", "--config", &cfg, "--seed", seed, "--t-end", "0.05", "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("summary.json")).unwrap()).unwrap();
        v["config_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(hash("1", "x"), hash("2", "y"));
}

#[test]
fn malformed_toml_reports_the_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "seed = 1\n\n[testbed]\nkind = gaussian1d\n");
    let o = srf(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn repeated_polarization_entries_are_rejected_with_line() {
    let tmp = TempDir::new().unwrap();
    let text = "seed = 1\n\n[testbed]\nkind = \"torus_nd\"\ndim = 2\nn = 16\n";
    let cfg = write_config(tmp.path(), "k.toml", &format!("k_diag = [1.0, 1.0]\n{text}"));
    let o = srf(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 1") && err.contains("k_diag"), "{err}");
}

#[test]
fn testbed_dimension_mismatch_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "d.toml", "[testbed]\nkind = \"gaussian1d\"\ndim = 2\nn = 32\n");
    let o = srf(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "u.toml", "[testbed]\nkind = \"gaussian1d\"\nn = 32\nwidth = 3\n");
    let o = srf(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("width"), "{}", stderr(&o));
}

#[test]
fn bad_flag_is_a_config_error() {
    assert_eq!(srf(&["run", "--n", "many"]).status.code(), Some(2));
    assert_eq!(srf(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(srf(&["--help"]).status.code(), Some(0));
}

#[test]
fn cfl_violation_exits_with_numerical_code() {
    let tmp = TempDir::new().unwrap();
    let text = SOLITON.replace("dt = 1e-3", "dt = 0.5").replace("t_end = 0.2", "t_end = 2.0").replace("soliton_tolerance = 10.0", "");
    let cfg = write_config(tmp.path(), "c.toml", &text);
    let out = tmp.path().join("out");
    let o = srf(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("(cfl)"));
    assert_eq!(abort_kind(&out), "cfl");
}

#[test]
fn abort_kinds_are_distinguished() {
    let tmp = TempDir::new().unwrap();
    for (form, kind) in [("h", "positivity_loss"), ("a", "non_finite")] {
        let cfg = write_config(tmp.path(), &format!("{form}.toml"), &BLOWUP.replace("FORM", form));
        let out = tmp.path().join(form);
        let o = srf(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
        assert!(stderr(&o).contains(&format!("({kind})")), "{}", stderr(&o));
        assert_eq!(abort_kind(&out), kind);
    }
}

#[test]
fn soliton_tolerance_violation_is_an_acceptance_failure() {
    let tmp = TempDir::new().unwrap();
    let text = SOLITON.replace("[flow]", "[[initial.terms]]\namp = 0.1\nk = [1.0]\n\n[flow]");
    let cfg = write_config(tmp.path(), "p.toml", &text);
    let out = tmp.path().join("out");
    let o = srf(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

const SUITE: &str = r#"
[testbed]
kind = "gaussian1d"
n = 64

[suite]
levels_1d = [64, 128]
levels_2d = [32, 64]
only = ["log_derivative", "connection_variation"]
"#;

#[test]
fn verify_subset_writes_suite_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "v.toml", SUITE);
    let out = tmp.path().join("out");
    let o = srf(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let csv = fs::read_to_string(out.join("suite.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# omega-srf"));
    assert!(lines.next().unwrap().starts_with("identity_id,instance,h,dt,residual,slope,control_type"));
    assert!(csv.contains("log_derivative,"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("suite_summary.json")).unwrap()).unwrap();
    let passed = summary["passed"].as_bool().unwrap();
    assert_eq!(o.status.code(), Some(if passed { 0 } else { 4 }), "{}", stderr(&o));
}

#[test]
fn verify_with_an_impossible_budget_fails_acceptance() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "v.toml", &SUITE.replace("[suite]", "[suite]\nkappa = 1e-9"));
    let o = srf(&["verify", "--config", &cfg, "--out", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn verify_rejects_unknown_identity() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "v.toml", &SUITE.replace("\"log_derivative\"", "\"no_such_identity\""));
    let o = srf(&["verify", "--config", &cfg, "--out", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn convexity_scan_table_has_eleven_points_per_segment() {
    let tmp = TempDir::new().unwrap();
    let text = r#"
seed = 5
k_diag = [1.0, 2.0]

[testbed]
kind = "gaussian_nd"
dim = 2
n = 32

[convexity]
kind = "plus_plus"
segments = 3
"#;
    let cfg = write_config(tmp.path(), "c.toml", text);
    let out = tmp.path().join("out");
    let o = srf(&["convexity", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(out.join("convexity.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 33);
    let d2: Vec<f64> = rows.iter().filter(|r| !r[4].is_empty()).map(|r| r[4].parse().unwrap()).collect();
    assert_eq!(d2.len(), 27);
    assert!(d2.iter().all(|&v| v >= -1e-8));
}

#[test]
fn geodesic_requires_polarization() {
    let tmp = TempDir::new().unwrap();
    let text = "[testbed]\nkind = \"torus_nd\"\ndim = 2\nn = 16\n\n[geodesic]\ntimes = [0.5]\nvelocity = { terms = [] }\n";
    let cfg = write_config(tmp.path(), "g.toml", text);
    let o = srf(&["geodesic", "--config", &cfg, "--out", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("k_diag"));
}

#[test]
fn report_renders_stored_results() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SOLITON);
    let out = tmp.path().join("out");
    assert_eq!(srf(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let o = srf(&["report", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("== summary.json"));
    assert!(text.contains("== trajectory.csv"));
    assert!(text.contains("soliton_residual"));
    assert_eq!(srf(&["report", tmp.path().join("missing").to_str().unwrap()]).status.code(), Some(2));
}
