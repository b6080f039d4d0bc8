//! End-to-end tests of the `nocsim` binary: exit codes, files written,
//! overrides, and the trace round trip.

use std::path::Path;
use std::process::Command;

use nocsim::config::SimConfig;
use nocsim::traffic::save_trace;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nocsim"))
}

const SMALL_ADAPTIVE: &str = r#"
mode = "adaptive"
seed = 5

[mesh]
width = 4
height = 4

[controller]
initial_window = 300

[traffic]
pattern = "uniform"
duration = 2000
injection_rate = 0.05
"#;

fn write_cfg(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("sim.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_all_three_report_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), SMALL_ADAPTIVE);
    let out = tmp.path().join("out");
    let res = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let run = read_json(&out.join("run.json"));
    assert_eq!(run["mode"], "adaptive");
    assert_eq!(run["seed"], 5);
    assert_eq!(run["completed"], true);
    assert!(run["totals"]["delivered_packets"].as_u64().unwrap() > 0);

    let windows = std::fs::read_to_string(out.join("windows.csv")).unwrap();
    assert!(windows.starts_with("window_index,start_cycle,end_cycle,"));
    assert!(windows.lines().count() > 1);
    let progression = std::fs::read_to_string(out.join("progression.csv")).unwrap();
    assert!(progression.starts_with("boundary_cycle,old_window,new_window,"));
    assert!(progression.lines().count() > 1, "adaptive run should hit boundaries");

    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("delivered"), "summary missing: {stdout}");
}

#[test]
fn run_honors_mode_and_seed_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), SMALL_ADAPTIVE);
    let out = tmp.path().join("out");
    let res = bin()
        .args(["run", "--mode", "baseline", "--seed", "99", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let run = read_json(&out.join("run.json"));
    assert_eq!(run["mode"], "baseline");
    assert_eq!(run["seed"], 99);
    // baseline has no reconfiguration boundaries, so only the header remains
    let progression = std::fs::read_to_string(out.join("progression.csv")).unwrap();
    assert_eq!(progression.lines().count(), 1);
}

#[test]
fn compare_writes_table_and_per_mode_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), SMALL_ADAPTIVE);
    let out = tmp.path().join("cmp");
    let res =
        bin().args(["compare", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let csv = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4, "header plus one row per mode:\n{csv}");
    let json = read_json(&out.join("compare.json"));
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
    for mode in ["baseline", "static", "adaptive"] {
        let run = read_json(&out.join(mode).join("run.json"));
        assert_eq!(run["mode"], mode);
    }
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("baseline") && stdout.contains("adaptive"));
}

#[test]
fn gen_trace_then_run_from_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), SMALL_ADAPTIVE);
    let trace = tmp.path().join("t.trace");
    let res =
        bin().args(["gen-trace", "--config"]).arg(&cfg).arg("--out").arg(&trace).output().unwrap();
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let body = std::fs::read_to_string(&trace).unwrap();
    assert!(body.starts_with("# cycle src dst size_bytes"));
    assert!(String::from_utf8_lossy(&res.stdout).contains("ChaCha12"));

    let out = tmp.path().join("out");
    let res = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--trace")
        .arg(&trace)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let run = read_json(&out.join("run.json"));
    assert_eq!(
        run["injected_packets"].as_u64().unwrap(),
        body.lines().count() as u64 - 1,
        "every trace record should inject exactly once"
    );
}

#[test]
fn missing_config_exits_nonzero_with_error_line() {
    let res = bin().args(["run", "--config", "/nonexistent/sim.toml"]).output().unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "mode = \"baseline\"\nnot_a_key = 3\n");
    let res = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("not_a_key"));
}

#[test]
fn gen_trace_refuses_trace_kind_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "mode = \"baseline\"\n[traffic]\nkind = \"trace\"\npath = \"x.trace\"\n",
    );
    let res = bin()
        .args(["gen-trace", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("t.trace"))
        .output()
        .unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
}

/// The committed fixture pins the synthetic generator: the same TOML must
/// reproduce it byte for byte on every toolchain and platform. A failure
/// here means the traffic stream (and thus every seeded result) has drifted.
#[test]
fn golden_trace_fixture_is_reproduced_byte_for_byte() {
    const FIXTURE_CFG: &str = r#"
mode = "baseline"
seed = 42

[mesh]
width = 4
height = 4

[traffic]
pattern = "uniform"
duration = 300
injection_rate = 0.1
"#;
    let cfg = SimConfig::from_toml_str(FIXTURE_CFG).unwrap();
    let records = cfg.load_records().unwrap();
    let mut got = Vec::new();
    save_trace(&mut got, &records).unwrap();
    let expected = include_str!("fixtures/uniform_4x4_seed42.trace");
    assert_eq!(
        String::from_utf8(got).unwrap(),
        expected,
        "synthetic traffic no longer matches the committed golden trace"
    );
}
