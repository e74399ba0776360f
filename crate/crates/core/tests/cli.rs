use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hrc_core::output::emit_plot_script;

fn hrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrc")).args(args).output().expect("binary runs")
}

fn benchmark() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/benchmark.toml")
}

/// The benchmark scenario shortened to two seconds.
fn short_config(dir: &Path) -> PathBuf {
    let text = fs::read_to_string(benchmark()).unwrap().replace("tf = 10.0", "tf = 2.0");
    let path = dir.join("short.toml");
    fs::write(&path, text).unwrap();
    path
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_every_series_with_fixed_headers() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path());
    let out = dir.path().join("out");
    let res = hrc(&["run", "--config", s(&config), "--out", s(&out), "--emit-plots"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(header(&out.join("phase1_state.csv")), "t,ximp1,ximp2,xdimp1,xdimp2,fh1,fh2,u1,u2");
    assert_eq!(header(&out.join("reference.csv")), "t,qd1,qd2,qdd1,qdd2");
    assert_eq!(header(&out.join("tracking.csv")), "t,q1,q2,qd1,qd2,e1,e2,ec1,ec2,tau1,tau2,kR");
    assert_eq!(header(&out.join("metrics.csv")), "key,value");
    let rows = fs::read_to_string(out.join("tracking.csv")).unwrap().lines().count();
    assert_eq!(rows, 2001 + 1);
    for fig in 1..=6 {
        let found = fs::read_dir(&out)
            .unwrap()
            .filter_map(|e| e.ok())
            .any(|e| e.file_name().to_string_lossy().starts_with(&format!("fig{fig}_")));
        assert!(found, "missing script for figure {fig}");
    }
    assert!(out.join("config.toml").exists());
}

#[test]
fn optimize_then_track_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path());
    let full = dir.path().join("full");
    let p1 = dir.path().join("p1");
    let p2 = dir.path().join("p2");
    assert!(hrc(&["run", "--config", s(&config), "--out", s(&full)]).status.success());
    assert!(hrc(&["optimize", "--config", s(&config), "--out", s(&p1)]).status.success());
    assert_eq!(
        fs::read(full.join("phase1_state.csv")).unwrap(),
        fs::read(p1.join("phase1_state.csv")).unwrap()
    );
    let res = hrc(&[
        "track",
        "--config",
        s(&config),
        "--reference",
        s(&full.join("reference.csv")),
        "--phase1",
        s(&p1.join("phase1_state.csv")),
        "--out",
        s(&p2),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(
        fs::read(full.join("tracking.csv")).unwrap(),
        fs::read(p2.join("tracking.csv")).unwrap()
    );
}

#[test]
fn missing_cost_weight_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(benchmark()).unwrap().replace("R = [[1.0, 0.0], [0.0, 1.0]]", "");
    let config = dir.path().join("bad.toml");
    fs::write(&config, text).unwrap();
    let res = hrc(&["run", "--config", s(&config), "--out", s(&dir.path().join("o"))]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("cost.R"));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(benchmark()).unwrap().replace("sigma = 0.1", "sigmaa = 0.1");
    let config = dir.path().join("typo.toml");
    fs::write(&config, text).unwrap();
    let res = hrc(&["optimize", "--config", s(&config), "--out", s(&dir.path().join("o"))]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("sigmaa"));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = hrc(&["run", "--config", s(&dir.path().join("absent.toml")), "--out", s(dir.path())]);
    assert_eq!(res.status.code(), Some(5));
}

#[test]
fn unreachable_target_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(short_config(dir.path()))
        .unwrap()
        .replace("xf = [0.8, -0.6,", "xf = [2.5, -0.6,");
    let config = dir.path().join("far.toml");
    fs::write(&config, text).unwrap();
    let res = hrc(&["run", "--config", s(&config), "--out", s(&dir.path().join("o"))]);
    assert_eq!(res.status.code(), Some(4), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn verify_reports_each_check() {
    let res = hrc(&["verify", "--suite", "controller", "--cases", "50"]);
    assert!(res.status.success());
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.lines().count() >= 2);
    assert!(text.lines().all(|l| l.starts_with("[PASS] controller/")));
}

#[test]
fn oracle_subcommand_compares_costs() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("di.toml");
    fs::write(
        &problem,
        "A = [[0.0, 1.0], [0.0, 0.0]]\nB = [[0.0], [1.0]]\nQ = [[0.0, 0.0], [0.0, 0.0]]\nR = [[1.0]]\n\
         t0 = 0.0\ntf = 1.0\nx0 = [0.0, 0.0]\nxf = [1.0, 0.0]\n",
    )
    .unwrap();
    let res = hrc(&["oracle", "--problem", s(&problem)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8_lossy(&res.stdout);
    let cost: f64 = text
        .lines()
        .find(|l| l.starts_with("transcription cost"))
        .and_then(|l| l.split_whitespace().last())
        .unwrap()
        .parse()
        .unwrap();
    assert!((cost - 6.0).abs() <= 0.06);
}

#[test]
fn figure_seven_does_not_exist() {
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_plot_script(dir.path(), 7).is_err());
    assert!(emit_plot_script(dir.path(), 0).is_err());
    let script = emit_plot_script(dir.path(), 6).unwrap();
    let text = fs::read_to_string(script).unwrap();
    assert!(text.contains("ec1") && text.contains("ec2"));
}
