use std::path::Path;
use std::process::{Command, Output};

use collusion_cli::presets::{baseline_game, baseline_sim};
use collusion_cli::{ExperimentConfig, SweepAxis};
use collusion_core::games::make_prisoners_dilemma;
use collusion_core::stability::StabilityConfig;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collusion")).args(args).output().expect("binary runs")
}

fn small_config(sessions: usize) -> ExperimentConfig {
    let mut sim = baseline_sim(baseline_game(), true);
    sim.sessions = sessions;
    sim.horizon = collusion_core::engine::Horizon::Decay { max_periods: 1_000_000 };
    ExperimentConfig { sim, sweep: Vec::new(), threads: None, preset: None, scaled: true }
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn path(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(3);
    cfg.sim.trace_stride = Some(10_000);
    let config = write_json(dir.path(), "c.json", &cfg);
    let out = dir.path().join("out");
    let res = bin(&["simulate", "--config", &config, "--out", &path(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["summary.json", "sessions.csv", "trace_0.csv", "q_final_2.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let banner = cfg.csv_banner();
    for f in ["sessions.csv", "trace_0.csv", "q_final_0.csv"] {
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        assert_eq!(text.lines().next(), Some(banner.as_str()));
    }
    let sessions = std::fs::read_to_string(out.join("sessions.csv")).unwrap();
    assert_eq!(sessions.lines().count(), 2 + 3);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config_hash"], cfg.hash());
    assert_eq!(summary["master_seed"], cfg.sim.master_seed);
    // the echoed config reproduces the run
    let echoed: ExperimentConfig = serde_json::from_value(summary["config"].clone()).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn seed_flag_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_json(dir.path(), "c.json", &small_config(4));
    let read = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["simulate", "--config", &config, "--out"];
        let o = path(&out);
        args.push(&o);
        args.extend_from_slice(extra);
        assert!(bin(&args).status.success());
        std::fs::read(out.join("sessions.csv")).unwrap()
    };
    let a = read("a", &["--threads", "1"]);
    let b = read("b", &["--threads", "3"]);
    let c = read("c", &["--seed", "5"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(String::from_utf8_lossy(&c).starts_with("# config_hash="));
    assert!(String::from_utf8_lossy(&c).lines().next().unwrap().contains("master_seed=5"));
}

#[test]
fn malformed_json_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\n  \"game\": ,\n}").unwrap();
    let res = bin(&["simulate", "--config", &path(&p), "--out", &path(&dir.path().join("o"))]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn sweep_rows_are_complete() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(2);
    cfg.sweep = vec![
        SweepAxis { param: "delta".into(), values: vec![0.0, 0.9] },
        SweepAxis { param: "alpha".into(), values: vec![0.1, 0.2, 0.3] },
    ];
    let config = write_json(dir.path(), "s.json", &cfg);
    let out = dir.path().join("o");
    let res = bin(&["sweep", "--config", &config, "--out", &path(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[1].starts_with("delta,alpha,mean_price,ci,std_error,share_converged"));
    assert_eq!(lines.len(), 2 + 6);
    assert!(lines[2].starts_with("0,0.1,"));
}

#[test]
fn empty_sweep_behaves_as_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_json(dir.path(), "s.json", &small_config(2));
    let out = dir.path().join("o");
    assert!(bin(&["sweep", "--config", &config, "--out", &path(&out)]).status.success());
    assert!(out.join("sessions.csv").exists());
}

#[test]
fn too_many_axes_exceed_the_budget() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(2);
    for p in ["delta", "alpha", "beta"] {
        cfg.sweep.push(SweepAxis { param: p.into(), values: vec![0.1] });
    }
    let config = write_json(dir.path(), "s.json", &cfg);
    assert_eq!(bin(&["sweep", "--config", &config, "--out", &path(dir.path())]).status.code(), Some(3));
}

#[test]
fn unknown_axis_and_preset_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(2);
    cfg.sweep.push(SweepAxis { param: "gamma".into(), values: vec![0.1] });
    let config = write_json(dir.path(), "s.json", &cfg);
    assert_eq!(bin(&["sweep", "--config", &config, "--out", &path(dir.path())]).status.code(), Some(2));
    assert_eq!(bin(&["replicate", "--preset", "fig99", "--out", &path(dir.path())]).status.code(), Some(2));
}

#[test]
fn stability_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir.path().join("o"));
    let pd = make_prisoners_dilemma(0.0, 1.0, 2.0, 3.0).unwrap();

    let ok = write_json(dir.path(), "ok.json", &StabilityConfig::new("pd", pd.clone(), 0.0, 0.25));
    let res = bin(&["stability", "--config", &ok, "--out", &out, "--dot"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/stability.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert!(report["arborescence_costs"].as_object().is_some_and(|m| !m.is_empty()));
    assert!(dir.path().join("o/cost_digraph.dot").exists());

    let misaligned = write_json(dir.path(), "bad.json", &StabilityConfig::new("pd", pd.clone(), 0.0, 0.3));
    assert_eq!(bin(&["stability", "--config", &misaligned, "--out", &out]).status.code(), Some(2));

    let mut big = StabilityConfig::new("pd", pd, 0.0, 0.25);
    big.max_states = 100;
    let big = write_json(dir.path(), "big.json", &big);
    assert_eq!(bin(&["stability", "--config", &big, "--out", &out]).status.code(), Some(3));
}

#[test]
fn nu_helper() {
    let res = bin(&["nu", "--k", "10", "--beta", "1e-4"]);
    let v: f64 = String::from_utf8_lossy(&res.stdout).trim().parse().unwrap();
    assert!((v - 1000.05).abs() < 0.01);
}
