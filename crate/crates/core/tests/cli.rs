use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bsch::config::{emit_config, parse_config, GridConfig};
use bsch::diagnostics::read_series;
use bsch::{InitialData, RunConfig};

fn bsch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsch"))
        .args(args)
        .env("BSCH_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn small(init: InitialData) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.grid = GridConfig {
        nx: 8,
        ny: 5,
        lx: 4.0,
        ly: 2.0,
    };
    cfg.time.dt = 0.01;
    cfg.time.t_end = 0.1;
    cfg.time.snapshots = 3;
    cfg.init = init;
    cfg
}

fn write_config(dir: &Path, name: &str, cfg: &RunConfig) -> String {
    let p = dir.join(name);
    fs::write(&p, emit_config(cfg)).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn print_defaults_emits_a_parseable_default_config() {
    let o = bsch(&["validate", "--print-defaults"]);
    assert_eq!(o.status.code(), Some(0));
    let cfg = parse_config(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(cfg, RunConfig::default());
}

#[test]
fn validate_passes_on_the_default_potential() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(tmp.path(), "c.json", &RunConfig::default());
    let o = bsch(&["validate", &c]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.lines().any(|l| l.starts_with("PASS monotone bulk")));
    assert!(!text.lines().any(|l| l.starts_with("FAIL")));
}

#[test]
fn constant_state_run_has_no_dissipation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(InitialData::Constant {
        m: 0.3,
        m_surf: 0.3,
    });
    let c = write_config(tmp.path(), "c.json", &cfg);
    let out = tmp.path().join("out");
    let o = bsch(&["--out", out.to_str().unwrap(), "run", &c]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let run = out.join("run");
    let series = read_series(&fs::read_to_string(run.join("series.csv")).unwrap()).unwrap();
    assert!(series.len() > 2);
    let e0 = series[0].energy.total;
    assert!(series.iter().all(|r| (r.energy.total - e0).abs() < 1e-13));
    assert!(run.join("config.json").exists() && run.join("plots.gp").exists());
}

#[test]
fn replay_check_detects_tampered_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(RunConfig::default().init);
    let c = write_config(tmp.path(), "c.json", &cfg);
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    assert_eq!(bsch(&["--out", out_s, "run", &c]).status.code(), Some(0));
    // A relative run directory resolves against --out.
    assert_eq!(
        bsch(&["--out", out_s, "replay-check", "run"]).status.code(),
        Some(0)
    );

    let f = out.join("run/snapshots/phi_0002.field");
    let text = fs::read_to_string(&f).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut row: Vec<String> = lines[1].split_whitespace().map(str::to_string).collect();
    let first: f64 = row[0].parse().unwrap();
    row[0] = format!("{:.16e}", first + 1e-3);
    lines[1] = row.join(" ");
    fs::write(&f, lines.join("\n") + "\n").unwrap();
    let o = bsch(&["--out", out_s, "replay-check", "run"]);
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
}

#[test]
fn sweep_writes_members_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(RunConfig::default().init);
    cfg.sweep = Some(bsch::config::SweepConfig {
        param: bsch::SweepParam::RobinK,
        values: vec![1.0, 0.5, 0.0],
    });
    let c = write_config(tmp.path(), "c.json", &cfg);
    let out = tmp.path().join("out");
    let o = bsch(&["--out", out.to_str().unwrap(), "sweep", &c]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let sweep = out.join("sweep");
    assert!(sweep.join("summary.csv").exists());
    assert_eq!(
        fs::read_to_string(sweep.join("summary.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
    assert!(sweep.join("K=0.0").join("series.csv").exists());
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(bsch(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bsch(&["validate"]).status.code(), Some(2));
    assert_eq!(
        bsch(&["run", "/nonexistent/config.json"]).status.code(),
        Some(2)
    );
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"grid": {"nx": 2}, "model": {"K": -1}}"#).unwrap();
    let o = bsch(&["run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("grid.nx") && err.contains("model.K"), "{err}");
    let out = tmp.path().join("out");
    assert_eq!(
        bsch(&["--out", out.to_str().unwrap(), "replay-check", "missing"])
            .status
            .code(),
        Some(2)
    );
}
