//! End-to-end runs of the `hcw-reach` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use hcw_reach::field::build_target_field;
use hcw_reach::sim::{derive_episode_seed, EpisodeSummary, MonteCarloReport};
use hcw_reach::{hjf, Outcome, RunConfig, StateVec};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hcw-reach"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"
[grid]
x = { min = -1500.0, max = 1500.0, count = 13 }
y = { min = -750.0, max = 750.0, count = 13 }
vx = { min = -4.0, max = 4.0, count = 9 }
vy = { min = -4.0, max = 4.0, count = 9 }

[target]
kind = "disc"
radius = 200.0

[solve]
horizon = 60.0
save_every = 20.0

[sim]
duration = 120.0
disturbance = { kind = "uniform_random", seed = 3 }
initial = [900.0, 30.0, -0.5, 0.1]
runs = 5

[sim.sampler]
x = [0.0, 1500.0]
y = [-750.0, 750.0]
vx = [-1.0, 1.0]
vy = [-1.0, 1.0]
"#;

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path
}

#[test]
fn compute_writes_fields_and_stats_deterministically() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["brt", "compute", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["brt", "compute", "--config", s(&cfg), "--out", s(&b)]);
    for name in [
        "value_final.hjf",
        "solve_stats.json",
        "checkpoint_000.hjf",
        "checkpoint_003.hjf",
    ] {
        let (x, y) = (
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
        );
        assert_eq!(x, y, "{name}");
    }
    let stats: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("solve_stats.json")).unwrap()).unwrap();
    assert!(stats["steps"].as_u64().unwrap() > 0);
    assert_eq!(stats["alpha"].as_array().unwrap().len(), 4);
    assert_eq!(stats["checkpoints"][0]["t"].as_f64().unwrap(), 0.0);
    assert_eq!(stats["checkpoints"].as_array().unwrap().len(), 4);
    hjf::load(a.join("value_final.hjf")).unwrap();
}

#[test]
fn zero_horizon_writes_the_target() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), "");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("horizon = 60.0", "horizon = 0.0");
    std::fs::write(&cfg, text).unwrap();
    ok(&[
        "brt",
        "compute",
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
    ]);
    let loaded = RunConfig::load(&cfg).unwrap();
    let phi0 = build_target_field(&loaded.grid, &loaded.target).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("value_final.hjf")).unwrap(),
        hjf::to_bytes(&phi0)
    );
}

#[test]
fn slice_of_target_is_the_disc() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("t.toml");
    std::fs::write(&cfg, "[solve]\nhorizon = 0.0\n[sim]\nduration = 10.0\n").unwrap();
    ok(&[
        "brt",
        "compute",
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
    ]);
    let field = dir.path().join("value_final.hjf");
    let out = ok(&[
        "brt",
        "slice",
        "--field",
        s(&field),
        "--fix",
        "vx=0",
        "--fix",
        "vy=0",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("polyline_id,x,y"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert!(rows.len() > 8);
    assert!(rows.iter().all(|r| r[0] == 0.0));
    let cell = 100f64.hypot(50.0);
    assert!(rows
        .iter()
        .all(|r| (r[1].hypot(r[2]) - 200.0).abs() <= cell));
    // Closed polylines repeat their first point.
    assert_eq!(rows.first(), rows.last());

    let csv = dir.path().join("slice.csv");
    ok(&[
        "brt",
        "slice",
        "--field",
        s(&field),
        "--fix",
        "x=0",
        "--fix",
        "y=0",
        "--out",
        s(&csv),
    ]);
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap().lines().next(),
        Some("polyline_id,vx,vy")
    );
}

#[test]
fn uniform_slice_has_header_only() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("t.toml");
    std::fs::write(&cfg, "[solve]\nhorizon = 0.0\n[sim]\nduration = 10.0\n").unwrap();
    ok(&[
        "brt",
        "compute",
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
    ]);
    let field = dir.path().join("value_final.hjf");
    // At 5 m/s all velocities sit outside the disc only in position; slice
    // far from the origin instead.
    let out = ok(&[
        "brt",
        "slice",
        "--field",
        s(&field),
        "--fix",
        "x=1500",
        "--fix",
        "y=750",
    ]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "polyline_id,vx,vy\n"
    );
}

#[test]
fn usage_and_input_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("t.toml");
    std::fs::write(&cfg, "[solve]\nhorizon = 0.0\n[sim]\nduration = 10.0\n").unwrap();
    ok(&[
        "brt",
        "compute",
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
    ]);
    let field = dir.path().join("value_final.hjf");

    let three = run(&[
        "brt",
        "slice",
        "--field",
        s(&field),
        "--fix",
        "vx=0",
        "--fix",
        "vy=0",
        "--fix",
        "x=0",
    ]);
    assert_eq!(three.status.code(), Some(1));
    let one = run(&["brt", "slice", "--field", s(&field), "--fix", "vx=0"]);
    assert_eq!(one.status.code(), Some(1));

    let bad = dir.path().join("bad.hjf");
    let mut bytes = std::fs::read(&field).unwrap();
    bytes[0] = b'X';
    std::fs::write(&bad, &bytes).unwrap();
    let r = run(&[
        "brt",
        "slice",
        "--field",
        s(&bad),
        "--fix",
        "vx=0",
        "--fix",
        "vy=0",
    ]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("magic"));

    let broken = dir.path().join("broken.toml");
    std::fs::write(&broken, "[sim]\ndt = -1.0\n").unwrap();
    let r = run(&["brt", "compute", "--config", s(&broken)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("sim.dt"));

    assert_eq!(run(&["brt", "frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn sim_run_and_sweep_agree_and_repeat() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), "");
    ok(&[
        "brt",
        "compute",
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
    ]);
    let field = dir.path().join("value_final.hjf");

    let (a, b) = (dir.path().join("run_a"), dir.path().join("run_b"));
    for out in [&a, &b] {
        ok(&[
            "sim",
            "run",
            "--config",
            s(&cfg),
            "--field",
            s(&field),
            "--seed",
            "17",
            "--out",
            s(out),
        ]);
    }
    let csv = std::fs::read(a.join("trajectory.csv")).unwrap();
    assert_eq!(csv, std::fs::read(b.join("trajectory.csv")).unwrap());
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,x,y,vx,vy,mode,ux,uy,dx,dy,phi\n"));
    assert_eq!(text.lines().count(), 1 + 121);

    let report_path = dir.path().join("sweep/report.json");
    ok(&[
        "sim",
        "sweep",
        "--config",
        s(&cfg),
        "--field",
        s(&field),
        "--n",
        "1",
        "--seed",
        "42",
        "--disturbance",
        "worst_case",
        "--out",
        s(&report_path),
    ]);
    let text = std::fs::read_to_string(&report_path).unwrap();
    let report: MonteCarloReport = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", text);
    assert_eq!(report.runs, 1);
    let ep = &report.outcomes[0];
    assert_eq!(ep.seed, derive_episode_seed(42, 0));

    let init = ep.initial.to_array().map(|v| format!("{v:e}")).join(",");
    let single = dir.path().join("single");
    ok(&[
        "sim",
        "run",
        "--config",
        s(&cfg),
        "--field",
        s(&field),
        "--seed",
        &ep.seed.to_string(),
        "--disturbance",
        "worst_case",
        "--initial",
        &init,
        "--out",
        s(&single),
    ]);
    let summary: EpisodeSummary =
        serde_json::from_slice(&std::fs::read(single.join("outcome.json")).unwrap()).unwrap();
    assert_eq!(summary.initial, ep.initial);
    assert_eq!(summary.final_state, ep.final_state);
    assert_eq!(summary.outcome, ep.outcome);
    assert_eq!(summary.steps, ep.steps);
}

/// The shipped 31^4, 300 s tube, computed once per test binary.
fn shipped_tube() -> &'static (TempDir, PathBuf) {
    static TUBE: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    TUBE.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        ok(&[
            "brt",
            "compute",
            "--config",
            s(&shipped("recovery_1000m.toml")),
            "--out",
            s(dir.path()),
        ]);
        let field = dir.path().join("value_final.hjf");
        (dir, field)
    })
}

#[test]
fn shipped_recovery_scenario_recovers() {
    let (dir, field) = shipped_tube();
    let out = dir.path().join("recovery");
    ok(&[
        "sim",
        "run",
        "--config",
        s(&shipped("recovery_1000m.toml")),
        "--field",
        s(field),
        "--out",
        s(&out),
    ]);
    let summary: EpisodeSummary =
        serde_json::from_slice(&std::fs::read(out.join("outcome.json")).unwrap()).unwrap();
    assert_eq!(summary.outcome, Outcome::Safe);
    let StateVec { x, y, vx, vy } = summary.final_state;
    assert!(
        (950.0..=1050.0).contains(&x) && y.abs() <= 25.0 && vx.abs() <= 0.01 && vy.abs() <= 0.01
    );
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut modes: Vec<&str> = Vec::new();
    for line in csv.lines().skip(1) {
        let m = line.split(',').nth(5).unwrap();
        if modes.last() != Some(&m) {
            modes.push(m);
        }
    }
    assert_eq!(modes, ["nominal", "evasive", "return", "nominal"]);
}

#[test]
fn worst_case_from_inside_the_tube_collides() {
    let (dir, field) = shipped_tube();
    let value = hjf::load(field).unwrap();
    // Deepest tube node well clear of the disc itself.
    let grid = *value.grid();
    let (idx, phi) = value
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| grid.node_at(*i).range() >= 250.0)
        .fold(
            (0, f64::INFINITY),
            |best, (i, v)| if *v < best.1 { (i, *v) } else { best },
        );
    assert!(phi < 0.0);
    let init = grid
        .node_at(idx)
        .to_array()
        .map(|v| format!("{v:e}"))
        .join(",");
    let out = dir.path().join("inside");
    ok(&[
        "sim",
        "run",
        "--config",
        s(&shipped("recovery_1000m.toml")),
        "--field",
        s(field),
        "--disturbance",
        "worst_case",
        "--initial",
        &init,
        "--out",
        s(&out),
    ]);
    let summary: EpisodeSummary =
        serde_json::from_slice(&std::fs::read(out.join("outcome.json")).unwrap()).unwrap();
    assert_eq!(
        summary.outcome,
        Outcome::CollisionZoneEntered,
        "from {init} (phi {phi})"
    );
}
