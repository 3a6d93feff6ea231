use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hcw_reach::contour::zero_contour_slice;
use hcw_reach::field::build_target_field;
use hcw_reach::sim::{run_episode, run_monte_carlo, EpisodeSummary};
use hcw_reach::solver::{solve, SolveStats};
use hcw_reach::{hjf, Axis, DisturbancePolicy, InputVec, RunConfig, StateVec, ValueFunction};
use serde::Serialize;

pub const FINAL_FIELD: &str = "value_final.hjf";
pub const STATS: &str = "solve_stats.json";
pub const TRAJECTORY: &str = "trajectory.csv";
pub const OUTCOME: &str = "outcome.json";
pub const REPORT: &str = "report.json";

fn load_config(path: &Path) -> Result<RunConfig> {
    Ok(RunConfig::load(path)?)
}

fn output_dir(out: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Checkpoint {
    t: f64,
    file: String,
}

#[derive(Serialize)]
struct StatsFile<'a> {
    #[serde(flatten)]
    stats: &'a SolveStats,
    final_field: &'a str,
    checkpoints: Vec<Checkpoint>,
}

pub fn brt_compute(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config)?;
    let dir = output_dir(out, &cfg)?;
    let phi0 = build_target_field(&cfg.grid, &cfg.target)?;
    log::info!(
        "solving {} nodes to horizon {} s",
        cfg.grid.len(),
        cfg.solve.horizon
    );
    let result = solve(&phi0, &cfg.params, &cfg.solve).context("solve failed")?;

    let mut checkpoints = Vec::with_capacity(result.checkpoints.len());
    for (i, (t, field)) in result.checkpoints.iter().enumerate() {
        let file = format!("checkpoint_{i:03}.hjf");
        hjf::save(field, dir.join(&file)).with_context(|| format!("writing {file}"))?;
        checkpoints.push(Checkpoint { t: *t, file });
    }
    hjf::save(&result.final_field, dir.join(FINAL_FIELD))?;
    write_json(
        &dir.join(STATS),
        &StatsFile {
            stats: &result.stats,
            final_field: FINAL_FIELD,
            checkpoints,
        },
    )?;
    println!(
        "{} steps of {:.6} s; wrote {} and {} checkpoints to {}",
        result.stats.steps,
        result.stats.dt,
        FINAL_FIELD,
        result.checkpoints.len(),
        dir.display()
    );
    Ok(())
}

pub fn brt_slice(field: &Path, fix: &[(Axis, f64)], out: Option<PathBuf>) -> Result<()> {
    if fix.len() != 2 {
        bail!(
            "exactly two --fix arguments are required, got {}",
            fix.len()
        );
    }
    let field = hjf::load(field).with_context(|| format!("reading {}", field.display()))?;
    let slice = zero_contour_slice(&field, fix)?;
    let mut text = format!(
        "polyline_id,{},{}\n",
        slice.free_axes[0], slice.free_axes[1]
    );
    for (id, line) in slice.polylines.iter().enumerate() {
        let closing = line.closed.then(|| line.points[0]);
        for p in line.points.iter().chain(closing.iter()) {
            text.push_str(&format!("{id},{:.16e},{:.16e}\n", p[0], p[1]));
        }
    }
    match out {
        Some(path) => {
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// `zero`, `worst_case`, `uniform_random` (seeded by `seed`) or
/// `constant:ax,ay`.
fn parse_disturbance(s: &str, seed: u64) -> Result<DisturbancePolicy> {
    Ok(match s.trim() {
        "zero" => DisturbancePolicy::Zero,
        "worst_case" => DisturbancePolicy::WorstCase,
        "uniform_random" => DisturbancePolicy::UniformRandom { seed },
        other => match other.strip_prefix("constant:") {
            Some(rest) => {
                let v: Vec<f64> = rest
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .with_context(|| format!("bad constant disturbance `{rest}`"))?;
                let [ax, ay] = v[..] else {
                    bail!("constant disturbance needs two components, got {}", v.len());
                };
                DisturbancePolicy::Constant {
                    d: InputVec::new(ax, ay),
                }
            }
            None => bail!(
                "unknown disturbance `{other}` (zero, worst_case, uniform_random, constant:ax,ay)"
            ),
        },
    })
}

fn resolve_disturbance(
    cfg: &RunConfig,
    flag: Option<&str>,
    seed: u64,
) -> Result<DisturbancePolicy> {
    match flag {
        Some(s) => parse_disturbance(s, seed),
        None => Ok(match cfg.sim.disturbance {
            DisturbancePolicy::UniformRandom { .. } => DisturbancePolicy::UniformRandom { seed },
            other => other,
        }),
    }
}

fn load_value(field: &Path, cfg: &RunConfig) -> Result<ValueFunction> {
    let field = hjf::load(field).with_context(|| format!("reading {}", field.display()))?;
    if *field.grid() != cfg.grid {
        log::warn!("field grid differs from the config grid; using the field's");
    }
    Ok(ValueFunction::new(field))
}

pub fn sim_run(
    config: &Path,
    field: &Path,
    seed: Option<u64>,
    disturbance: Option<&str>,
    initial: Option<StateVec>,
    out: Option<PathBuf>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let value = load_value(field, &cfg)?;
    let seed = seed.unwrap_or(cfg.sim.seed);
    let policy = resolve_disturbance(&cfg, disturbance, seed)?;
    let initial = initial.unwrap_or(cfg.sim.initial);
    let dir = output_dir(out, &cfg)?;

    let rec = run_episode(
        initial,
        &value,
        &cfg.controller(&value),
        policy,
        &cfg.episode_settings(),
        &cfg.params,
    )?;
    let file = fs::File::create(dir.join(TRAJECTORY)).context("creating trajectory.csv")?;
    rec.write_csv(BufWriter::new(file))?;
    let summary = EpisodeSummary {
        index: 0,
        seed,
        initial,
        outcome: rec.outcome,
        steps: rec.samples.len(),
        min_range: rec.min_range(),
        final_state: rec.final_state(),
    };
    write_json(&dir.join(OUTCOME), &summary)?;
    println!(
        "{:?} after {} steps (closest approach {:.1} m); wrote {}",
        rec.outcome,
        rec.samples.len(),
        summary.min_range,
        dir.display()
    );
    Ok(())
}

pub fn sim_sweep(
    config: &Path,
    field: &Path,
    seed: Option<u64>,
    disturbance: Option<&str>,
    n: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let value = load_value(field, &cfg)?;
    let seed = seed.unwrap_or(cfg.sim.seed);
    let policy = resolve_disturbance(&cfg, disturbance, seed)?;
    let Some(sampler) = cfg.sampler(&value) else {
        bail!("{}: sim.sampler is required for sweeps", config.display());
    };
    let n = n.unwrap_or(cfg.sim.runs);
    let path = match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            p
        }
        None => output_dir(None, &cfg)?.join(REPORT),
    };
    let report = run_monte_carlo(
        &sampler,
        n,
        seed,
        &value,
        &cfg.controller(&value),
        policy,
        &cfg.episode_settings(),
        &cfg.params,
    )?;
    write_json(&path, &report)?;
    println!(
        "{} violations in {} episodes; wrote {}",
        report.violations,
        report.runs,
        path.display()
    );
    Ok(())
}
