//! TOML run configuration shared by the CLI and the shipped scenarios.
//!
//! Every section is optional and falls back to the documented defaults; a
//! minimal file only needs to exist. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{OrbitGameParams, StateVec};
use crate::error::{Error, Result};
use crate::field::{GridSpec, TargetSetSpec};
use crate::sim::{Controller, DisturbancePolicy, EpisodeSettings, InitialSampler};
use crate::solver::SolveConfig;
use crate::supervisor::{
    default_recovery_target, EscapeOffsets, GainTable, GuardConfig, SupervisorConfig,
};
use crate::value::ValueFunction;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: OrbitGameParams,
    pub grid: GridSpec,
    pub target: TargetSetSpec,
    pub solve: SolveConfig,
    pub supervisor: SupervisorSection,
    pub sim: SimSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for TargetSetSpec {
    /// The keep-out disc of radius `d_fcc` at the default parameters.
    fn default() -> Self {
        TargetSetSpec::Disc {
            radius: OrbitGameParams::default().d_fcc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupervisorSection {
    /// Defaults to two cell variations of the loaded value function.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guard_band: Option<f64>,
    /// Defaults to twice the guard band.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub safe_margin: Option<f64>,
    pub recovery_target: TargetSetSpec,
    pub eps_vx: f64,
    pub eps_vy: f64,
    /// Station-keeping setpoint before any escape.
    pub nominal_target: StateVec,
    pub lookahead: f64,
    pub preview_dt: f64,
    pub gains: GainTable,
    pub escape: EscapeOffsets,
}

impl Default for SupervisorSection {
    fn default() -> Self {
        Self {
            guard_band: None,
            safe_margin: None,
            recovery_target: default_recovery_target(),
            eps_vx: 0.01,
            eps_vy: 0.01,
            nominal_target: StateVec::new(1000.0, 0.0, 0.0, 0.0),
            lookahead: 60.0,
            preview_dt: 1.0,
            gains: GainTable::default(),
            escape: EscapeOffsets::default(),
        }
    }
}

impl SupervisorSection {
    /// Concrete supervisor settings, filling guard defaults from `value`.
    pub fn resolve(&self, value: &ValueFunction) -> SupervisorConfig {
        let auto = GuardConfig::from_value(value, self.recovery_target);
        let guard_band = self.guard_band.unwrap_or(auto.guard_band);
        let safe_margin = self.safe_margin.unwrap_or(2.0 * guard_band);
        SupervisorConfig {
            guards: GuardConfig {
                guard_band,
                safe_margin,
                recovery_target: self.recovery_target,
                eps_vx: self.eps_vx,
                eps_vy: self.eps_vy,
            },
            gains: self.gains,
            offsets: self.escape,
            lookahead: self.lookahead,
            preview_dt: self.preview_dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    #[default]
    Supervisor,
    OptimalAvoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    /// Defaults to twice the solve horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    pub initial: StateVec,
    pub disturbance: DisturbancePolicy,
    pub controller: ControllerKind,
    pub seed: u64,
    pub runs: usize,
    /// Initial-state distribution for sweeps; see [`RunConfig::sampler`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<InitialSampler>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 1.0,
            duration: None,
            initial: StateVec::new(1000.0, 0.0, 0.0, 0.0),
            disturbance: DisturbancePolicy::Zero,
            controller: ControllerKind::Supervisor,
            seed: 0,
            runs: 100,
            sampler: None,
        }
    }
}

fn at(path: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Invalid { name, reason } => Error::config(path, format!("{name}: {reason}")),
        other => Error::config(path, other.to_string()),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let span = e
                .span()
                .map(|s| format!(" (bytes {}..{})", s.start, s.end))
                .unwrap_or_default();
            Error::config("toml", format!("{}{span}", e.message()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config { path: key, reason } => {
                Error::config(format!("{}: {key}", path.display()), reason)
            }
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate().map_err(at("params"))?;
        self.grid.validate().map_err(at("grid"))?;
        self.target.validate().map_err(at("target"))?;
        self.solve.validate().map_err(at("solve"))?;

        let sup = &self.supervisor;
        if let Some(g) = sup.guard_band {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::config(
                    "supervisor.guard_band",
                    "must be finite and >= 0",
                ));
            }
        }
        if let (Some(g), Some(m)) = (sup.guard_band, sup.safe_margin) {
            if !(m > g) {
                return Err(Error::config(
                    "supervisor.safe_margin",
                    "must exceed guard_band",
                ));
            }
        }
        if !sup.nominal_target.is_finite() {
            return Err(Error::config("supervisor.nominal_target", "must be finite"));
        }
        // Guards are checked with placeholder bands; the real ones depend on
        // the value function.
        let probe = SupervisorConfig {
            guards: GuardConfig {
                guard_band: sup.guard_band.unwrap_or(0.0),
                safe_margin: sup.safe_margin.unwrap_or(f64::MAX),
                recovery_target: sup.recovery_target,
                eps_vx: sup.eps_vx,
                eps_vy: sup.eps_vy,
            },
            gains: sup.gains,
            offsets: sup.escape,
            lookahead: sup.lookahead,
            preview_dt: sup.preview_dt,
        };
        probe.validate().map_err(at("supervisor"))?;

        let sim = &self.sim;
        if !(sim.dt.is_finite() && sim.dt > 0.0) {
            return Err(Error::config("sim.dt", "must be positive"));
        }
        if let Some(d) = sim.duration {
            if !(d.is_finite() && d >= sim.dt) {
                return Err(Error::config("sim.duration", "must be at least sim.dt"));
            }
        } else if self.solve.horizon < sim.dt / 2.0 {
            return Err(Error::config(
                "sim.duration",
                "required when solve.horizon is zero",
            ));
        }
        if !sim.initial.is_finite() {
            return Err(Error::config("sim.initial", "must be finite"));
        }
        if sim.runs == 0 {
            return Err(Error::config("sim.runs", "must be >= 1"));
        }
        if let Some(s) = &sim.sampler {
            s.validate().map_err(at("sim.sampler"))?;
        }
        Ok(())
    }

    pub fn episode_settings(&self) -> EpisodeSettings {
        EpisodeSettings {
            dt: self.sim.dt,
            duration: self.sim.duration.unwrap_or(2.0 * self.solve.horizon),
            nominal_target: self.supervisor.nominal_target,
        }
    }

    /// The configured sampler; with neither φ bound given it draws from
    /// `{φ > safe_margin}`, the hypothesis region of the safety guarantee.
    pub fn sampler(&self, value: &ValueFunction) -> Option<InitialSampler> {
        let mut s = self.sim.sampler?;
        if s.min_phi.is_none() && s.max_phi.is_none() {
            s.min_phi = Some(self.supervisor.resolve(value).guards.safe_margin);
        }
        Some(s)
    }

    pub fn controller(&self, value: &ValueFunction) -> Controller {
        match self.sim.controller {
            ControllerKind::Supervisor => Controller::Supervisor(self.supervisor.resolve(value)),
            ControllerKind::OptimalAvoid => Controller::OptimalAvoid,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::DisturbancePolicy;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.grid.counts(), [31; 4]);
        assert_eq!(cfg.target, TargetSetSpec::Disc { radius: 200.0 });
        assert_eq!(cfg.episode_settings().duration, 600.0);
    }

    #[test]
    fn full_round_trip() {
        let text = r#"
output_dir = "runs/a"

[params]
omega = 0.0011
u_max = 0.1
d_max = 0.05
d_fcc = 200.0
convention = "avoid"

[grid]
x = { min = -1000.0, max = 1000.0, count = 21 }
y = { min = -500.0, max = 500.0, count = 11 }
vx = { min = -2.0, max = 2.0, count = 9 }
vy = { min = -2.0, max = 2.0, count = 9 }

[target]
kind = "disc"
radius = 200.0

[solve]
horizon = 120.0
mode = "set"

[supervisor]
guard_band = 40.0
nominal_target = [900.0, 10.0, 0.0, 0.0]

[supervisor.recovery_target]
kind = "box"
x = [950.0, 1050.0]
y = [-25.0, 25.0]

[sim]
dt = 0.5
duration = 100.0
initial = [800.0, 0.0, -1.0, 0.0]
disturbance = { kind = "uniform_random", seed = 4 }
controller = "optimal_avoid"
runs = 7

[sim.sampler]
x = [300.0, 1500.0]
y = [-700.0, 700.0]
vx = [-2.0, 2.0]
vy = [-2.0, 2.0]
min_phi = 0.0
"#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.grid.counts(), [21, 11, 9, 9]);
        assert_eq!(
            cfg.sim.disturbance,
            DisturbancePolicy::UniformRandom { seed: 4 }
        );
        assert_eq!(cfg.sim.controller, ControllerKind::OptimalAvoid);
        assert_eq!(
            cfg.supervisor.nominal_target,
            StateVec::new(900.0, 10.0, 0.0, 0.0)
        );
        assert_eq!(cfg.sim.sampler.unwrap().max_attempts, 100_000);
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("[params]\nu_max = -1.0", "params"),
            ("[grid]\nx = { min = 1.0, max = 0.0, count = 5 }", "grid"),
            ("[target]\nkind = \"disc\"\nradius = -3.0", "target"),
            ("[solve]\ncfl = 0.0", "solve"),
            ("[sim]\ndt = 0.0", "sim.dt"),
            ("[sim]\nruns = 0", "sim.runs"),
            (
                "[supervisor]\nguard_band = 5.0\nsafe_margin = 2.0",
                "supervisor.safe_margin",
            ),
            (
                "[supervisor.recovery_target]\nkind = \"disc\"\nradius = 5.0",
                "supervisor",
            ),
        ];
        for (text, key) in cases {
            match RunConfig::from_toml_str(text) {
                Err(Error::Config { path, .. }) => assert_eq!(path, key, "{text}"),
                other => panic!("{text}: expected config error, got {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_keys_and_bad_syntax_rejected() {
        assert!(matches!(
            RunConfig::from_toml_str("bogus = 1"),
            Err(Error::Config { .. })
        ));
        assert!(matches!(
            RunConfig::from_toml_str("[sim]\nspeed = 1"),
            Err(Error::Config { .. })
        ));
        assert!(matches!(
            RunConfig::from_toml_str("[sim"),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn load_prefixes_file_name() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.toml");
        std::fs::write(&p, "[sim]\nruns = 0").unwrap();
        match RunConfig::load(&p) {
            Err(Error::Config { path, .. }) => {
                assert!(path.ends_with("bad.toml: sim.runs"), "{path}")
            }
            other => panic!("{other:?}"),
        }
    }
}
