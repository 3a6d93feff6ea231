//! Closed-loop episodes of the supervised satellite against a disturbance
//! policy, and reproducible Monte Carlo batches of them.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{optimal_inputs, rk4_step, InputVec, OrbitGameParams, StateVec};
use crate::error::{Error, Result};
use crate::supervisor::{step_supervisor, Mode, SupervisorConfig, SupervisorState};
use crate::value::ValueFunction;

/// How the uncooperative vehicle accelerates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbancePolicy {
    #[default]
    Zero,
    /// Fixed acceleration, clipped to the disturbance box.
    Constant { d: InputVec },
    /// Independent uniform draws from the box every step.
    UniformRandom { seed: u64 },
    /// Bang-bang adversary on the episode's value-function gradient.
    WorstCase,
}

/// Player 1's feedback law.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    Supervisor(SupervisorConfig),
    /// Bang-bang input that maximizes the value's rate of change. Logged as
    /// evasive throughout.
    OptimalAvoid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSettings {
    pub dt: f64,
    pub duration: f64,
    pub nominal_target: StateVec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Ran the full duration on the value grid without entering the disc.
    Safe,
    CollisionZoneEntered,
    /// Ran the full duration without entering the disc, but left the value
    /// grid at some point, where the guarantee does not apply.
    HorizonReached,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: StateVec,
    pub mode: Mode,
    pub u: InputVec,
    pub d: InputVec,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub samples: Vec<TrajectorySample>,
    pub outcome: Outcome,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> StateVec {
        self.samples.last().map_or(StateVec::ZERO, |s| s.state)
    }

    pub fn min_range(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.state.range())
            .fold(f64::INFINITY, f64::min)
    }

    /// Header `t,x,y,vx,vy,mode,ux,uy,dx,dy,phi`, 17 significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,x,y,vx,vy,mode,ux,uy,dx,dy,phi")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.t, s.state.x, s.state.y, s.state.vx, s.state.vy, s.mode, s.u.ax, s.u.ay, s.d.ax, s.d.ay, s.phi
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Adversarial input `d*` from the central-difference velocity gradient of
/// the value; zero outside the grid.
pub fn worst_case_disturbance(
    state: &StateVec,
    value: &ValueFunction,
    params: &OrbitGameParams,
) -> InputVec {
    match value.velocity_gradient(state) {
        Some([gx, gy]) => optimal_inputs(&[0.0, 0.0, gx, gy], params).1,
        None => InputVec::ZERO,
    }
}

/// Player 1's game-optimal input `u*`; zero outside the grid.
pub fn optimal_avoid_control(
    state: &StateVec,
    value: &ValueFunction,
    params: &OrbitGameParams,
) -> InputVec {
    match value.velocity_gradient(state) {
        Some([gx, gy]) => optimal_inputs(&[0.0, 0.0, gx, gy], params).0,
        None => InputVec::ZERO,
    }
}

struct DisturbanceSource<'a> {
    policy: DisturbancePolicy,
    rng: Option<ChaCha8Rng>,
    value: &'a ValueFunction,
}

impl DisturbanceSource<'_> {
    fn next(&mut self, state: &StateVec, params: &OrbitGameParams) -> InputVec {
        let b = params.d_max;
        match self.policy {
            DisturbancePolicy::Zero => InputVec::ZERO,
            DisturbancePolicy::Constant { d } => d.clamp(b),
            DisturbancePolicy::UniformRandom { .. } => {
                let rng = self.rng.as_mut().expect("seeded at construction");
                if b == 0.0 {
                    InputVec::ZERO
                } else {
                    InputVec::new(rng.gen_range(-b..=b), rng.gen_range(-b..=b))
                }
            }
            DisturbancePolicy::WorstCase => worst_case_disturbance(state, self.value, params),
        }
    }
}

/// Runs one closed-loop episode: supervisor step, zero-order hold over `dt`,
/// RK4 propagation. Every step is logged; the run stops at the first sample
/// inside the keep-out disc.
pub fn run_episode(
    initial: StateVec,
    value: &ValueFunction,
    controller: &Controller,
    disturbance: DisturbancePolicy,
    settings: &EpisodeSettings,
    params: &OrbitGameParams,
) -> Result<TrajectoryRecord> {
    let EpisodeSettings {
        dt,
        duration,
        nominal_target,
    } = *settings;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(duration.is_finite() && duration >= dt) {
        return Err(Error::invalid(
            "duration",
            format!("must be at least dt, got {duration}"),
        ));
    }
    if !initial.is_finite() {
        return Err(Error::invalid("initial state", "must be finite"));
    }
    params.validate()?;
    if let Controller::Supervisor(cfg) = controller {
        cfg.validate()?;
    }

    let steps = (duration / dt).round() as usize;
    let mut source = DisturbanceSource {
        policy: disturbance,
        rng: match disturbance {
            DisturbancePolicy::UniformRandom { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        },
        value,
    };
    let mut sup = SupervisorState::new(nominal_target);
    let mut state = initial;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut left_grid = false;

    for k in 0..=steps {
        let t = k as f64 * dt;
        let sampled = value.sample(&state);
        left_grid |= sampled.out_of_domain;
        let (mode, u) = match controller {
            Controller::Supervisor(cfg) => {
                let (next, u) = step_supervisor(&sup, &state, value, cfg, params, dt);
                sup = next;
                (sup.mode, u)
            }
            Controller::OptimalAvoid => {
                (Mode::Evasive, optimal_avoid_control(&state, value, params))
            }
        };
        let d = source.next(&state, params);
        samples.push(TrajectorySample {
            t,
            state,
            mode,
            u,
            d,
            phi: sampled.value,
        });
        if state.range() <= params.d_fcc {
            return Ok(TrajectoryRecord {
                samples,
                outcome: Outcome::CollisionZoneEntered,
            });
        }
        if k < steps {
            state = rk4_step(&state, &u, &d, dt, params);
            if !state.is_finite() {
                return Err(Error::Diverged {
                    t: t + dt,
                    state: state.to_array(),
                });
            }
        }
    }
    Ok(TrajectoryRecord {
        samples,
        outcome: if left_grid {
            Outcome::HorizonReached
        } else {
            Outcome::Safe
        },
    })
}

/// Box-uniform initial states, rejected until `min_phi < φ < max_phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSampler {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub vx: [f64; 2],
    pub vy: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_phi: Option<f64>,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

fn default_attempts() -> usize {
    100_000
}

impl InitialSampler {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [
            ("x", self.x),
            ("y", self.y),
            ("vx", self.vx),
            ("vy", self.vy),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(
                    format!("sampler.{name}"),
                    "need finite lo <= hi",
                ));
            }
        }
        if self.max_attempts == 0 {
            return Err(Error::invalid("sampler.max_attempts", "must be >= 1"));
        }
        Ok(())
    }

    pub fn sample(&self, value: &ValueFunction, rng: &mut impl Rng) -> Result<StateVec> {
        let draw = |rng: &mut dyn rand::RngCore, [lo, hi]: [f64; 2]| {
            if lo == hi {
                lo
            } else {
                rng.gen_range(lo..=hi)
            }
        };
        for _ in 0..self.max_attempts {
            let s = StateVec::new(
                draw(rng, self.x),
                draw(rng, self.y),
                draw(rng, self.vx),
                draw(rng, self.vy),
            );
            let phi = value.value(&s);
            if self.min_phi.is_none_or(|m| phi > m) && self.max_phi.is_none_or(|m| phi < m) {
                return Ok(s);
            }
        }
        Err(Error::SamplerExhausted(self.max_attempts))
    }
}

/// Seed of episode `index` in a batch seeded with `seed` (SplitMix64 mix).
pub fn derive_episode_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Initial state and disturbance policy of a batch episode.
pub fn episode_inputs(
    sampler: &InitialSampler,
    value: &ValueFunction,
    disturbance: DisturbancePolicy,
    episode_seed: u64,
) -> Result<(StateVec, DisturbancePolicy)> {
    let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
    let initial = sampler.sample(value, &mut rng)?;
    let policy = match disturbance {
        DisturbancePolicy::UniformRandom { .. } => {
            DisturbancePolicy::UniformRandom { seed: episode_seed }
        }
        other => other,
    };
    Ok((initial, policy))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub index: u64,
    pub seed: u64,
    pub initial: StateVec,
    pub outcome: Outcome,
    pub steps: usize,
    pub min_range: f64,
    pub final_state: StateVec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub runs: usize,
    pub violations: usize,
    pub seed: u64,
    pub sampler: InitialSampler,
    pub disturbance: DisturbancePolicy,
    pub outcomes: Vec<EpisodeSummary>,
}

#[allow(clippy::too_many_arguments)]
pub fn run_monte_carlo(
    sampler: &InitialSampler,
    n: usize,
    seed: u64,
    value: &ValueFunction,
    controller: &Controller,
    disturbance: DisturbancePolicy,
    settings: &EpisodeSettings,
    params: &OrbitGameParams,
) -> Result<MonteCarloReport> {
    if n == 0 {
        return Err(Error::invalid("runs", "must be >= 1"));
    }
    sampler.validate()?;
    let outcomes = (0..n as u64)
        .into_par_iter()
        .map(|index| {
            let episode_seed = derive_episode_seed(seed, index);
            let (initial, policy) = episode_inputs(sampler, value, disturbance, episode_seed)?;
            let rec = run_episode(initial, value, controller, policy, settings, params)?;
            Ok(EpisodeSummary {
                index,
                seed: episode_seed,
                initial,
                outcome: rec.outcome,
                steps: rec.samples.len(),
                min_range: rec.min_range(),
                final_state: rec.final_state(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = outcomes
        .iter()
        .filter(|o| o.outcome == Outcome::CollisionZoneEntered)
        .count();
    Ok(MonteCarloReport {
        runs: n,
        violations,
        seed,
        sampler: *sampler,
        disturbance,
        outcomes,
    })
}
