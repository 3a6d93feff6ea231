//! Three-mode hybrid supervisor: nominal station keeping, evasive escape and
//! recovery, switched by guards on the reachability value function.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::{rk4_step, InputVec, OrbitGameParams, StateVec};
use crate::error::{Error, Result};
use crate::field::{BoxBounds, TargetSetSpec};
use crate::value::ValueFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Nominal,
    Evasive,
    Return,
}

impl Mode {
    /// The only mode reachable from `self` in one transition.
    pub fn successor(self) -> Mode {
        match self {
            Mode::Nominal => Mode::Evasive,
            Mode::Evasive => Mode::Return,
            Mode::Return => Mode::Nominal,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Nominal => "nominal",
            Mode::Evasive => "evasive",
            Mode::Return => "return",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// PD gains; proportional in 1/s², derivative in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdGains {
    pub kp_x: f64,
    pub kp_y: f64,
    pub kd_x: f64,
    pub kd_y: f64,
}

impl PdGains {
    /// Station keeping and recovery.
    pub const NOMINAL: PdGains = PdGains {
        kp_x: 1.0e-4,
        kp_y: 1.0e-4,
        kd_x: 2.0e-2,
        kd_y: 2.0e-2,
    };

    pub const EVASIVE: PdGains = PdGains {
        kp_x: 5.0e-4,
        kp_y: 5.0e-4,
        kd_x: 4.4e-2,
        kd_y: 4.4e-2,
    };

    fn validate(&self, name: &str) -> Result<()> {
        let all = [self.kp_x, self.kp_y, self.kd_x, self.kd_y];
        if all.iter().all(|g| g.is_finite() && *g >= 0.0) {
            Ok(())
        } else {
            Err(Error::invalid(name, "gains must be finite and >= 0"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainTable {
    pub nominal: PdGains,
    pub evasive: PdGains,
}

impl Default for GainTable {
    fn default() -> Self {
        Self {
            nominal: PdGains::NOMINAL,
            evasive: PdGains::EVASIVE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuardConfig {
    /// Nominal → Evasive once `φ ≤ guard_band`.
    pub guard_band: f64,
    /// Evasive → Return once `φ ≥ safe_margin`.
    pub safe_margin: f64,
    /// Return → Nominal once inside this box with small velocity.
    pub recovery_target: TargetSetSpec,
    pub eps_vx: f64,
    pub eps_vy: f64,
}

impl GuardConfig {
    /// Guard band of two cells' worth of φ, safe margin twice that.
    pub fn from_value(value: &ValueFunction, recovery_target: TargetSetSpec) -> Self {
        let guard_band = 2.0 * value.cell_variation();
        Self {
            guard_band,
            safe_margin: 2.0 * guard_band,
            recovery_target,
            eps_vx: 0.01,
            eps_vy: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.guard_band >= 0.0
            && self.guard_band < self.safe_margin
            && self.safe_margin.is_finite())
        {
            return Err(Error::invalid(
                "guards",
                format!(
                    "need 0 <= guard_band < safe_margin, got {} and {}",
                    self.guard_band, self.safe_margin
                ),
            ));
        }
        if !(self.eps_vx > 0.0 && self.eps_vy > 0.0) {
            return Err(Error::invalid("guards", "velocity tolerances must be > 0"));
        }
        if !matches!(self.recovery_target, TargetSetSpec::Box(_)) {
            return Err(Error::invalid("recovery_target", "must be a box"));
        }
        self.recovery_target.validate()
    }

    fn recovered(&self, s: &StateVec) -> bool {
        self.recovery_target.phi0(s) <= 0.0
            && s.vx.abs() <= self.eps_vx
            && s.vy.abs() <= self.eps_vy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeMode {
    /// Climb radially; drifts back tangentially.
    RaiseDriftBack,
    /// Descend radially; drifts forward tangentially.
    LowerAccelForward,
    TangentialBrake,
    TangentialAccel,
}

impl EscapeMode {
    /// Tie-break order.
    pub const ALL: [EscapeMode; 4] = [
        EscapeMode::RaiseDriftBack,
        EscapeMode::LowerAccelForward,
        EscapeMode::TangentialBrake,
        EscapeMode::TangentialAccel,
    ];
}

/// Waypoint displacements in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EscapeOffsets {
    pub radial: f64,
    pub drift: f64,
    pub tangential: f64,
}

impl Default for EscapeOffsets {
    fn default() -> Self {
        Self {
            radial: 200.0,
            drift: 300.0,
            tangential: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisorConfig {
    pub guards: GuardConfig,
    pub gains: GainTable,
    pub offsets: EscapeOffsets,
    /// Preview length for escape selection (s).
    pub lookahead: f64,
    pub preview_dt: f64,
}

impl SupervisorConfig {
    pub fn new(guards: GuardConfig) -> Self {
        Self {
            guards,
            gains: GainTable::default(),
            offsets: EscapeOffsets::default(),
            lookahead: 60.0,
            preview_dt: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.guards.validate()?;
        self.gains.nominal.validate("nominal gains")?;
        self.gains.evasive.validate("evasive gains")?;
        if !(self.lookahead > 0.0 && self.preview_dt > 0.0 && self.preview_dt <= self.lookahead) {
            return Err(Error::invalid(
                "preview",
                "need 0 < preview_dt <= lookahead",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupervisorState {
    pub mode: Mode,
    /// Present exactly while evasive.
    pub escape: Option<EscapeMode>,
    /// Escape waypoint, frozen at the moment the escape was chosen.
    pub waypoint: Option<StateVec>,
    pub nominal_target: StateVec,
    pub time_in_mode: f64,
}

impl SupervisorState {
    pub fn new(nominal_target: StateVec) -> Self {
        Self {
            mode: Mode::Nominal,
            escape: None,
            waypoint: None,
            nominal_target,
            time_in_mode: 0.0,
        }
    }
}

/// Saturated PD law towards `target`.
pub fn pd_control(state: &StateVec, target: &StateVec, gains: &PdGains, u_max: f64) -> InputVec {
    let ux = -gains.kp_x * (state.x - target.x) - gains.kd_x * (state.vx - target.vx);
    let uy = -gains.kp_y * (state.y - target.y) - gains.kd_y * (state.vy - target.vy);
    InputVec::new(ux, uy).clamp(u_max)
}

pub fn escape_waypoint(mode: EscapeMode, state: &StateVec, offsets: &EscapeOffsets) -> StateVec {
    let (x, y) = match mode {
        EscapeMode::RaiseDriftBack => (state.x - offsets.drift, state.y + offsets.radial),
        EscapeMode::LowerAccelForward => (state.x + offsets.drift, state.y - offsets.radial),
        EscapeMode::TangentialBrake => (state.x - offsets.tangential, state.y),
        EscapeMode::TangentialAccel => (state.x + offsets.tangential, state.y),
    };
    StateVec::new(x, y, 0.0, 0.0)
}

/// Minimum of φ along a disturbance-free preview of the evasive PD law
/// towards `waypoint`, excluding the starting point.
pub fn preview_min_value(
    state: &StateVec,
    waypoint: &StateVec,
    value: &ValueFunction,
    gains: &PdGains,
    params: &OrbitGameParams,
    lookahead: f64,
    dt: f64,
) -> f64 {
    let steps = (lookahead / dt).round().max(1.0) as usize;
    let mut s = *state;
    let mut lowest = f64::INFINITY;
    for _ in 0..steps {
        let u = pd_control(&s, waypoint, gains, params.u_max);
        s = rk4_step(&s, &u, &InputVec::ZERO, dt, params);
        lowest = lowest.min(value.value(&s));
    }
    lowest
}

/// Picks the candidate whose preview keeps φ highest; ties go to the
/// earlier entry of [`EscapeMode::ALL`].
pub fn select_escape_mode(
    state: &StateVec,
    value: &ValueFunction,
    candidates: &[StateVec; 4],
    config: &SupervisorConfig,
    params: &OrbitGameParams,
) -> EscapeMode {
    let mut best = (EscapeMode::ALL[0], f64::NEG_INFINITY);
    for (mode, wp) in EscapeMode::ALL.into_iter().zip(candidates) {
        let score = preview_min_value(
            state,
            wp,
            value,
            &config.gains.evasive,
            params,
            config.lookahead,
            config.preview_dt,
        );
        if score > best.1 {
            best = (mode, score);
        }
    }
    best.0
}

/// Evaluates the outgoing guard of the current mode (at most one transition
/// per call) and returns the new state with the active mode's control.
pub fn step_supervisor(
    sup: &SupervisorState,
    state: &StateVec,
    value: &ValueFunction,
    config: &SupervisorConfig,
    params: &OrbitGameParams,
    dt: f64,
) -> (SupervisorState, InputVec) {
    let guards = &config.guards;
    let mut next = *sup;
    let switched = match sup.mode {
        Mode::Nominal => {
            if value.value(state) <= guards.guard_band {
                let candidates =
                    EscapeMode::ALL.map(|m| escape_waypoint(m, state, &config.offsets));
                let mode = select_escape_mode(state, value, &candidates, config, params);
                next.mode = Mode::Evasive;
                next.escape = Some(mode);
                next.waypoint = Some(escape_waypoint(mode, state, &config.offsets));
                true
            } else {
                false
            }
        }
        Mode::Evasive => {
            if value.value(state) >= guards.safe_margin {
                next.mode = Mode::Return;
                next.escape = None;
                next.waypoint = None;
                true
            } else {
                false
            }
        }
        Mode::Return => {
            if guards.recovered(state) {
                next.mode = Mode::Nominal;
                next.nominal_target = recovery_setpoint(&guards.recovery_target);
                true
            } else {
                false
            }
        }
    };
    next.time_in_mode = if switched { 0.0 } else { sup.time_in_mode + dt };

    let u = match next.mode {
        Mode::Nominal => pd_control(
            state,
            &next.nominal_target,
            &config.gains.nominal,
            params.u_max,
        ),
        Mode::Evasive => {
            let wp = next
                .waypoint
                .expect("evasive mode always carries a waypoint");
            pd_control(state, &wp, &config.gains.evasive, params.u_max)
        }
        Mode::Return => pd_control(
            state,
            &recovery_setpoint(&guards.recovery_target),
            &config.gains.nominal,
            params.u_max,
        ),
    };
    (next, u)
}

/// Centre of the recovery box at rest.
pub fn recovery_setpoint(target: &TargetSetSpec) -> StateVec {
    let c = target.center();
    StateVec::new(c.x, c.y, 0.0, 0.0)
}

pub fn default_recovery_target() -> TargetSetSpec {
    TargetSetSpec::Box(BoxBounds::standoff_1000m())
}
