//! Backward integration of the Hamilton–Jacobi–Isaacs equation on the grid.
//!
//! With `s` the time-to-go, the value satisfies `∂φ/∂s = H(X, ∇φ)`. Each
//! step is forward Euler in `s` with a Lax–Friedrichs numerical Hamiltonian
//!
//! ```text
//! φ ← φ + Δs · [ H(X, (p⁻ + p⁺)/2) + Σ_i α_i (p⁺_i − p⁻_i)/2 ]
//! ```
//!
//! which is monotone for `Δs · Σ α_i/Δx_i ≤ 1`. In tube mode the update is
//! clipped by the previous iterate and by `φ0`, so the zero sublevel set
//! grows monotonically and always contains the target.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{hamiltonian, hamiltonian_partials_bound, OrbitGameParams, StateVec};
use crate::error::{Error, Result};
use crate::field::{Sampled, ScalarField, Stencil};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Reachable tube: target hit at any time within the horizon.
    #[default]
    Tube,
    /// Reachable set: target hit exactly at the horizon.
    Set,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Backward horizon τ in seconds. Zero returns the target field.
    pub horizon: f64,
    pub cfl: f64,
    /// Checkpoint interval in seconds.
    pub save_every: f64,
    /// Stop once a step changes no node by this much or more. Zero disables.
    pub convergence_eps: f64,
    pub mode: SolveMode,
    /// Lower bound on the dissipation coefficients. Solves that must be
    /// compared node by node should share one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dissipation: Option<[f64; 4]>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            horizon: 300.0,
            cfl: 0.5,
            save_every: 30.0,
            convergence_eps: 0.0,
            mode: SolveMode::Tube,
            dissipation: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::invalid("horizon", "must be finite and >= 0"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::invalid(
                "cfl",
                format!("must lie in (0, 1], got {}", self.cfl),
            ));
        }
        if !(self.save_every.is_finite() && self.save_every > 0.0) {
            return Err(Error::invalid("save_every", "must be finite and > 0"));
        }
        if !(self.convergence_eps >= 0.0) {
            return Err(Error::invalid("convergence_eps", "must be >= 0"));
        }
        if let Some(a) = self.dissipation {
            if a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid(
                    "dissipation",
                    "entries must be finite and >= 0",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub steps: usize,
    pub dt: f64,
    pub alpha: [f64; 4],
    pub horizon: f64,
    pub mode: SolveMode,
    pub converged_at: Option<f64>,
    /// Largest absolute nodal change of each step.
    pub max_update: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ValueFunctionResult {
    pub final_field: ScalarField,
    /// `(time-to-go, field)` pairs, starting with the target at `0`.
    pub checkpoints: Vec<(f64, ScalarField)>,
    pub converged_at: Option<f64>,
    pub stats: SolveStats,
}

impl ValueFunctionResult {
    pub fn horizon(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |(t, _)| *t)
    }
}

struct StepContext<'a> {
    params: &'a OrbitGameParams,
    stencil: Stencil,
    coords: [Vec<f64>; 4],
    alpha: [f64; 4],
    dt: f64,
    mode: SolveMode,
}

/// Outcome of one sweep over an x-slab: largest update and first bad node.
type SlabResult = (f64, Option<usize>);

impl StepContext<'_> {
    fn slab(&self, i0: usize, prev: &[f64], phi0: &[f64], out: &mut [f64]) -> SlabResult {
        let [_, n1, n2, n3] = self.stencil.counts;
        let base = i0 * self.stencil.strides[0];
        let mut max_update = 0.0f64;
        let mut bad = None;
        let mut local = 0usize;
        let x = self.coords[0][i0];
        for i1 in 0..n1 {
            let y = self.coords[1][i1];
            for i2 in 0..n2 {
                let vx = self.coords[2][i2];
                for i3 in 0..n3 {
                    let idx = base + local;
                    let (minus, plus) = self.stencil.upwind(prev, idx, [i0, i1, i2, i3]);
                    let mut mean = [0.0; 4];
                    let mut diss = 0.0;
                    for k in 0..4 {
                        mean[k] = 0.5 * (minus[k] + plus[k]);
                        diss += self.alpha[k] * 0.5 * (plus[k] - minus[k]);
                    }
                    let state = StateVec::new(x, y, vx, self.coords[3][i3]);
                    let h = hamiltonian(&state, &mean, self.params);
                    let old = prev[idx];
                    let mut new = old + self.dt * (h + diss);
                    if self.mode == SolveMode::Tube {
                        new = new.min(old).min(phi0[idx]);
                    }
                    if !new.is_finite() && bad.is_none() {
                        bad = Some(idx);
                    }
                    max_update = max_update.max((new - old).abs());
                    out[local] = new;
                    local += 1;
                }
            }
        }
        (max_update, bad)
    }
}

/// Dissipation coefficients for `phi0`'s grid, raised to `config.dissipation`
/// where that is larger.
pub fn dissipation_for(
    phi0: &ScalarField,
    params: &OrbitGameParams,
    config: &SolveConfig,
) -> [f64; 4] {
    let mut alpha = hamiltonian_partials_bound(&phi0.grid().bounds(), params);
    if let Some(floor) = config.dissipation {
        for k in 0..4 {
            alpha[k] = alpha[k].max(floor[k]);
        }
    }
    alpha
}

/// Refuse solves whose CFL step count exceeds this.
pub const MAX_STEPS: usize = 10_000_000;

pub fn solve(
    phi0: &ScalarField,
    params: &OrbitGameParams,
    config: &SolveConfig,
) -> Result<ValueFunctionResult> {
    params.validate()?;
    config.validate()?;
    let grid = *phi0.grid();
    let alpha = dissipation_for(phi0, params, config);
    let spacing = grid.spacing();
    let rate: f64 = (0..4).map(|k| alpha[k] / spacing[k]).sum();

    let (steps, dt) = if config.horizon == 0.0 {
        (0, 0.0)
    } else if rate == 0.0 {
        (1, config.horizon)
    } else {
        let max_dt = config.cfl / rate;
        let n = (config.horizon / max_dt).ceil().max(1.0);
        if !(n <= MAX_STEPS as f64) {
            return Err(Error::invalid(
                "horizon",
                format!(
                    "needs {n:.3e} steps at CFL {}; limit is {MAX_STEPS}",
                    config.cfl
                ),
            ));
        }
        let n = n as usize;
        (n, config.horizon / n as f64)
    };

    let ctx = StepContext {
        params,
        stencil: Stencil::new(&grid),
        coords: grid
            .axes()
            .map(|a| (0..a.count).map(|i| a.coord(i)).collect()),
        alpha,
        dt,
        mode: config.mode,
    };
    let slab_len = grid.strides()[0];
    let target = phi0.values();
    let mut current = target.to_vec();
    let mut next = vec![0.0; current.len()];
    let mut checkpoints = vec![(0.0, phi0.clone())];
    let mut next_save = config.save_every;
    let mut max_updates = Vec::with_capacity(steps);
    let mut converged_at = None;
    let mut taken = 0;

    for step in 0..steps {
        let (max_update, bad) = next
            .par_chunks_mut(slab_len)
            .enumerate()
            .map(|(i0, out)| ctx.slab(i0, &current, target, out))
            .reduce(
                || (0.0, None),
                |a, b| {
                    let bad = match (a.1, b.1) {
                        (Some(x), Some(y)) => Some(x.min(y)),
                        (x, y) => x.or(y),
                    };
                    (a.0.max(b.0), bad)
                },
            );
        if let Some(index) = bad {
            return Err(Error::NonFinite {
                step,
                index,
                state: grid.node_at(index).to_array(),
            });
        }
        std::mem::swap(&mut current, &mut next);
        max_updates.push(max_update);
        taken = step + 1;
        let t = taken as f64 * dt;
        if max_update < config.convergence_eps {
            converged_at = Some(t);
            break;
        }
        if taken < steps && t >= next_save - 1e-9 * dt {
            checkpoints.push((t, ScalarField::from_parts_unchecked(grid, current.clone())));
            while next_save <= t + 1e-9 * dt {
                next_save += config.save_every;
            }
        }
    }

    let t_final = taken as f64 * dt;
    let final_field = ScalarField::from_parts_unchecked(grid, current);
    if taken > 0 {
        checkpoints.push((t_final, final_field.clone()));
    }
    log::debug!("solve: {taken} steps of {dt:.4} s, alpha {alpha:?}");
    Ok(ValueFunctionResult {
        final_field,
        checkpoints,
        converged_at,
        stats: SolveStats {
            steps: taken,
            dt,
            alpha,
            horizon: config.horizon,
            mode: config.mode,
            converged_at,
            max_update: max_updates,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub inside: bool,
    /// Interpolated value at the state.
    pub margin: f64,
    pub out_of_domain: bool,
}

/// Whether `state` lies in the computed tube (or set) at the final horizon.
pub fn brt_membership(result: &ValueFunctionResult, state: &StateVec) -> Membership {
    let Sampled {
        value,
        out_of_domain,
    } = result.final_field.sample(state);
    Membership {
        inside: !out_of_domain && value <= 0.0,
        margin: value,
        out_of_domain,
    }
}

/// One solve per disturbance bound in `d_levels`, everything else fixed. All
/// solves share dissipation coefficients and step size so that the results
/// are comparable node by node.
pub fn disturbance_sensitivity(
    phi0: &ScalarField,
    params: &OrbitGameParams,
    config: &SolveConfig,
    d_levels: &[f64],
) -> Result<Vec<ValueFunctionResult>> {
    if d_levels.is_empty() {
        return Err(Error::invalid("d_levels", "must not be empty"));
    }
    if d_levels.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::invalid("d_levels", "must be sorted ascending"));
    }
    let level_params = |d_max: f64| OrbitGameParams { d_max, ..*params };
    let mut shared = config.dissipation.unwrap_or([0.0; 4]);
    for &d in d_levels {
        let a = dissipation_for(phi0, &level_params(d), config);
        for k in 0..4 {
            shared[k] = shared[k].max(a[k]);
        }
    }
    let config = SolveConfig {
        dissipation: Some(shared),
        ..*config
    };
    d_levels
        .iter()
        .map(|&d| solve(phi0, &level_params(d), &config))
        .collect()
}
