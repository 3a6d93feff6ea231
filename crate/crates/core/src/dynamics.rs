//! Planar Hill–Clohessy–Wiltshire relative motion with affine control and
//! disturbance channels.
//!
//! State ordering is `(x, y, vx, vy)` with `x` tangential and `y` radial in
//! the rotating frame of the reference orbit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat4 = [[f64; 4]; 4];

/// Relative state `[x, y, ẋ, ẏ]` in metres and metres per second.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct StateVec {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl StateVec {
    pub const ZERO: StateVec = StateVec::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Self { x, y, vx, vy }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.vx, self.vy]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Separation in the orbital plane.
    pub fn range(&self) -> f64 {
        self.x.hypot(self.y)
    }

    fn axpy(self, a: f64, other: StateVec) -> StateVec {
        StateVec::new(
            self.x + a * other.x,
            self.y + a * other.y,
            self.vx + a * other.vx,
            self.vy + a * other.vy,
        )
    }
}

impl From<[f64; 4]> for StateVec {
    fn from(a: [f64; 4]) -> Self {
        StateVec::new(a[0], a[1], a[2], a[3])
    }
}

impl From<StateVec> for [f64; 4] {
    fn from(s: StateVec) -> Self {
        s.to_array()
    }
}

/// Planar acceleration `[a_x, a_y]` in m/s², used for both players.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct InputVec {
    pub ax: f64,
    pub ay: f64,
}

impl InputVec {
    pub const ZERO: InputVec = InputVec::new(0.0, 0.0);

    pub const fn new(ax: f64, ay: f64) -> Self {
        Self { ax, ay }
    }

    pub fn clamp(self, bound: f64) -> Self {
        InputVec::new(self.ax.clamp(-bound, bound), self.ay.clamp(-bound, bound))
    }

    pub fn max_abs(&self) -> f64 {
        self.ax.abs().max(self.ay.abs())
    }
}

impl From<[f64; 2]> for InputVec {
    fn from(a: [f64; 2]) -> Self {
        InputVec::new(a[0], a[1])
    }
}

impl From<InputVec> for [f64; 2] {
    fn from(u: InputVec) -> Self {
        [u.ax, u.ay]
    }
}

/// Which player the value function favours.
///
/// `Avoid`: the control keeps the value high and the disturbance drives it
/// down, so `{φ ≤ 0}` is where the disturbance can force a collision.
/// `Reach` swaps the roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameConvention {
    #[default]
    Avoid,
    Reach,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitGameParams {
    /// Mean motion of the reference orbit (rad/s).
    pub omega: f64,
    /// Symmetric per-axis control bound (m/s²).
    pub u_max: f64,
    /// Symmetric per-axis disturbance bound (m/s²).
    pub d_max: f64,
    /// Radius of the keep-out disc around the other vehicle (m). Placeholder
    /// default; set it from the operator's separation requirement.
    pub d_fcc: f64,
    pub convention: GameConvention,
}

impl Default for OrbitGameParams {
    fn default() -> Self {
        Self {
            omega: 0.0011,
            u_max: 0.1,
            d_max: 0.05,
            d_fcc: 200.0,
            convention: GameConvention::Avoid,
        }
    }
}

impl OrbitGameParams {
    /// `omega = 0` is accepted: it reduces the model to two double integrators.
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, ok: bool, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(name, reason))
            }
        };
        check(
            "omega",
            self.omega.is_finite() && self.omega >= 0.0,
            "must be finite and >= 0",
        )?;
        check(
            "u_max",
            self.u_max.is_finite() && self.u_max >= 0.0,
            "must be finite and >= 0",
        )?;
        check(
            "d_max",
            self.d_max.is_finite() && self.d_max >= 0.0,
            "must be finite and >= 0",
        )?;
        check(
            "d_fcc",
            self.d_fcc.is_finite() && self.d_fcc > 0.0,
            "must be finite and > 0",
        )?;
        if self.d_max >= self.u_max {
            log::warn!(
                "disturbance bound {} is not below control bound {}; avoidance is not guaranteed anywhere near the target",
                self.d_max,
                self.u_max
            );
        }
        Ok(())
    }

    /// One revolution of the reference orbit, or infinity when `omega = 0`.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }
}

/// Time derivative of the state under control `u` and disturbance `d`.
pub fn hcw_vector_field(
    state: &StateVec,
    u: &InputVec,
    d: &InputVec,
    params: &OrbitGameParams,
) -> StateVec {
    let w = params.omega;
    StateVec::new(
        state.vx,
        state.vy,
        -2.0 * w * state.vy + u.ax + d.ax,
        2.0 * w * state.vx + 3.0 * w * w * state.y + u.ay + d.ay,
    )
}

/// Closed-form state-transition matrix of the unforced planar equations:
/// `X(t) = Φ(t) X(0)`.
pub fn hcw_transition_matrix(t: f64, params: &OrbitGameParams) -> Mat4 {
    let w = params.omega;
    if w == 0.0 {
        return [
            [1.0, 0.0, t, 0.0],
            [0.0, 1.0, 0.0, t],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
    }
    let (s, c) = (w * t).sin_cos();
    [
        [
            1.0,
            6.0 * (s - w * t),
            (4.0 * s - 3.0 * w * t) / w,
            -2.0 * (1.0 - c) / w,
        ],
        [0.0, 4.0 - 3.0 * c, 2.0 * (1.0 - c) / w, s / w],
        [0.0, 6.0 * w * (c - 1.0), 4.0 * c - 3.0, -2.0 * s],
        [0.0, 3.0 * w * s, 2.0 * s, c],
    ]
}

pub fn mat_vec(m: &Mat4, v: &StateVec) -> StateVec {
    let a = v.to_array();
    let row = |r: &[f64; 4]| r[0] * a[0] + r[1] * a[1] + r[2] * a[2] + r[3] * a[3];
    StateVec::new(row(&m[0]), row(&m[1]), row(&m[2]), row(&m[3]))
}

pub fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// One classical RK4 step with both inputs held constant over the step.
pub fn rk4_step(
    state: &StateVec,
    u: &InputVec,
    d: &InputVec,
    dt: f64,
    params: &OrbitGameParams,
) -> StateVec {
    let f = |s: &StateVec| hcw_vector_field(s, u, d, params);
    let k1 = f(state);
    let k2 = f(&state.axpy(0.5 * dt, k1));
    let k3 = f(&state.axpy(0.5 * dt, k2));
    let k4 = f(&state.axpy(dt, k3));
    StateVec::new(
        state.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
        state.y + dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
        state.vx + dt / 6.0 * (k1.vx + 2.0 * k2.vx + 2.0 * k3.vx + k4.vx),
        state.vy + dt / 6.0 * (k1.vy + 2.0 * k2.vy + 2.0 * k3.vy + k4.vy),
    )
}

/// A feedback law evaluated once per integration step (zero-order hold).
pub trait InputPolicy {
    fn input(&mut self, t: f64, state: &StateVec) -> InputVec;
}

impl<F: FnMut(f64, &StateVec) -> InputVec> InputPolicy for F {
    fn input(&mut self, t: f64, state: &StateVec) -> InputVec {
        self(t, state)
    }
}

/// Policy that always returns zero input.
pub struct ZeroInput;

impl InputPolicy for ZeroInput {
    fn input(&mut self, _t: f64, _state: &StateVec) -> InputVec {
        InputVec::ZERO
    }
}

/// Integrates `steps` RK4 steps of size `dt`. Returns `steps + 1` states,
/// starting with `state`.
pub fn propagate(
    state: StateVec,
    u_policy: &mut impl InputPolicy,
    d_policy: &mut impl InputPolicy,
    dt: f64,
    steps: usize,
    params: &OrbitGameParams,
) -> Result<Vec<StateVec>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    if steps == 0 {
        return Err(Error::invalid("steps", "must be at least 1"));
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state);
    let mut current = state;
    for k in 0..steps {
        let t = k as f64 * dt;
        let u = u_policy.input(t, &current);
        let d = d_policy.input(t, &current);
        current = rk4_step(&current, &u, &d, dt, params);
        out.push(current);
    }
    Ok(out)
}

#[inline]
fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Bang-bang inner optimizers of the Hamiltonian for costate `p`.
///
/// Only the velocity components `p[2]`, `p[3]` matter; a zero component is
/// treated as positive.
pub fn optimal_inputs(costate: &[f64; 4], params: &OrbitGameParams) -> (InputVec, InputVec) {
    let sx = sign(costate[2]);
    let sy = sign(costate[3]);
    let (cu, cd) = match params.convention {
        GameConvention::Avoid => (params.u_max, -params.d_max),
        GameConvention::Reach => (-params.u_max, params.d_max),
    };
    (
        InputVec::new(cu * sx, cu * sy),
        InputVec::new(cd * sx, cd * sy),
    )
}

/// `p · f(X, u*, d*)` with the optimal inputs of [`optimal_inputs`].
#[inline]
pub fn hamiltonian(state: &StateVec, costate: &[f64; 4], params: &OrbitGameParams) -> f64 {
    let (u, d) = optimal_inputs(costate, params);
    let f = hcw_vector_field(state, &u, &d, params);
    costate[0] * f.x + costate[1] * f.y + costate[2] * f.vx + costate[3] * f.vy
}

/// Per-axis closed interval `[lo, hi]`, axis order `(x, y, vx, vy)`.
pub type StateBox = [[f64; 2]; 4];

fn max_abs_on(range: [f64; 2]) -> f64 {
    range[0].abs().max(range[1].abs())
}

/// Upper bounds `α_i ≥ max |∂H/∂p_i|` over a box of states, used as
/// Lax–Friedrichs dissipation coefficients.
pub fn hamiltonian_partials_bound(bounds: &StateBox, params: &OrbitGameParams) -> [f64; 4] {
    let w = params.omega;
    let [y, vx, vy] = [bounds[1], bounds[2], bounds[3]];
    let inputs = params.u_max + params.d_max;
    // |2ω vx + 3ω² y| is convex, so its maximum sits on a corner.
    let mut drift4 = 0.0_f64;
    for &a in &vx {
        for &b in &y {
            drift4 = drift4.max((2.0 * w * a + 3.0 * w * w * b).abs());
        }
    }
    [
        max_abs_on(vx),
        max_abs_on(vy),
        2.0 * w * max_abs_on(vy) + inputs,
        drift4 + inputs,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    const W: f64 = 0.0011;

    fn params(u_max: f64, d_max: f64) -> OrbitGameParams {
        OrbitGameParams {
            omega: W,
            u_max,
            d_max,
            ..Default::default()
        }
    }

    fn assert_state_close(a: StateVec, b: StateVec, tol: f64) {
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn vector_field_examples() {
        let p = params(0.1, 0.05);
        let z = InputVec::ZERO;
        assert_eq!(
            hcw_vector_field(&StateVec::ZERO, &z, &z, &p),
            StateVec::ZERO
        );
        let f = hcw_vector_field(&StateVec::new(0.0, 0.0, 1.0, 0.0), &z, &z, &p);
        assert_state_close(f, StateVec::new(1.0, 0.0, 0.0, 0.0022), 1e-18);
        let f = hcw_vector_field(&StateVec::new(0.0, 100.0, 0.0, 0.0), &z, &z, &p);
        assert_state_close(f, StateVec::new(0.0, 0.0, 0.0, 3.63e-4), 1e-15);
    }

    #[test]
    fn transition_matrix_identity_and_inverse() {
        let p = params(0.0, 0.0);
        let phi0 = hcw_transition_matrix(0.0, &p);
        for (i, row) in phi0.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
            }
        }
        let prod = mat_mul(
            &hcw_transition_matrix(1000.0, &p),
            &hcw_transition_matrix(-1000.0, &p),
        );
        for (i, row) in prod.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-12, "entry ({i},{j}) = {v}");
            }
        }
    }

    #[test]
    fn transition_matrix_semigroup() {
        let p = params(0.0, 0.0);
        let period = p.period();
        for &(t1, t2) in &[
            (100.0, 250.0),
            (-1200.0, 3000.0),
            (0.3 * period, 0.6 * period),
        ] {
            let lhs = hcw_transition_matrix(t1 + t2, &p);
            let rhs = mat_mul(
                &hcw_transition_matrix(t1, &p),
                &hcw_transition_matrix(t2, &p),
            );
            for i in 0..4 {
                for j in 0..4 {
                    assert!((lhs[i][j] - rhs[i][j]).abs() < 1e-12 * lhs[i][j].abs().max(1.0));
                }
            }
        }
    }

    /// Textbook RK4 on the second-order form, fine step, as an independent
    /// check of the closed form.
    fn reference_flow(x0: StateVec, t_end: f64, n: usize) -> StateVec {
        let w = W;
        let acc = |s: [f64; 4]| {
            [
                s[2],
                s[3],
                -2.0 * w * s[3],
                2.0 * w * s[2] + 3.0 * w * w * s[1],
            ]
        };
        let h = t_end / n as f64;
        let mut s = x0.to_array();
        for _ in 0..n {
            let add = |a: [f64; 4], k: [f64; 4], c: f64| {
                [
                    a[0] + c * k[0],
                    a[1] + c * k[1],
                    a[2] + c * k[2],
                    a[3] + c * k[3],
                ]
            };
            let k1 = acc(s);
            let k2 = acc(add(s, k1, h / 2.0));
            let k3 = acc(add(s, k2, h / 2.0));
            let k4 = acc(add(s, k3, h));
            for i in 0..4 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        s.into()
    }

    #[test]
    fn transition_matrix_periodic_radial_mode() {
        let p = params(0.0, 0.0);
        let x0 = StateVec::new(0.0, 100.0, 0.0, 0.0);
        let t = p.period();
        let xt = mat_vec(&hcw_transition_matrix(t, &p), &x0);
        assert!((xt.y - 100.0).abs() / 100.0 < 1e-9, "y(T) = {}", xt.y);
        let reference = reference_flow(x0, t, 200_000);
        assert!((reference.y - xt.y).abs() < 1e-7);
        assert!((reference.x - xt.x).abs() < 1e-6 * xt.x.abs());
    }

    #[test]
    fn transition_matrix_zero_omega_is_free_flight() {
        let p = OrbitGameParams {
            omega: 0.0,
            ..Default::default()
        };
        let xt = mat_vec(
            &hcw_transition_matrix(10.0, &p),
            &StateVec::new(1.0, 2.0, 3.0, -4.0),
        );
        assert_eq!(xt, StateVec::new(31.0, -38.0, 3.0, -4.0));
    }

    #[test]
    fn propagate_rejects_bad_step() {
        let p = params(0.0, 0.0);
        assert!(propagate(StateVec::ZERO, &mut ZeroInput, &mut ZeroInput, 0.0, 3, &p).is_err());
        assert!(propagate(StateVec::ZERO, &mut ZeroInput, &mut ZeroInput, -1.0, 3, &p).is_err());
        assert!(propagate(StateVec::ZERO, &mut ZeroInput, &mut ZeroInput, 1.0, 0, &p).is_err());
    }

    #[test]
    fn propagate_equilibrium() {
        let p = params(0.0, 0.0);
        let traj = propagate(StateVec::ZERO, &mut ZeroInput, &mut ZeroInput, 1.0, 50, &p).unwrap();
        assert_eq!(traj.len(), 51);
        assert!(traj.iter().all(|s| *s == StateVec::ZERO));
    }

    #[test]
    fn propagate_conserves_drift_invariant() {
        let p = params(0.0, 0.0);
        let x0 = StateVec::new(-300.0, 80.0, 0.4, -0.2);
        let traj = propagate(x0, &mut ZeroInput, &mut ZeroInput, 1.0, 1000, &p).unwrap();
        let c0 = x0.vx + 2.0 * W * x0.y;
        for s in &traj {
            assert!((s.vx + 2.0 * W * s.y - c0).abs() < 1e-10);
        }
    }

    #[test]
    fn propagate_passes_inputs_through() {
        let p = params(0.1, 0.05);
        let mut u = |_t: f64, _s: &StateVec| InputVec::new(0.01, 0.0);
        let mut d = |_t: f64, _s: &StateVec| InputVec::new(0.0, -0.02);
        let traj = propagate(StateVec::ZERO, &mut u, &mut d, 1.0, 1, &p).unwrap();
        let s = traj[1];
        assert!(s.vx > 0.0 && s.vy < 0.0);
    }

    #[test]
    fn optimal_inputs_examples() {
        let p = params(0.1, 0.05);
        let (u, d) = optimal_inputs(&[3.0, -7.0, 1.0, -1.0], &p);
        assert_eq!(u, InputVec::new(0.1, -0.1));
        assert_eq!(d, InputVec::new(-0.05, 0.05));
        let (u, d) = optimal_inputs(&[1.0, 1.0, 0.0, 0.0], &p);
        assert_eq!(u, InputVec::new(0.1, 0.1));
        assert_eq!(d, InputVec::new(-0.05, -0.05));
        assert_eq!(hamiltonian(&StateVec::ZERO, &[1.0, 1.0, 0.0, 0.0], &p), 0.0);
        let (u, _) = optimal_inputs(&[0.0, 0.0, -2.0, 5.0], &params(0.0, 0.05));
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn reach_convention_swaps_roles() {
        let p = OrbitGameParams {
            convention: GameConvention::Reach,
            ..params(0.1, 0.05)
        };
        let (u, d) = optimal_inputs(&[0.0, 0.0, 1.0, -1.0], &p);
        assert_eq!(u, InputVec::new(-0.1, 0.1));
        assert_eq!(d, InputVec::new(0.05, -0.05));
    }

    #[test]
    fn hamiltonian_examples() {
        let p = params(0.1, 0.05);
        let s = StateVec::new(12.0, -3.0, 0.7, 0.2);
        assert_eq!(hamiltonian(&s, &[0.0; 4], &p), 0.0);
        let h = hamiltonian(&StateVec::ZERO, &[0.0, 0.0, 1.0, 0.0], &p);
        assert!((h - 0.05).abs() < 1e-15);
        let h = hamiltonian(
            &StateVec::new(0.0, 100.0, 0.0, 0.0),
            &[0.0, 0.0, 0.0, 1.0],
            &params(0.0, 0.0),
        );
        assert!((h - 3.63e-4).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_matches_closed_form() {
        let p = params(0.1, 0.05);
        let s = StateVec::new(40.0, -25.0, 1.5, -0.75);
        let c = [0.3, -1.2, -4.0, 2.5];
        let expected = c[0] * s.vx
            + c[1] * s.vy
            + c[2] * (-2.0 * W * s.vy)
            + c[3] * (2.0 * W * s.vx + 3.0 * W * W * s.y)
            + (p.u_max - p.d_max) * (c[2].abs() + c[3].abs());
        assert!((hamiltonian(&s, &c, &p) - expected).abs() < 1e-14);
    }

    #[test]
    fn partials_bound_examples() {
        let p = params(0.1, 0.05);
        let b = [[-10.0, 10.0], [-5.0, 5.0], [-1.0, 1.0], [-0.5, 0.5]];
        assert_eq!(hamiltonian_partials_bound(&b, &p)[0], 1.0);
        let b = [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [-1.0, 1.0]];
        let a = hamiltonian_partials_bound(&b, &p);
        assert!((a[2] - 0.1522).abs() < 1e-15);
        let a = hamiltonian_partials_bound(&[[0.0, 0.0]; 4], &params(0.0, 0.0));
        assert_eq!(a, [0.0; 4]);
    }
}
