//! Rectilinear 4D grids, sampled scalar fields, implicit target sets and the
//! finite-difference machinery the solver is built on.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{StateBox, StateVec};
use crate::error::{Error, Result};

/// State axes in storage order. `X` varies slowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Vx,
    Vy,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::X, Axis::Y, Axis::Vx, Axis::Vy];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Vx => "vx",
            Axis::Vy => "vy",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "vx" => Ok(Axis::Vx),
            "vy" => Ok(Axis::Vy),
            other => Err(Error::invalid("axis", format!("unknown axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisSpec {
    pub const fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::invalid(name, "bounds must be finite"));
        }
        if self.min >= self.max {
            return Err(Error::invalid(
                name,
                format!("min {} must be below max {}", self.min, self.max),
            ));
        }
        if self.count < 3 {
            return Err(Error::invalid(
                name,
                format!("needs at least 3 points, got {}", self.count),
            ));
        }
        if u32::try_from(self.count).is_err() {
            return Err(Error::invalid(name, "point count does not fit in u32"));
        }
        Ok(())
    }
}

/// Grid geometry; values are stored row-major with `x` slowest and `vy`
/// fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub x: AxisSpec,
    pub y: AxisSpec,
    pub vx: AxisSpec,
    pub vy: AxisSpec,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x: AxisSpec::new(-1500.0, 1500.0, 31),
            y: AxisSpec::new(-750.0, 750.0, 31),
            vx: AxisSpec::new(-5.0, 5.0, 31),
            vy: AxisSpec::new(-5.0, 5.0, 31),
        }
    }
}

impl GridSpec {
    pub fn new(axes: [AxisSpec; 4]) -> Result<Self> {
        let g = Self {
            x: axes[0],
            y: axes[1],
            vx: axes[2],
            vy: axes[3],
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (axis, spec) in Axis::ALL.iter().zip(self.axes()) {
            spec.validate(&format!("grid axis {axis}"))?;
        }
        self.len_checked()
            .map(|_| ())
            .ok_or_else(|| Error::invalid("grid", "node count overflows"))
    }

    fn len_checked(&self) -> Option<usize> {
        self.axes()
            .iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.count))
    }

    pub fn axes(&self) -> [AxisSpec; 4] {
        [self.x, self.y, self.vx, self.vy]
    }

    pub fn axis(&self, axis: Axis) -> AxisSpec {
        self.axes()[axis.index()]
    }

    pub fn counts(&self) -> [usize; 4] {
        [self.x.count, self.y.count, self.vx.count, self.vy.count]
    }

    pub fn spacing(&self) -> [f64; 4] {
        self.axes().map(|a| a.spacing())
    }

    pub fn len(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn strides(&self) -> [usize; 4] {
        let c = self.counts();
        [c[1] * c[2] * c[3], c[2] * c[3], c[3], 1]
    }

    pub fn index(&self, multi: [usize; 4]) -> usize {
        let s = self.strides();
        multi[0] * s[0] + multi[1] * s[1] + multi[2] * s[2] + multi[3]
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; 4] {
        let c = self.counts();
        let mut out = [0; 4];
        for k in (0..4).rev() {
            out[k] = idx % c[k];
            idx /= c[k];
        }
        out
    }

    pub fn node(&self, multi: [usize; 4]) -> StateVec {
        StateVec::new(
            self.x.coord(multi[0]),
            self.y.coord(multi[1]),
            self.vx.coord(multi[2]),
            self.vy.coord(multi[3]),
        )
    }

    pub fn node_at(&self, idx: usize) -> StateVec {
        self.node(self.multi_index(idx))
    }

    pub fn bounds(&self) -> StateBox {
        self.axes().map(|a| [a.min, a.max])
    }

    pub fn contains(&self, state: &StateVec) -> bool {
        state
            .to_array()
            .iter()
            .zip(self.axes())
            .all(|(v, a)| *v >= a.min && *v <= a.max)
    }
}

/// Per-axis interval constraints of a box target. `None` leaves the axis
/// unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxBounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vx: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vy: Option<[f64; 2]>,
}

impl BoxBounds {
    pub fn as_array(&self) -> [Option<[f64; 2]>; 4] {
        [self.x, self.y, self.vx, self.vy]
    }

    /// The 1000 m tangential standoff recovery box.
    pub fn standoff_1000m() -> Self {
        Self {
            x: Some([950.0, 1050.0]),
            y: Some([-25.0, 25.0]),
            vx: Some([-0.01, 0.01]),
            vy: Some([-0.01, 0.01]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSetSpec {
    /// Keep-out disc in the position plane, velocities free.
    Disc {
        radius: f64,
    },
    Box(BoxBounds),
}

impl TargetSetSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            TargetSetSpec::Disc { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::invalid(
                        "disc radius",
                        format!("must be positive, got {radius}"),
                    ));
                }
            }
            TargetSetSpec::Box(b) => {
                let mut any = false;
                for (axis, range) in Axis::ALL.iter().zip(b.as_array()) {
                    if let Some([lo, hi]) = range {
                        any = true;
                        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                            return Err(Error::invalid(
                                format!("box bound on {axis}"),
                                format!("need finite lo < hi, got [{lo}, {hi}]"),
                            ));
                        }
                    }
                }
                if !any {
                    return Err(Error::invalid("box target", "constrains no axis"));
                }
            }
        }
        Ok(())
    }

    /// Implicit function, `≤ 0` exactly on the set.
    #[inline]
    pub fn phi0(&self, s: &StateVec) -> f64 {
        match self {
            TargetSetSpec::Disc { radius } => s.x.hypot(s.y) - radius,
            TargetSetSpec::Box(b) => b
                .as_array()
                .iter()
                .zip(s.to_array())
                .filter_map(|(range, v)| range.map(|[lo, hi]| (lo - v).max(v - hi)))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Centre of the set; unconstrained axes map to zero.
    pub fn center(&self) -> StateVec {
        match self {
            TargetSetSpec::Disc { .. } => StateVec::ZERO,
            TargetSetSpec::Box(b) => b
                .as_array()
                .map(|r| r.map_or(0.0, |[lo, hi]| 0.5 * (lo + hi)))
                .into(),
        }
    }
}

/// Result of interpolating a field at an arbitrary state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampled {
    pub value: f64,
    /// The state lay outside the grid; `value` is the clamped-boundary
    /// interpolant plus the L∞ excess.
    pub out_of_domain: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::invalid(
                "field",
                format!("{} values for a grid of {} nodes", values.len(), grid.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "field",
                format!("non-finite value at node {i}"),
            ));
        }
        Ok(Self { grid, values })
    }

    /// Evaluates `f` at every node.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&StateVec) -> f64 + Sync) -> Result<Self> {
        grid.validate()?;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| f(&grid.node_at(i)))
            .collect();
        Self::new(grid, values)
    }

    pub(crate) fn from_parts_unchecked(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, multi: [usize; 4]) -> f64 {
        self.values[self.grid.index(multi)]
    }

    /// Multilinear interpolation over the 16 surrounding nodes.
    pub fn sample(&self, state: &StateVec) -> Sampled {
        let axes = self.grid.axes();
        let strides = self.grid.strides();
        let coords = state.to_array();
        let mut base = 0usize;
        let mut weights = [0.0f64; 4];
        let mut excess = 0.0f64;
        for k in 0..4 {
            let a = &axes[k];
            let c = coords[k];
            let clamped = c.clamp(a.min, a.max);
            excess = excess.max((c - clamped).abs());
            let mut t = (clamped - a.min) / a.spacing();
            let r = t.round();
            if (t - r).abs() < 1e-9 {
                t = r;
            }
            let i0 = (t.floor() as usize).min(a.count - 2);
            weights[k] = t - i0 as f64;
            base += i0 * strides[k];
        }
        // Nested lerps, so constant data interpolates exactly.
        let mut corners = [0.0f64; 16];
        for (corner, slot) in corners.iter_mut().enumerate() {
            let idx = (0..4).fold(base, |i, k| {
                if corner >> k & 1 == 1 {
                    i + strides[k]
                } else {
                    i
                }
            });
            *slot = self.values[idx];
        }
        for k in (0..4).rev() {
            let half = 1 << k;
            for c in 0..half {
                corners[c] += weights[k] * (corners[c + half] - corners[c]);
            }
        }
        let value = corners[0];
        Sampled {
            value: value + excess,
            out_of_domain: excess > 0.0,
        }
    }

    /// Central differences along `axis`, one-sided on the boundary faces
    /// (equivalently, central differences against linear-extrapolation
    /// ghost nodes).
    pub fn central_difference(&self, axis: Axis) -> ScalarField {
        let k = axis.index();
        let n = self.grid.counts()[k];
        let stride = self.grid.strides()[k];
        let h = self.grid.spacing()[k];
        let values = (0..self.values.len())
            .into_par_iter()
            .map(|idx| {
                let i = (idx / stride) % n;
                let v = &self.values;
                if i == 0 {
                    (v[idx + stride] - v[idx]) / h
                } else if i + 1 == n {
                    (v[idx] - v[idx - stride]) / h
                } else {
                    (v[idx + stride] - v[idx - stride]) / (2.0 * h)
                }
            })
            .collect();
        ScalarField::from_parts_unchecked(self.grid, values)
    }

    /// Median over nodes of the Euclidean norm of per-cell central
    /// differences, i.e. the typical change of the field across one cell.
    pub fn median_cell_variation(&self) -> f64 {
        let counts = self.grid.counts();
        let strides = self.grid.strides();
        let mut norms: Vec<f64> = (0..self.values.len())
            .into_par_iter()
            .map(|idx| {
                let m = self.grid.multi_index(idx);
                let mut sq = 0.0;
                for k in 0..4 {
                    let (lo, hi) = if m[k] == 0 {
                        (idx, idx + strides[k])
                    } else if m[k] + 1 == counts[k] {
                        (idx - strides[k], idx)
                    } else {
                        (idx - strides[k], idx + strides[k])
                    };
                    let span = if m[k] == 0 || m[k] + 1 == counts[k] {
                        1.0
                    } else {
                        2.0
                    };
                    let d = (self.values[hi] - self.values[lo]) / span;
                    sq += d * d;
                }
                sq.sqrt()
            })
            .collect();
        let mid = norms.len() / 2;
        let (_, m, _) = norms.select_nth_unstable_by(mid, f64::total_cmp);
        *m
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn build_target_field(grid: &GridSpec, target: &TargetSetSpec) -> Result<ScalarField> {
    target.validate()?;
    ScalarField::from_fn(*grid, |s| target.phi0(s))
}

/// Precomputed stencil geometry for one-sided differences.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    pub counts: [usize; 4],
    pub strides: [usize; 4],
    pub inv_h: [f64; 4],
}

impl Stencil {
    pub fn new(grid: &GridSpec) -> Self {
        Self {
            counts: grid.counts(),
            strides: grid.strides(),
            inv_h: grid.spacing().map(|h| 1.0 / h),
        }
    }

    /// Left and right one-sided differences at `idx`. Boundary faces use the
    /// ghost value `2·edge − interior`, which makes the outward difference
    /// equal the inward one.
    #[inline(always)]
    pub fn upwind(&self, v: &[f64], idx: usize, multi: [usize; 4]) -> ([f64; 4], [f64; 4]) {
        let mut minus = [0.0; 4];
        let mut plus = [0.0; 4];
        let centre = v[idx];
        for k in 0..4 {
            let s = self.strides[k];
            let i = multi[k];
            if i == 0 {
                let d = (v[idx + s] - centre) * self.inv_h[k];
                minus[k] = d;
                plus[k] = d;
            } else if i + 1 == self.counts[k] {
                let d = (centre - v[idx - s]) * self.inv_h[k];
                minus[k] = d;
                plus[k] = d;
            } else {
                minus[k] = (centre - v[idx - s]) * self.inv_h[k];
                plus[k] = (v[idx + s] - centre) * self.inv_h[k];
            }
        }
        (minus, plus)
    }
}

/// One-sided differences `D⁻` and `D⁺` per axis at every node.
#[derive(Debug, Clone)]
pub struct UpwindGradient {
    pub minus: [Vec<f64>; 4],
    pub plus: [Vec<f64>; 4],
}

pub fn gradient_upwind(field: &ScalarField) -> UpwindGradient {
    let grid = field.grid();
    let stencil = Stencil::new(grid);
    let pairs: Vec<([f64; 4], [f64; 4])> = (0..grid.len())
        .into_par_iter()
        .map(|idx| stencil.upwind(field.values(), idx, grid.multi_index(idx)))
        .collect();
    let split = |plus: bool| -> [Vec<f64>; 4] {
        std::array::from_fn(|k| {
            pairs
                .iter()
                .map(|(m, p)| if plus { p[k] } else { m[k] })
                .collect()
        })
    };
    UpwindGradient {
        minus: split(false),
        plus: split(true),
    }
}
