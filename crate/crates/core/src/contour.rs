//! Zero-level extraction on 2D slices of a 4D field (marching squares).

use std::collections::HashMap;

use crate::dynamics::StateVec;
use crate::error::{Error, Result};
use crate::field::{Axis, ScalarField};

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    /// The last point connects back to the first.
    pub closed: bool,
}

impl Polyline {
    /// Consecutive segments, including the closing one.
    pub fn segments(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.points.len();
        let count = if self.closed { n } else { n.saturating_sub(1) };
        (0..count).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourSlice {
    /// Coordinates of each point are `[free_axes[0], free_axes[1]]`.
    pub free_axes: [Axis; 2],
    pub polylines: Vec<Polyline>,
}

// Edge identifiers: (orientation, i, j). Orientation 0 joins (i,j)-(i+1,j),
// orientation 1 joins (i,j)-(i,j+1).
type EdgeKey = (u8, usize, usize);

/// Polylines approximating `{φ = 0}` in the plane of the two axes not named
/// in `fixed`. Fixed values need not sit on grid nodes.
pub fn zero_contour_slice(field: &ScalarField, fixed: &[(Axis, f64)]) -> Result<ContourSlice> {
    if fixed.len() != 2 || fixed[0].0 == fixed[1].0 {
        return Err(Error::invalid(
            "slice",
            "exactly two distinct axes must be fixed",
        ));
    }
    let grid = field.grid();
    for &(axis, value) in fixed {
        let a = grid.axis(axis);
        if !(value >= a.min && value <= a.max) {
            return Err(Error::invalid(
                format!("slice value for {axis}"),
                format!("{value} outside [{}, {}]", a.min, a.max),
            ));
        }
    }
    let free: Vec<Axis> = Axis::ALL
        .into_iter()
        .filter(|a| fixed.iter().all(|(f, _)| f != a))
        .collect();
    let free_axes = [free[0], free[1]];
    let (ax, ay) = (grid.axis(free_axes[0]), grid.axis(free_axes[1]));
    let (nx, ny) = (ax.count, ay.count);

    let mut plane = vec![0.0; nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            let mut s = [0.0; 4];
            for &(axis, v) in fixed {
                s[axis.index()] = v;
            }
            s[free_axes[0].index()] = ax.coord(i);
            s[free_axes[1].index()] = ay.coord(j);
            plane[i * ny + j] = field.sample(&StateVec::from(s)).value;
        }
    }
    let value = |i: usize, j: usize| plane[i * ny + j];
    let inside = |i: usize, j: usize| value(i, j) <= 0.0;

    let edge_point = |key: EdgeKey| -> [f64; 2] {
        let (o, i, j) = key;
        let (i2, j2) = if o == 0 { (i + 1, j) } else { (i, j + 1) };
        let (v0, v1) = (value(i, j), value(i2, j2));
        let t = if v0 == v1 { 0.5 } else { v0 / (v0 - v1) };
        let p0 = [ax.coord(i), ay.coord(j)];
        let p1 = [ax.coord(i2), ay.coord(j2)];
        [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])]
    };

    let mut segments: Vec<[EdgeKey; 2]> = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let (a, b, c, d) = (
                inside(i, j),
                inside(i + 1, j),
                inside(i + 1, j + 1),
                inside(i, j + 1),
            );
            let bottom = (0u8, i, j);
            let right = (1u8, i + 1, j);
            let top = (0u8, i, j + 1);
            let left = (1u8, i, j);
            let mut crossing = Vec::with_capacity(4);
            if a != b {
                crossing.push(bottom);
            }
            if b != c {
                crossing.push(right);
            }
            if c != d {
                crossing.push(top);
            }
            if d != a {
                crossing.push(left);
            }
            match crossing.len() {
                0 => {}
                2 => segments.push([crossing[0], crossing[1]]),
                4 => {
                    let centre = 0.25
                        * (value(i, j) + value(i + 1, j) + value(i + 1, j + 1) + value(i, j + 1));
                    if (centre <= 0.0) == a {
                        // a and c joined through the centre
                        segments.push([bottom, right]);
                        segments.push([top, left]);
                    } else {
                        segments.push([left, bottom]);
                        segments.push([right, top]);
                    }
                }
                _ => unreachable!("a square has an even number of sign changes"),
            }
        }
    }

    Ok(ContourSlice {
        free_axes,
        polylines: chain(&segments, edge_point),
    })
}

fn chain(segments: &[[EdgeKey; 2]], point: impl Fn(EdgeKey) -> [f64; 2]) -> Vec<Polyline> {
    let mut incident: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, ends) in segments.iter().enumerate() {
        for e in ends {
            incident.entry(*e).or_default().push(s);
        }
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();

    let walk =
        |start_seg: usize, start_edge: EdgeKey, used: &mut Vec<bool>| -> (Vec<EdgeKey>, bool) {
            let mut keys = vec![start_edge];
            let mut seg = start_seg;
            let mut at = start_edge;
            loop {
                used[seg] = true;
                let [e0, e1] = segments[seg];
                let next = if e0 == at { e1 } else { e0 };
                if next == start_edge {
                    return (keys, true);
                }
                keys.push(next);
                at = next;
                match incident[&next].iter().find(|&&s| !used[s]) {
                    Some(&s) => seg = s,
                    None => return (keys, false),
                }
            }
        };

    // Open chains start at edges touched by a single segment (slice border).
    let mut starts: Vec<(EdgeKey, usize)> = incident
        .iter()
        .filter(|(_, segs)| segs.len() == 1)
        .map(|(k, segs)| (*k, segs[0]))
        .collect();
    starts.sort_unstable();
    for (edge, seg) in starts {
        if used[seg] {
            continue;
        }
        let (keys, _) = walk(seg, edge, &mut used);
        out.push(Polyline {
            points: keys.into_iter().map(&point).collect(),
            closed: false,
        });
    }
    for seg in 0..segments.len() {
        if used[seg] {
            continue;
        }
        let (keys, closed) = walk(seg, segments[seg][0], &mut used);
        out.push(Polyline {
            points: keys.into_iter().map(&point).collect(),
            closed,
        });
    }
    out
}
