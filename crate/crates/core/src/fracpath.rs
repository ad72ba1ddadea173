//! Integral paths for the directional Riemann-Liouville derivatives.
//!
//! A path runs along a horizontal or vertical line from the domain boundary
//! to an evaluation point and is split wherever it crosses an element edge.
//! All four directions share one kernel: each direction is a reflection of
//! the plane into *path coordinates* `(s, r)` in which the path is the
//! "left" one, `s` increasing toward the evaluation point and `r` fixed.

use crate::error::{FemError, Result};
use crate::mesh::Triangulation;

/// Relative tolerance (times the domain diameter) for merging breakpoints.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Lower limit on the boundary below the point: `a(y)` or `c(x)`.
    Lower,
    /// Upper limit on the boundary above the point: `b(y)` or `d(x)`.
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Direction {
    pub axis: Axis,
    pub side: Side,
}

impl Direction {
    /// `a(y) D_x`: left derivative in `x`.
    pub const LEFT: Self = Self {
        axis: Axis::Horizontal,
        side: Side::Lower,
    };
    /// `x D_b(y)`: right derivative in `x`.
    pub const RIGHT: Self = Self {
        axis: Axis::Horizontal,
        side: Side::Upper,
    };
    /// `c(x) D_y`: left derivative in `y`.
    pub const DOWN: Self = Self {
        axis: Axis::Vertical,
        side: Side::Lower,
    };
    /// `y D_d(x)`: right derivative in `y`.
    pub const UP: Self = Self {
        axis: Axis::Vertical,
        side: Side::Upper,
    };
    pub const ALL: [Self; 4] = [Self::LEFT, Self::RIGHT, Self::DOWN, Self::UP];

    /// Physical `(x, y)` to path coordinates `(s, r)`.
    #[inline]
    pub fn to_path(self, x: f64, y: f64) -> (f64, f64) {
        match (self.axis, self.side) {
            (Axis::Horizontal, Side::Lower) => (x, y),
            (Axis::Horizontal, Side::Upper) => (-x, y),
            (Axis::Vertical, Side::Lower) => (y, x),
            (Axis::Vertical, Side::Upper) => (-y, x),
        }
    }

    /// Inverse of [`Direction::to_path`].
    #[inline]
    pub fn from_path(self, s: f64, r: f64) -> (f64, f64) {
        match (self.axis, self.side) {
            (Axis::Horizontal, Side::Lower) => (s, r),
            (Axis::Horizontal, Side::Upper) => (-s, r),
            (Axis::Vertical, Side::Lower) => (r, s),
            (Axis::Vertical, Side::Upper) => (r, -s),
        }
    }
}

/// Candidate cells for the paths of every point of one cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfluenceSet {
    pub cells: Vec<usize>,
}

/// Ordered breakpoints of one path in path coordinates.
///
/// `breakpoints[0]` is on the boundary, the last one is the evaluation point,
/// and interval `j` (between breakpoints `j` and `j + 1`) lies in
/// `interval_cells[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralPath {
    pub base: (f64, f64),
    pub direction: Direction,
    /// Fixed coordinate of the path line (`y` for horizontal paths).
    pub line: f64,
    pub breakpoints: Vec<f64>,
    pub interval_cells: Vec<usize>,
}

impl IntegralPath {
    pub fn num_intervals(&self) -> usize {
        self.interval_cells.len()
    }

    /// Path length, i.e. the distance from the boundary to the base point.
    pub fn length(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1] - self.breakpoints[0]
    }

    /// Physical coordinates of a path coordinate `s`.
    pub fn point(&self, s: f64) -> (f64, f64) {
        self.direction.from_path(s, self.line)
    }
}

/// Bounding box of a cell in path coordinates: `(smin, smax, rmin, rmax)`.
fn path_bbox(mesh: &Triangulation, cell: usize, dir: Direction) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in mesh.cell_points(cell) {
        let (s, r) = dir.to_path(p[0], p[1]);
        b = (b.0.min(s), b.1.max(s), b.2.min(r), b.3.max(r));
    }
    b
}

/// Cells whose bounding box meets the strip `r ∈ [rmin, rmax], s ≤ smax` of
/// `cell` (for the left direction: `y ∈ [ymin, ymax], x ≤ xmax`).
pub fn influence_elements(mesh: &Triangulation, cell: usize, dir: Direction) -> InfluenceSet {
    let (_, smax, rmin, rmax) = path_bbox(mesh, cell, dir);
    let cells = (0..mesh.num_cells())
        .filter(|&c| {
            let (cs, _, cr0, cr1) = path_bbox(mesh, c, dir);
            cs <= smax && cr1 >= rmin && cr0 <= rmax
        })
        .collect();
    InfluenceSet { cells }
}

/// Intersection of the line `r = line` with `cell`, as an `s`-interval.
/// Edges collinear with the line contribute both endpoints.
fn chord(mesh: &Triangulation, cell: usize, dir: Direction, line: f64) -> Option<(f64, f64)> {
    let pts = mesh.cell_points(cell).map(|p| dir.to_path(p[0], p[1]));
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut hit = |s: f64| {
        lo = lo.min(s);
        hi = hi.max(s);
    };
    for k in 0..3 {
        let (sp, rp) = pts[k];
        let (sq, rq) = pts[(k + 1) % 3];
        let (dp, dq) = (rp - line, rq - line);
        if dp == 0.0 {
            hit(sp);
        }
        if dq == 0.0 {
            hit(sq);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            let t = dp / (dp - dq);
            hit(sp + t * (sq - sp));
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Builds the path from the boundary to `point` in direction `dir`, using
/// only the cells of `influence` as candidates.
pub fn integral_path(
    mesh: &Triangulation,
    influence: &InfluenceSet,
    point: (f64, f64),
    dir: Direction,
) -> Result<IntegralPath> {
    let tol = MERGE_TOL * mesh.bbox().diameter();
    let (s_end, line) = dir.to_path(point.0, point.1);

    let mut chords: Vec<(f64, f64, usize)> = influence
        .cells
        .iter()
        .filter_map(|&c| chord(mesh, c, dir, line).map(|(lo, hi)| (lo, hi, c)))
        .filter(|&(lo, hi, _)| hi - lo > tol && lo < s_end - tol)
        .collect();
    chords.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));

    let mut cuts: Vec<f64> = chords
        .iter()
        .flat_map(|&(lo, hi, _)| [lo, hi])
        .filter(|&s| s < s_end - tol)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut breakpoints: Vec<f64> = Vec::with_capacity(cuts.len() + 1);
    for s in cuts {
        match breakpoints.last() {
            Some(&last) if s - last <= tol => {}
            _ => breakpoints.push(s),
        }
    }
    breakpoints.push(s_end);
    if breakpoints.len() < 2 {
        return Err(FemError::DegeneratePath {
            x: point.0,
            y: point.1,
            msg: "no element crosses the path line".into(),
        });
    }

    let mut interval_cells = Vec::with_capacity(breakpoints.len() - 1);
    let mut k = 0;
    for w in breakpoints.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        while k < chords.len() && chords[k].1 < mid {
            k += 1;
        }
        match chords.get(k) {
            Some(&(lo, _, c)) if lo <= mid => interval_cells.push(c),
            _ => {
                return Err(FemError::DegeneratePath {
                    x: point.0,
                    y: point.1,
                    msg: format!("no element covers the path at s = {mid}"),
                })
            }
        }
    }
    Ok(IntegralPath {
        base: point,
        direction: dir,
        line,
        breakpoints,
        interval_cells,
    })
}

/// Influence sets of one cell for all four directions, in [`Direction::ALL`] order.
pub fn influence_all(mesh: &Triangulation, cell: usize) -> [InfluenceSet; 4] {
    Direction::ALL.map(|d| influence_elements(mesh, cell, d))
}
