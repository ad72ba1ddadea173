//! Riemann-Liouville derivatives of P1 basis functions along integral paths.
//!
//! On each path interval a basis function is linear, so the derivative of
//! order `μ ∈ (0, 1]` splits into two closed-form terms per interval: an
//! endpoint term with kernel `(x - t)^{-μ} / Γ(1 - μ)` and a slope term with
//! kernel `(x - t)^{1-μ} / Γ(2 - μ)`. Summing the interval contributions
//! gives the derivative at the path's end point.

use statrs::function::gamma::gamma;

use crate::error::{FemError, Result};
use crate::fracpath::{influence_elements, integral_path, Direction, IntegralPath};
use crate::mesh::Triangulation;

/// Minimum interval length accepted after breakpoint merging.
pub const MIN_INTERVAL: f64 = 1e-14;

/// `1/Γ(z)` with the pole at `z = 0` mapped to zero.
pub fn recip_gamma(z: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        1.0 / gamma(z)
    }
}

/// Restriction of a P1 function to one path interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRestriction {
    pub t0: f64,
    pub t1: f64,
    /// Value at `t0`.
    pub value: f64,
    pub slope: f64,
}

impl LinearRestriction {
    pub fn value_at(&self, t: f64) -> f64 {
        self.value + self.slope * (t - self.t0)
    }
}

/// Precomputed gamma factors for one derivative order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlKernel {
    mu: f64,
    /// `1 / Γ(1 - μ)`
    c0: f64,
    /// `1 / Γ(2 - μ)`
    c1: f64,
}

impl RlKernel {
    /// Accepts `0 < μ ≤ 1`; `μ = 1` reproduces the classical first derivative.
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(FemError::Domain(format!(
                "derivative order must lie in (0, 1], got {mu}"
            )));
        }
        Ok(Self {
            mu,
            c0: recip_gamma(1.0 - mu),
            c1: recip_gamma(2.0 - mu),
        })
    }

    pub fn order(&self) -> f64 {
        self.mu
    }

    /// Contribution of one interval to the derivative at `x`.
    ///
    /// A terminal interval ends at `x` itself; a non-terminal one must end
    /// strictly before `x`.
    #[inline]
    pub fn contribution(&self, r: &LinearRestriction, x: f64, terminal: bool) -> Result<f64> {
        let mu = self.mu;
        let d0 = x - r.t0;
        if terminal {
            if d0 <= 0.0 {
                return Err(FemError::Domain(format!(
                    "terminal interval starts at {} which is not before x = {x}",
                    r.t0
                )));
            }
            return Ok(self.c0 * r.value * d0.powf(-mu) + self.c1 * r.slope * d0.powf(1.0 - mu));
        }
        let d1 = x - r.t1;
        if d1 <= 0.0 {
            return Err(FemError::Domain(format!(
                "non-terminal interval ends at {} which is not before x = {x}",
                r.t1
            )));
        }
        let f1 = r.value_at(r.t1);
        let endpoint = f1 * d1.powf(-mu) - r.value * d0.powf(-mu);
        let slope = r.slope * (d1.powf(1.0 - mu) - d0.powf(1.0 - mu));
        Ok(-self.c0 * endpoint - self.c1 * slope)
    }
}

/// Contribution of one interval to the order-`mu` derivative at `x_eval`.
pub fn interval_contribution(
    restriction: &LinearRestriction,
    x_eval: f64,
    mu: f64,
    is_terminal: bool,
) -> Result<f64> {
    RlKernel::new(mu)?.contribution(restriction, x_eval, is_terminal)
}

/// Directional derivative of every basis function whose support meets a
/// path, at the path's end point. Entries are sorted by node id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodalDerivMap {
    entries: Vec<(usize, f64)>,
}

impl NodalDerivMap {
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, node: usize) -> f64 {
        self.entries
            .binary_search_by_key(&node, |e| e.0)
            .map_or(0.0, |i| self.entries[i].1)
    }

    /// `Σ_l coeffs[l] · value_l`
    pub fn dot(&self, coeffs: &[f64]) -> f64 {
        self.entries.iter().map(|&(n, v)| coeffs[n] * v).sum()
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    fn from_unsorted(mut raw: Vec<(usize, f64)>) -> Self {
        // Stable sort keeps interval order within a node, so sums are reproducible.
        raw.sort_by_key(|e| e.0);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(raw.len() / 2 + 3);
        for (n, v) in raw {
            match entries.last_mut() {
                Some(last) if last.0 == n => last.1 += v,
                _ => entries.push((n, v)),
            }
        }
        Self { entries }
    }
}

/// Derivatives of all P1 basis functions along `path`, evaluated at its end.
pub fn basis_derivs_along_path(
    mesh: &Triangulation,
    path: &IntegralPath,
    kernel: &RlKernel,
) -> Result<NodalDerivMap> {
    let n = path.num_intervals();
    let x = path.breakpoints[n];
    let mut raw = Vec::with_capacity(3 * n);
    for (j, &cell) in path.interval_cells.iter().enumerate() {
        let (t0, t1) = (path.breakpoints[j], path.breakpoints[j + 1]);
        if t1 - t0 < MIN_INTERVAL {
            return Err(FemError::DegeneratePath {
                x: path.base.0,
                y: path.base.1,
                msg: format!("interval [{t0}, {t1}] is shorter than {MIN_INTERVAL}"),
            });
        }
        let (x0, y0) = path.point(t0);
        let (x1, y1) = path.point(t1);
        let b0 = mesh.barycentric(cell, x0, y0);
        let b1 = mesh.barycentric(cell, x1, y1);
        let terminal = j + 1 == n;
        for (k, &node) in mesh.cells()[cell].v.iter().enumerate() {
            let r = LinearRestriction {
                t0,
                t1,
                value: b0[k],
                slope: (b1[k] - b0[k]) / (t1 - t0),
            };
            raw.push((node, kernel.contribution(&r, x, terminal)?));
        }
    }
    Ok(NodalDerivMap::from_unsorted(raw))
}

/// Index of a cell containing `(x, y)` (linear scan).
pub fn locate_cell(mesh: &Triangulation, x: f64, y: f64) -> Option<usize> {
    (0..mesh.num_cells()).find(|&c| mesh.contains(c, x, y, 1e-12))
}

/// Directional derivative of order `mu` of the P1 function `coeffs` at `point`.
pub fn eval_frac_deriv_of_fe_function(
    mesh: &Triangulation,
    coeffs: &[f64],
    point: (f64, f64),
    mu: f64,
    dir: Direction,
) -> Result<f64> {
    if coeffs.len() != mesh.num_vertices() {
        return Err(FemError::DimensionMismatch {
            expected: mesh.num_vertices(),
            got: coeffs.len(),
        });
    }
    let cell = locate_cell(mesh, point.0, point.1).ok_or_else(|| {
        FemError::Domain(format!("point ({}, {}) is outside the mesh", point.0, point.1))
    })?;
    let kernel = RlKernel::new(mu)?;
    let path = integral_path(mesh, &influence_elements(mesh, cell, dir), point, dir)?;
    Ok(basis_derivs_along_path(mesh, &path, &kernel)?.dot(coeffs))
}
