//! Slow, independent reference evaluators for fractional derivatives.
//!
//! Nothing here uses integral paths or the closed-form interval terms: the
//! derivatives are computed by adaptive quadrature of the weakly singular
//! integral form, with brute-force point location on the mesh. These
//! routines exist to validate the fast paths and the manufactured sources.

use statrs::function::gamma::gamma;

use crate::error::{FemError, Result};
use crate::fracpath::{Axis, Direction, Side};
use crate::mesh::Triangulation;
use crate::quadrature::{map_rule_to_cell, TriangleRule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Absolute error target per integral.
    pub tol: f64,
    /// Maximum bisection depth of the adaptive quadrature.
    pub max_depth: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_depth: 40,
        }
    }
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let d = h * XGK[i];
        let s = f(c - d) + f(c + d);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]`.
pub fn adaptive_integral(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    cfg: &OracleConfig,
) -> Result<f64> {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        tol: f64,
        depth: usize,
        whole: (f64, f64),
    ) -> Result<f64> {
        let (val, err) = whole;
        if err <= tol || (b - a) <= 1e-15 * (1.0 + a.abs()) {
            return Ok(val);
        }
        if depth == 0 {
            return Err(FemError::NonConvergentQuadrature(format!(
                "[{a}, {b}] error estimate {err:.3e} > {tol:.3e}"
            )));
        }
        let m = 0.5 * (a + b);
        let left = gk15(f, a, m);
        let right = gk15(f, m, b);
        Ok(rec(f, a, m, 0.5 * tol, depth - 1, left)? + rec(f, m, b, 0.5 * tol, depth - 1, right)?)
    }
    if b <= a {
        return Ok(0.0);
    }
    rec(f, a, b, cfg.tol, cfg.max_depth, gk15(f, a, b))
}

/// `∫_a^x (x - t)^{-mu} g(t) dt` for `0 ≤ mu < 1`.
///
/// The substitution `w = (x - t)^{1-mu}` removes the endpoint singularity;
/// `breaks` (points where `g` may be non-smooth) split the integral.
pub fn weakly_singular_integral(
    g: &dyn Fn(f64) -> f64,
    a: f64,
    x: f64,
    mu: f64,
    breaks: &[f64],
    cfg: &OracleConfig,
) -> Result<f64> {
    if !(0.0..1.0).contains(&mu) {
        return Err(FemError::Domain(format!("kernel exponent {mu} outside [0, 1)")));
    }
    if x <= a {
        return Ok(0.0);
    }
    let q = 1.0 - mu;
    let p = 1.0 / q;
    let mut ws: Vec<f64> = breaks
        .iter()
        .filter(|&&t| t > a && t < x)
        .map(|&t| (x - t).powf(q))
        .collect();
    ws.push(0.0);
    ws.push((x - a).powf(q));
    ws.sort_by(f64::total_cmp);
    ws.dedup();
    let integrand = |w: f64| g(x - w.powf(p));
    let mut total = 0.0;
    for pair in ws.windows(2) {
        total += adaptive_integral(&integrand, pair[0], pair[1], cfg)?;
    }
    Ok(total / q)
}

/// Left Riemann-Liouville derivative of order `0 < mu < 1` at `x` with lower
/// limit `a`, from `f(a)(x-a)^{-mu}/Γ(1-mu) + ∫_a^x (x-t)^{-mu} f'(t) dt / Γ(1-mu)`.
pub fn rl_deriv_quadrature(
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    a: f64,
    x: f64,
    mu: f64,
    breaks: &[f64],
    cfg: &OracleConfig,
) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(FemError::Domain(format!("order {mu} outside (0, 1)")));
    }
    let g = gamma(1.0 - mu);
    let integral = weakly_singular_integral(df, a, x, mu, breaks, cfg)?;
    Ok((f(a) * (x - a).powf(-mu) + integral) / g)
}

/// Right Riemann-Liouville derivative of order `0 < mu < 1` at `x` with
/// upper limit `b`: `f(b)(b-x)^{-mu}/Γ(1-mu) - ∫_x^b (t-x)^{-mu} f'(t) dt / Γ(1-mu)`.
pub fn rl_right_deriv_quadrature(
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    x: f64,
    b: f64,
    mu: f64,
    breaks: &[f64],
    cfg: &OracleConfig,
) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(FemError::Domain(format!("order {mu} outside (0, 1)")));
    }
    // ∫_x^b (t-x)^{-mu} f'(t) dt = ∫_{-b}^{-x} (-x - s)^{-mu} f'(-s) ds
    let mirrored_df = |s: f64| df(-s);
    let mirrored_breaks: Vec<f64> = breaks.iter().map(|t| -t).collect();
    let integral = weakly_singular_integral(&mirrored_df, -b, -x, mu, &mirrored_breaks, cfg)?;
    Ok((f(b) * (b - x).powf(-mu) - integral) / gamma(1.0 - mu))
}

/// Left Riemann-Liouville derivative of order `1 < nu < 2`:
/// `f(a)(x-a)^{-nu}/Γ(1-nu) + f'(a)(x-a)^{1-nu}/Γ(2-nu) + ∫_a^x (x-t)^{1-nu} f''(t) dt / Γ(2-nu)`.
#[allow(clippy::too_many_arguments)]
pub fn rl_deriv2_quadrature(
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    d2f: &dyn Fn(f64) -> f64,
    a: f64,
    x: f64,
    nu: f64,
    breaks: &[f64],
    cfg: &OracleConfig,
) -> Result<f64> {
    if !(nu > 1.0 && nu < 2.0) {
        return Err(FemError::Domain(format!("order {nu} outside (1, 2)")));
    }
    let d = x - a;
    let integral = weakly_singular_integral(d2f, a, x, nu - 1.0, breaks, cfg)?;
    Ok(f(a) * d.powf(-nu) / gamma(1.0 - nu)
        + df(a) * d.powf(1.0 - nu) / gamma(2.0 - nu)
        + integral / gamma(2.0 - nu))
}

/// Right Riemann-Liouville derivative of order `1 < nu < 2` with upper limit `b`.
#[allow(clippy::too_many_arguments)]
pub fn rl_right_deriv2_quadrature(
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    d2f: &dyn Fn(f64) -> f64,
    x: f64,
    b: f64,
    nu: f64,
    breaks: &[f64],
    cfg: &OracleConfig,
) -> Result<f64> {
    // g(s) = f(-s): g' = -f'(-s), g'' = f''(-s).
    let g = |s: f64| f(-s);
    let dg = |s: f64| -df(-s);
    let d2g = |s: f64| d2f(-s);
    let mirrored: Vec<f64> = breaks.iter().map(|t| -t).collect();
    rl_deriv2_quadrature(&g, &dg, &d2g, -b, -x, nu, &mirrored, cfg)
}

/// Shifted-free Grünwald-Letnikov estimate `Σ_k g_k f(x - k·step) / step^mu`
/// from samples `f(a), f(a + step), …, f(x)` (last sample at `x`).
pub fn gl_deriv(samples: &[f64], mu: f64, step: f64) -> f64 {
    let n = samples.len();
    let mut weight = 1.0;
    let mut sum = 0.0;
    for k in 0..n {
        if k > 0 {
            weight *= 1.0 - (mu + 1.0) / k as f64;
        }
        sum += weight * samples[n - 1 - k];
    }
    sum / step.powf(mu)
}

/// Scanline view of one P1 basis function, found by scanning every cell.
struct Scanline<'a> {
    mesh: &'a Triangulation,
    node: usize,
    horizontal: bool,
    line: f64,
}

impl Scanline<'_> {
    fn point(&self, t: f64) -> (f64, f64) {
        if self.horizontal {
            (t, self.line)
        } else {
            (self.line, t)
        }
    }

    fn find_cell(&self, t: f64) -> Option<usize> {
        let (x, y) = self.point(t);
        let mesh = self.mesh;
        (0..mesh.num_cells()).find(|&c| {
            let p = mesh.cell_points(c);
            let s = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (y - a[1]) - (x - a[0]) * (b[1] - a[1]);
            let eps = -1e-13;
            s(p[0], p[1]) >= eps && s(p[1], p[2]) >= eps && s(p[2], p[0]) >= eps
        })
    }

    /// Value and along-line derivative of the basis function at `t`.
    fn eval(&self, t: f64) -> (f64, f64) {
        let Some(c) = self.find_cell(t) else {
            return (0.0, 0.0);
        };
        let cell = &self.mesh.cells()[c];
        let Some(i) = cell.v.iter().position(|&v| v == self.node) else {
            return (0.0, 0.0);
        };
        let p = self.mesh.cell_points(c);
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let two_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let gx = (p[j][1] - p[k][1]) / two_area;
        let gy = (p[k][0] - p[j][0]) / two_area;
        let (x, y) = self.point(t);
        let value = 1.0 + gx * (x - p[i][0]) + gy * (y - p[i][1]);
        (value, if self.horizontal { gx } else { gy })
    }

    /// Sorted crossings of the line with all cell edges, and the domain ends.
    fn breaks(&self) -> (Vec<f64>, f64, f64) {
        let mut ts = Vec::new();
        for c in 0..self.mesh.num_cells() {
            let p = self.mesh.cell_points(c);
            for k in 0..3 {
                let (a, b) = (p[k], p[(k + 1) % 3]);
                let (ra, rb, sa, sb) = if self.horizontal {
                    (a[1], b[1], a[0], b[0])
                } else {
                    (a[0], b[0], a[1], b[1])
                };
                if ra == rb {
                    if ra == self.line {
                        ts.push(sa);
                        ts.push(sb);
                    }
                } else {
                    let u = (self.line - ra) / (rb - ra);
                    if (0.0..=1.0).contains(&u) {
                        ts.push(sa + u * (sb - sa));
                    }
                }
            }
        }
        ts.sort_by(f64::total_cmp);
        let lo = ts.first().copied().unwrap_or(0.0);
        let hi = ts.last().copied().unwrap_or(0.0);
        (ts, lo, hi)
    }
}

/// Directional derivative of basis function `node` at `point` by quadrature.
pub fn basis_deriv_oracle(
    mesh: &Triangulation,
    node: usize,
    point: (f64, f64),
    mu: f64,
    dir: Direction,
    cfg: &OracleConfig,
) -> Result<f64> {
    let horizontal = dir.axis == Axis::Horizontal;
    let line = if horizontal { point.1 } else { point.0 };
    let t = if horizontal { point.0 } else { point.1 };
    let scan = Scanline {
        mesh,
        node,
        horizontal,
        line,
    };
    let (breaks, lo, hi) = scan.breaks();
    let f = |s: f64| scan.eval(s).0;
    let df = |s: f64| scan.eval(s).1;
    match dir.side {
        Side::Lower => rl_deriv_quadrature(&f, &df, lo, t, mu, &breaks, cfg),
        Side::Upper => rl_right_deriv_quadrature(&f, &df, t, hi, mu, &breaks, cfg),
    }
}

/// `(D_first φ_l, D_second φ_k)` by the cell-wise `rule`, with both
/// derivatives from [`basis_deriv_oracle`].
pub fn pairing_oracle(
    mesh: &Triangulation,
    k: usize,
    l: usize,
    mu: f64,
    pair: (Direction, Direction),
    rule: &TriangleRule,
    cfg: &OracleConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for c in 0..mesh.num_cells() {
        for q in map_rule_to_cell(rule, mesh, c) {
            let dl = basis_deriv_oracle(mesh, l, (q.x, q.y), mu, pair.0, cfg)?;
            if dl == 0.0 {
                continue;
            }
            let dk = basis_deriv_oracle(mesh, k, (q.x, q.y), mu, pair.1, cfg)?;
            total += q.weight * dl * dk;
        }
    }
    Ok(total)
}

/// Full stiffness entry `a(φ_l, φ_k)` from four oracle pairings.
#[allow(clippy::too_many_arguments)]
pub fn stiffness_entry_oracle(
    mesh: &Triangulation,
    k: usize,
    l: usize,
    alpha: f64,
    beta: f64,
    kx: f64,
    ky: f64,
    rule: &TriangleRule,
    cfg: &OracleConfig,
) -> Result<f64> {
    let ca = 1.0 / (2.0 * (alpha * std::f64::consts::PI).cos());
    let cb = 1.0 / (2.0 * (beta * std::f64::consts::PI).cos());
    let (lf, rt, dn, up) = (Direction::LEFT, Direction::RIGHT, Direction::DOWN, Direction::UP);
    let x = pairing_oracle(mesh, k, l, alpha, (lf, rt), rule, cfg)?
        + pairing_oracle(mesh, k, l, alpha, (rt, lf), rule, cfg)?;
    let y = pairing_oracle(mesh, k, l, beta, (dn, up), rule, cfg)?
        + pairing_oracle(mesh, k, l, beta, (up, dn), rule, cfg)?;
    Ok(kx * ca * x + ky * cb * y)
}
