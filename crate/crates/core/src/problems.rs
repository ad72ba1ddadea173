//! Manufactured test problems and the FitzHugh-Nagumo setup.

use std::fmt;
use std::sync::Arc;

use statrs::function::gamma::gamma;

use crate::assembly::{check_order, riesz_coefficient};
use crate::error::{FemError, Result};
use crate::mesh::{
    generate_disk_mesh, generate_ellipse_mesh, generate_pentagon_mesh, generate_square_mesh, Triangulation,
};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    UnitSquare,
    /// Unit square with the corner `x + y > 3/2` removed.
    Pentagon,
    Ellipse { a: f64, b: f64 },
    Disk { cx: f64, cy: f64, r: f64 },
}

impl Domain {
    /// Builds a mesh with nominal element size `h`.
    ///
    /// Polygons use a grid of spacing `h`, whose elements have diameter
    /// `√2·h`; curved domains use the coarsest ring mesh whose elements are
    /// no larger than that.
    pub fn mesh(&self, h: f64) -> Result<Triangulation> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(FemError::InvalidParameter(format!("mesh size must be positive, got {h}")));
        }
        let cells = ((1.0 / h).round() as usize).max(1);
        let rings = |build: &dyn Fn(usize) -> Result<Triangulation>| -> Result<Triangulation> {
            let target = std::f64::consts::SQRT_2 * h * (1.0 + 1e-9);
            let mut n = 2;
            loop {
                let m = build(n)?;
                if m.h() <= target || n >= 2000 {
                    return Ok(m);
                }
                n += 1;
            }
        };
        match *self {
            Domain::UnitSquare => generate_square_mesh(cells),
            Domain::Pentagon => generate_pentagon_mesh(cells.max(2)),
            Domain::Ellipse { a, b } => rings(&|n| generate_ellipse_mesh(a, b, n)),
            Domain::Disk { cx, cy, r } => rings(&|n| generate_disk_mesh(cx, cy, r, n)),
        }
    }

    /// Extent `(lo, hi)` of the domain along the horizontal line at height `y`.
    pub fn chord_x(&self, y: f64) -> (f64, f64) {
        match *self {
            Domain::UnitSquare => (0.0, 1.0),
            Domain::Pentagon => (0.0, if y <= 0.5 { 1.0 } else { 1.5 - y }),
            Domain::Ellipse { a, b } => {
                let s = a * (1.0 - y * y / (b * b)).max(0.0).sqrt();
                (-s, s)
            }
            Domain::Disk { cx, cy, r } => {
                let s = (r * r - (y - cy).powi(2)).max(0.0).sqrt();
                (cx - s, cx + s)
            }
        }
    }

    /// Extent `(lo, hi)` along the vertical line at abscissa `x`.
    pub fn chord_y(&self, x: f64) -> (f64, f64) {
        match *self {
            Domain::Ellipse { a, b } => Domain::Ellipse { a: b, b: a }.chord_x(x),
            Domain::Disk { cx, cy, r } => Domain::Disk { cx: cy, cy: cx, r }.chord_x(x),
            // Both polygons are symmetric under x <-> y.
            d => d.chord_x(x),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (lo, hi) = self.chord_x(y);
        let (blo, bhi) = self.chord_y(x);
        x > lo && x < hi && y > blo && y < bhi
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::UnitSquare => write!(f, "unit square"),
            Domain::Pentagon => write!(f, "pentagon"),
            Domain::Ellipse { a, b } => write!(f, "ellipse a={a} b={b}"),
            Domain::Disk { cx, cy, r } => write!(f, "disk center=({cx},{cy}) r={r}"),
        }
    }
}

/// `u_t = K_x ∂^{2α}u/∂|x|^{2α} + K_y ∂^{2β}u/∂|y|^{2β} + F(u) + f` with
/// homogeneous Dirichlet data.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub alpha: f64,
    pub beta: f64,
    pub kx: f64,
    pub ky: f64,
    pub nonlinearity: ScalarFn,
    pub nonlinearity_derivative: ScalarFn,
    pub source: SpaceTimeFn,
    pub initial: FieldFn,
    pub exact: Option<SpaceTimeFn>,
    /// Spatial gradient of `exact`.
    pub exact_gradient: Option<GradientFn>,
    pub domain: Domain,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("kx", &self.kx)
            .field("ky", &self.ky)
            .field("has_exact", &self.exact.is_some())
            .field("domain", &self.domain)
            .finish()
    }
}

fn check_params(alpha: f64, beta: f64, kx: f64, ky: f64) -> Result<()> {
    check_order("alpha", alpha)?;
    check_order("beta", beta)?;
    if !(kx > 0.0 && ky > 0.0) {
        return Err(FemError::InvalidParameter(format!(
            "diffusivities must be positive, got K_x = {kx}, K_y = {ky}"
        )));
    }
    Ok(())
}

fn minus_square() -> (ScalarFn, ScalarFn) {
    (Arc::new(|u: f64| -u * u), Arc::new(|u: f64| -2.0 * u))
}

/// `Γ(p+1)/Γ(p+1−2μ)`, the power-rule factor for `D^{2μ} z^p`.
fn power_factor(p: f64, mu: f64) -> f64 {
    gamma(p + 1.0) / gamma(p + 1.0 - 2.0 * mu)
}

/// Pure fractional diffusion, `F ≡ 0`, `f ≡ 0`, with initial data `phi`.
pub fn diffusion_spec(alpha: f64, beta: f64, kx: f64, ky: f64, domain: Domain, phi: FieldFn) -> Result<ProblemSpec> {
    check_params(alpha, beta, kx, ky)?;
    Ok(ProblemSpec {
        name: "diffusion".into(),
        alpha,
        beta,
        kx,
        ky,
        nonlinearity: Arc::new(|_| 0.0),
        nonlinearity_derivative: Arc::new(|_| 0.0),
        source: Arc::new(|_, _, _| 0.0),
        initial: phi,
        exact: None,
        exact_gradient: None,
        domain,
    })
}

/// `u = 10 e^{-t} x²(1−x)² y²(1−y)²` on the unit square, `F(u) = −u²`.
pub fn example1_spec(alpha: f64, beta: f64, kx: f64, ky: f64) -> Result<ProblemSpec> {
    check_params(alpha, beta, kx, ky)?;
    let (ca, cb) = (riesz_coefficient(alpha), riesz_coefficient(beta));
    let bump = |s: f64| s * s * (1.0 - s) * (1.0 - s);
    let dbump = |s: f64| 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
    let exact = move |x: f64, y: f64, t: f64| 10.0 * (-t).exp() * bump(x) * bump(y);
    // Left RL derivative of order 2μ of z²(1−z)² = z² − 2z³ + z⁴.
    let g = |z: f64, mu: f64| {
        power_factor(4.0, mu) * z.powf(4.0 - 2.0 * mu) - 2.0 * power_factor(3.0, mu) * z.powf(3.0 - 2.0 * mu)
            + power_factor(2.0, mu) * z.powf(2.0 - 2.0 * mu)
    };
    let source = move |x: f64, y: f64, t: f64| {
        let u = exact(x, y, t);
        let e = 10.0 * (-t).exp();
        -u + u * u
            + kx * ca * e * bump(y) * (g(x, alpha) + g(1.0 - x, alpha))
            + ky * cb * e * bump(x) * (g(y, beta) + g(1.0 - y, beta))
    };
    let (nl, dnl) = minus_square();
    Ok(ProblemSpec {
        name: "example1".into(),
        alpha,
        beta,
        kx,
        ky,
        nonlinearity: nl,
        nonlinearity_derivative: dnl,
        source: Arc::new(source),
        initial: Arc::new(move |x, y| exact(x, y, 0.0)),
        exact: Some(Arc::new(exact)),
        exact_gradient: Some(Arc::new(move |x, y, t| {
            let e = 10.0 * (-t).exp();
            [e * dbump(x) * bump(y), e * bump(x) * dbump(y)]
        })),
        domain: Domain::UnitSquare,
    })
}

/// Left RL derivative of order 2μ of `z²(1−z)²(z−c)²`.
fn ex2_g0(z: f64, c: f64, mu: f64) -> f64 {
    let p = |k: f64| z.powf(k - 2.0 * mu) / gamma(k + 1.0 - 2.0 * mu);
    2.0 * c * c * p(2.0) - 12.0 * (c * c + c) * p(3.0) + 24.0 * (c * c + 4.0 * c + 1.0) * p(4.0)
        - 240.0 * (c + 1.0) * p(5.0)
        + 720.0 * p(6.0)
}

/// Left RL derivative of order 2μ of `z²(1−z)²(z+c−1)²`: the reflection of
/// `x²(1−x)²(x−c)²` about `x = 1`.
fn ex2_g1(z: f64, c: f64, mu: f64) -> f64 {
    let p = |k: f64| z.powf(k - 2.0 * mu) / gamma(k + 1.0 - 2.0 * mu);
    2.0 * (c * c - 2.0 * c + 1.0) * p(2.0) - 12.0 * (c * c - 3.0 * c + 2.0) * p(3.0)
        + 24.0 * (c * c - 6.0 * c + 6.0) * p(4.0)
        + 240.0 * (c - 2.0) * p(5.0)
        + 720.0 * p(6.0)
}

/// Left RL derivative of order 2μ of `z²(c−z)²(1−c+z)²`: the reflection of
/// `x²(1−x)²(x−c)²` about `x = c`.
fn ex2_g2(z: f64, c: f64, mu: f64) -> f64 {
    let p = |k: f64| z.powf(k - 2.0 * mu) / gamma(k + 1.0 - 2.0 * mu);
    let c2 = c * c;
    2.0 * (c2 * c2 - 2.0 * c2 * c + c2) * p(2.0) - 12.0 * (2.0 * c2 * c - 3.0 * c2 + c) * p(3.0)
        + 24.0 * (6.0 * c2 - 6.0 * c + 1.0) * p(4.0)
        + 240.0 * (1.0 - 2.0 * c) * p(5.0)
        + 720.0 * p(6.0)
}

/// Sum of left and right RL derivatives of order 2μ, along the first
/// argument, of `x²(1−x)²(x+y−3/2)²` on the pentagon chord at `y`.
fn ex2_g(x: f64, y: f64, mu: f64) -> f64 {
    let c = 1.5 - y;
    if y <= 0.5 {
        ex2_g0(x, c, mu) + ex2_g1(1.0 - x, c, mu)
    } else {
        ex2_g0(x, c, mu) + ex2_g2(c - x, c, mu)
    }
}

/// `u = 1000 e^{-t} x²(1−x)²(x+y−3/2)² y²(1−y)²` on the pentagon, `F(u) = −u²`.
pub fn example2_spec(alpha: f64, beta: f64, kx: f64, ky: f64) -> Result<ProblemSpec> {
    check_params(alpha, beta, kx, ky)?;
    let (ca, cb) = (riesz_coefficient(alpha), riesz_coefficient(beta));
    let bump = |s: f64| s * s * (1.0 - s) * (1.0 - s);
    let dbump = |s: f64| 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
    let exact = move |x: f64, y: f64, t: f64| 1000.0 * (-t).exp() * bump(x) * (x + y - 1.5).powi(2) * bump(y);
    let source = move |x: f64, y: f64, t: f64| {
        let u = exact(x, y, t);
        let e = 1000.0 * (-t).exp();
        -u + u * u + kx * ca * e * bump(y) * ex2_g(x, y, alpha) + ky * cb * e * bump(x) * ex2_g(y, x, beta)
    };
    let (nl, dnl) = minus_square();
    Ok(ProblemSpec {
        name: "example2".into(),
        alpha,
        beta,
        kx,
        ky,
        nonlinearity: nl,
        nonlinearity_derivative: dnl,
        source: Arc::new(source),
        initial: Arc::new(move |x, y| exact(x, y, 0.0)),
        exact: Some(Arc::new(exact)),
        exact_gradient: Some(Arc::new(move |x, y, t| {
            let e = 1000.0 * (-t).exp();
            let s = x + y - 1.5;
            [
                e * bump(y) * (dbump(x) * s * s + 2.0 * bump(x) * s),
                e * bump(x) * (dbump(y) * s * s + 2.0 * bump(y) * s),
            ]
        })),
        domain: Domain::Pentagon,
    })
}

/// `u = 100 e^{-t} (b²x² + a²y² − a²b²)²` on the ellipse `x²/a² + y²/b² < 1`,
/// `F(u) = −u²`.
pub fn example3_spec(alpha: f64, beta: f64, kx: f64, ky: f64, a: f64, b: f64) -> Result<ProblemSpec> {
    check_params(alpha, beta, kx, ky)?;
    if !(a > 0.0 && b > 0.0) {
        return Err(FemError::InvalidParameter(format!("semi-axes must be positive, got a = {a}, b = {b}")));
    }
    let (ca, cb) = (riesz_coefficient(alpha), riesz_coefficient(beta));
    let quad = move |x: f64, y: f64| b * b * x * x + a * a * y * y - a * a * b * b;
    let exact = move |x: f64, y: f64, t: f64| 100.0 * (-t).exp() * quad(x, y).powi(2);
    // Along a chord of half-length a·s the square of the quadratic is
    // b⁴ z²(z − 2as)² in the distance z from either end; with w = −s this is
    // b⁴(z⁴ + 4aw z³ + 4a²w² z²).
    let h = move |z: f64, w: f64| {
        let p = |k: f64| z.powf(k - 2.0 * alpha) / gamma(k + 1.0 - 2.0 * alpha);
        let b4 = b.powi(4);
        8.0 * a * a * b4 * w * w * p(2.0) + 24.0 * a * b4 * w * p(3.0) + 24.0 * b4 * p(4.0)
    };
    let g = move |w: f64, z: f64| {
        let p = |k: f64| z.powf(k - 2.0 * beta) / gamma(k + 1.0 - 2.0 * beta);
        let a4 = a.powi(4);
        8.0 * a4 * b * b * w * w * p(2.0) + 24.0 * a4 * b * w * p(3.0) + 24.0 * a4 * p(4.0)
    };
    let source = move |x: f64, y: f64, t: f64| {
        let u = exact(x, y, t);
        let e = 100.0 * (-t).exp();
        let sy = (1.0 - y * y / (b * b)).max(0.0).sqrt();
        let sx = (1.0 - x * x / (a * a)).max(0.0).sqrt();
        -u + u * u
            + kx * ca * e * (h(x + a * sy, -sy) + h(a * sy - x, -sy))
            + ky * cb * e * (g(-sx, y + b * sx) + g(-sx, b * sx - y))
    };
    let (nl, dnl) = minus_square();
    Ok(ProblemSpec {
        name: "example3".into(),
        alpha,
        beta,
        kx,
        ky,
        nonlinearity: nl,
        nonlinearity_derivative: dnl,
        source: Arc::new(source),
        initial: Arc::new(move |x, y| exact(x, y, 0.0)),
        exact: Some(Arc::new(exact)),
        exact_gradient: Some(Arc::new(move |x, y, t| {
            let e = 400.0 * (-t).exp() * quad(x, y);
            [e * b * b * x, e * a * a * y]
        })),
        domain: Domain::Ellipse { a, b },
    })
}

/// FitzHugh-Nagumo parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FhnParams {
    /// Disk radius; the disk is centred at `(r, r)`.
    pub r: f64,
    /// Excitation threshold in `F(u) = u(1−u)(u−μ)`.
    pub mu: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for FhnParams {
    fn default() -> Self {
        Self {
            r: 1.25,
            mu: 0.1,
            epsilon: 0.01,
            lambda: 0.5,
            gamma: 0.1,
            delta: 0.0,
        }
    }
}

/// FitzHugh-Nagumo problem: the `u` equation plus recovery variable data.
#[derive(Clone)]
pub struct FhnSpec {
    pub problem: ProblemSpec,
    pub params: FhnParams,
    pub recovery_initial: FieldFn,
}

impl fmt::Debug for FhnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FhnSpec")
            .field("problem", &self.problem)
            .field("params", &self.params)
            .finish()
    }
}

pub fn fhn_spec(alpha: f64, beta: f64, kx: f64, ky: f64) -> Result<FhnSpec> {
    fhn_spec_with(alpha, beta, kx, ky, FhnParams::default())
}

/// `u⁰ = 1` on `{x < r, y < r}`, `w⁰ = 0.1` on `{y ≥ r}`, zero elsewhere.
pub fn fhn_spec_with(alpha: f64, beta: f64, kx: f64, ky: f64, params: FhnParams) -> Result<FhnSpec> {
    check_params(alpha, beta, kx, ky)?;
    let FhnParams { r, mu, .. } = params;
    let problem = ProblemSpec {
        name: "fhn".into(),
        alpha,
        beta,
        kx,
        ky,
        nonlinearity: Arc::new(move |u| u * (1.0 - u) * (u - mu)),
        nonlinearity_derivative: Arc::new(move |u| -3.0 * u * u + 2.0 * (1.0 + mu) * u - mu),
        source: Arc::new(|_, _, _| 0.0),
        initial: Arc::new(move |x, y| if x < r && y < r { 1.0 } else { 0.0 }),
        exact: None,
        exact_gradient: None,
        domain: Domain::Disk { cx: r, cy: r, r },
    };
    Ok(FhnSpec {
        problem,
        params,
        recovery_initial: Arc::new(move |_, y| if y >= r { 0.1 } else { 0.0 }),
    })
}
