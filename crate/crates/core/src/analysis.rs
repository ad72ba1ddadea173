//! Error norms, convergence studies and result files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::assembly::{assemble_stiffness, FracDerivTable, QuadratureCache};
use crate::error::{FemError, Result};
use crate::fracderiv::{basis_derivs_along_path, RlKernel};
use crate::fracpath::{influence_elements, integral_path, Direction};
use crate::mesh::Triangulation;
use crate::oracle::{rl_deriv_quadrature, OracleConfig};
use crate::problems::{Domain, ProblemSpec};
use crate::quadrature::{map_rule_to_cell, triangle_rule, TriangleRule};
use crate::timestep::{begm_solve_with_stiffness, RunOptions, TimeGrid};

type Exact<'a> = &'a dyn Fn(f64, f64, f64) -> f64;

fn check_len(mesh: &Triangulation, coeffs: &[f64]) -> Result<()> {
    if coeffs.len() == mesh.num_vertices() {
        Ok(())
    } else {
        Err(FemError::DimensionMismatch {
            expected: mesh.num_vertices(),
            got: coeffs.len(),
        })
    }
}

/// `‖u_h − u(·, t)‖_{L²}` by cell quadrature.
pub fn error_l2(mesh: &Triangulation, coeffs: &[f64], u_exact: Exact, t: f64, rule: &TriangleRule) -> Result<f64> {
    check_len(mesh, coeffs)?;
    let quad = QuadratureCache::new(mesh, rule);
    let mut sum = 0.0;
    for (c, cell) in mesh.cells().iter().enumerate() {
        for (q, l) in quad.cell_points(c) {
            let uh: f64 = (0..3).map(|i| l[i] * coeffs[cell.v[i]]).sum();
            sum += q.weight * (uh - u_exact(q.x, q.y, t)).powi(2);
        }
    }
    Ok(sum.sqrt())
}

/// Maximum of `|u_h − u(·, t)|` over mesh nodes and degree-4 quadrature points.
pub fn error_linf(mesh: &Triangulation, coeffs: &[f64], u_exact: Exact, t: f64) -> Result<f64> {
    check_len(mesh, coeffs)?;
    let mut worst: f64 = 0.0;
    for (v, p) in coeffs.iter().zip(mesh.vertices()) {
        worst = worst.max((v - u_exact(p.x, p.y, t)).abs());
    }
    let quad = QuadratureCache::new(mesh, &triangle_rule(4)?);
    for (c, cell) in mesh.cells().iter().enumerate() {
        for (q, l) in quad.cell_points(c) {
            let uh: f64 = (0..3).map(|i| l[i] * coeffs[cell.v[i]]).sum();
            worst = worst.max((uh - u_exact(q.x, q.y, t)).abs());
        }
    }
    Ok(worst)
}

/// `(‖e‖² + K_x‖D_L^α e‖² + K_y‖D_D^β e‖²)^{1/2}` from the L² part and
/// `(weight, D_L^α e, D_D^β e)` at each Gauss point.
fn energy_from(l2: f64, kx: f64, ky: f64, derivs: impl Iterator<Item = (f64, f64, f64)>) -> f64 {
    let (mut sx, mut sy) = (0.0, 0.0);
    for (w, dx, dy) in derivs {
        sx += w * dx * dx;
        sy += w * dy * dy;
    }
    (l2 * l2 + kx * sx + ky * sy).sqrt()
}

fn discrete_error(mesh: &Triangulation, coeffs: &[f64], u_exact: Exact, t: f64) -> Vec<f64> {
    coeffs
        .iter()
        .zip(mesh.vertices())
        .map(|(v, p)| v - u_exact(p.x, p.y, t))
        .collect()
}

/// Exact solution data needed by the energy error.
#[derive(Clone, Copy)]
pub struct ExactSolution<'a> {
    pub value: &'a (dyn Fn(f64, f64, f64) -> f64 + Sync),
    pub gradient: &'a (dyn Fn(f64, f64, f64) -> [f64; 2] + Sync),
    pub domain: Domain,
}

impl<'a> ExactSolution<'a> {
    pub fn of(problem: &'a ProblemSpec) -> Option<Self> {
        Some(Self {
            value: &**problem.exact.as_ref()?,
            gradient: &**problem.exact_gradient.as_ref()?,
            domain: problem.domain,
        })
    }

    /// Left derivatives `(D_x^α u, D_y^β u)` at `(x, y, t)`, with lower limits
    /// on the domain boundary.
    pub fn left_derivatives(&self, x: f64, y: f64, t: f64, alpha: f64, beta: f64) -> Result<(f64, f64)> {
        let cfg = OracleConfig {
            tol: 1e-12,
            ..OracleConfig::default()
        };
        let (u, g) = (self.value, self.gradient);
        let dx = if alpha == 1.0 {
            g(x, y, t)[0]
        } else {
            let a = self.domain.chord_x(y).0.min(x);
            rl_deriv_quadrature(&|s| u(s, y, t), &|s| g(s, y, t)[0], a, x, alpha, &[], &cfg)?
        };
        let dy = if beta == 1.0 {
            g(x, y, t)[1]
        } else {
            let c = self.domain.chord_y(x).0.min(y);
            rl_deriv_quadrature(&|s| u(x, s, t), &|s| g(x, s, t)[1], c, y, beta, &[], &cfg)?
        };
        Ok((dx, dy))
    }
}

/// `‖u − u_h‖_{(α,β)}`: the L² error plus the left-derivative seminorm of the
/// error, with `u_h` extended by zero outside the mesh.
#[allow(clippy::too_many_arguments)]
pub fn error_energy(
    mesh: &Triangulation,
    coeffs: &[f64],
    exact: &ExactSolution,
    t: f64,
    alpha: f64,
    beta: f64,
    kx: f64,
    ky: f64,
    rule: &TriangleRule,
) -> Result<f64> {
    let table = FracDerivTable::build(mesh, alpha, beta, rule)?;
    error_energy_with_table(mesh, &table, coeffs, exact, t, kx, ky, rule)
}

/// [`error_energy`] reusing the derivative maps of a stiffness table built
/// with the same quadrature rule.
#[allow(clippy::too_many_arguments)]
pub fn error_energy_with_table(
    mesh: &Triangulation,
    table: &FracDerivTable,
    coeffs: &[f64],
    exact: &ExactSolution,
    t: f64,
    kx: f64,
    ky: f64,
    rule: &TriangleRule,
) -> Result<f64> {
    check_len(mesh, coeffs)?;
    let (alpha, beta) = (table.alpha(), table.beta());
    // Direction::ALL order: left, right, down, up.
    let derivs = table
        .points()
        .par_iter()
        .map(|g| -> Result<(f64, f64, f64)> {
            let (ux, uy) = exact.left_derivatives(g.point.x, g.point.y, t, alpha, beta)?;
            Ok((g.point.weight, g.maps[0].dot(coeffs) - ux, g.maps[2].dot(coeffs) - uy))
        })
        .collect::<Result<Vec<_>>>()?;
    let l2 = error_l2(mesh, coeffs, exact.value, t, rule)?;
    Ok(energy_from(l2, kx, ky, derivs.into_iter()))
}

/// `‖u_h − I_h u(·, t)‖_{(α,β)}`: the norm of the discrete error against the
/// nodal interpolant. Converges faster than the true error on smooth
/// solutions.
#[allow(clippy::too_many_arguments)]
pub fn error_energy_interpolant(
    mesh: &Triangulation,
    coeffs: &[f64],
    u_exact: Exact,
    t: f64,
    alpha: f64,
    beta: f64,
    kx: f64,
    ky: f64,
    rule: &TriangleRule,
) -> Result<f64> {
    check_len(mesh, coeffs)?;
    let e = discrete_error(mesh, coeffs, u_exact, t);
    let (kern_x, kern_y) = (RlKernel::new(alpha)?, RlKernel::new(beta)?);
    let per_cell: Vec<Vec<(f64, f64, f64)>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| -> Result<Vec<(f64, f64, f64)>> {
            let inf_x = influence_elements(mesh, c, Direction::LEFT);
            let inf_y = influence_elements(mesh, c, Direction::DOWN);
            map_rule_to_cell(rule, mesh, c)
                .into_iter()
                .map(|q| {
                    let px = integral_path(mesh, &inf_x, (q.x, q.y), Direction::LEFT)?;
                    let py = integral_path(mesh, &inf_y, (q.x, q.y), Direction::DOWN)?;
                    Ok((
                        q.weight,
                        basis_derivs_along_path(mesh, &px, &kern_x)?.dot(&e),
                        basis_derivs_along_path(mesh, &py, &kern_y)?.dot(&e),
                    ))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let l2 = error_l2(mesh, &e, &|_, _, _| 0.0, 0.0, rule)?;
    Ok(energy_from(l2, kx, ky, per_cell.into_iter().flatten()))
}

/// Area of `{u_h > threshold}`, exact for the piecewise linear `u_h`.
pub fn superlevel_area(mesh: &Triangulation, coeffs: &[f64], threshold: f64) -> Result<f64> {
    check_len(mesh, coeffs)?;
    let mut area = 0.0;
    for (c, cell) in mesh.cells().iter().enumerate() {
        let pts = mesh.cell_points(c);
        let vals: Vec<f64> = cell.v.iter().map(|&v| coeffs[v] - threshold).collect();
        // Clip the triangle against the half-plane where the linear function is positive.
        let mut poly: Vec<[f64; 2]> = Vec::with_capacity(4);
        for i in 0..3 {
            let j = (i + 1) % 3;
            let (vi, vj) = (vals[i], vals[j]);
            if vi > 0.0 {
                poly.push(pts[i]);
            }
            if (vi > 0.0) != (vj > 0.0) {
                let s = vi / (vi - vj);
                poly.push([
                    pts[i][0] + s * (pts[j][0] - pts[i][0]),
                    pts[i][1] + s * (pts[j][1] - pts[i][1]),
                ]);
            }
        }
        let n = poly.len();
        let twice: f64 = (0..n)
            .map(|k| {
                let (p, q) = (poly[k], poly[(k + 1) % n]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum();
        area += 0.5 * twice.abs();
    }
    Ok(area)
}

/// How the time step follows the mesh size along a ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauRule {
    HSquared,
    H,
    Fixed(f64),
}

impl TauRule {
    pub fn tau(&self, h: f64) -> f64 {
        match *self {
            TauRule::HSquared => h * h,
            TauRule::H => h,
            TauRule::Fixed(t) => t,
        }
    }
}

impl std::str::FromStr for TauRule {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h2" => Ok(TauRule::HSquared),
            "h" => Ok(TauRule::H),
            other => match other.parse::<f64>() {
                Ok(t) if t > 0.0 && t.is_finite() => Ok(TauRule::Fixed(t)),
                _ => Err(FemError::InvalidParameter(format!(
                    "time step must be h2, h or a positive number, got {other:?}"
                ))),
            },
        }
    }
}

impl std::fmt::Display for TauRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TauRule::HSquared => write!(f, "h2"),
            TauRule::H => write!(f, "h"),
            TauRule::Fixed(t) => write!(f, "{t}"),
        }
    }
}

/// One rung of a convergence table. Orders are `None` on the first rung.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub h: f64,
    pub tau: f64,
    pub error_l2: f64,
    pub error_linf: f64,
    pub error_energy: f64,
    pub order_l2: Option<f64>,
    pub order_linf: Option<f64>,
    pub order_energy: Option<f64>,
}

/// `log(e_prev/e_curr) / log(h_prev/h_curr)`.
pub fn observed_order(e_prev: f64, e_curr: f64, h_prev: f64, h_curr: f64) -> f64 {
    (e_prev / e_curr).ln() / (h_prev / h_curr).ln()
}

/// Fills the order columns from consecutive rungs.
pub fn fill_orders(records: &mut [ConvergenceRecord]) {
    for i in 1..records.len() {
        let (p, c) = (records[i - 1].clone(), &mut records[i]);
        c.order_l2 = Some(observed_order(p.error_l2, c.error_l2, p.h, c.h));
        c.order_linf = Some(observed_order(p.error_linf, c.error_linf, p.h, c.h));
        c.order_energy = Some(observed_order(p.error_energy, c.error_energy, p.h, c.h));
    }
}

/// Errors of one solve at nominal mesh size `h`.
pub fn run_rung(problem: &ProblemSpec, h: f64, tau_rule: TauRule, final_time: f64, opts: &RunOptions) -> Result<ConvergenceRecord> {
    let exact = ExactSolution::of(problem)
        .ok_or_else(|| FemError::InvalidParameter(format!("problem {} has no exact solution", problem.name)))?;
    let mesh = problem.domain.mesh(h)?;
    let rule = triangle_rule(opts.quadrature_degree)?;
    let table = FracDerivTable::build(&mesh, problem.alpha, problem.beta, &rule)?;
    let a = crate::assembly::stiffness_from_table(&mesh, &table, problem.kx, problem.ky);
    let grid = TimeGrid::with_step(final_time, tau_rule.tau(h))?;
    let traj = begm_solve_with_stiffness(&mesh, problem, &a, &grid, opts)?;
    let u = &traj.final_state.u;
    let t = grid.final_time();
    Ok(ConvergenceRecord {
        h,
        tau: grid.tau(),
        error_l2: error_l2(&mesh, u, exact.value, t, &rule)?,
        error_linf: error_linf(&mesh, u, exact.value, t)?,
        error_energy: error_energy_with_table(&mesh, &table, u, &exact, t, problem.kx, problem.ky, &rule)?,
        order_l2: None,
        order_linf: None,
        order_energy: None,
    })
}

/// Runs the scheme on each mesh size of `ladder` (coarse to fine) and
/// records errors at `final_time` with observed orders.
pub fn convergence_study(
    problem: &ProblemSpec,
    ladder: &[f64],
    tau_rule: TauRule,
    final_time: f64,
    opts: &RunOptions,
) -> Result<Vec<ConvergenceRecord>> {
    if ladder.len() < 3 {
        return Err(FemError::InvalidParameter(format!(
            "a convergence study needs at least 3 mesh sizes, got {}",
            ladder.len()
        )));
    }
    for (i, h) in ladder.iter().enumerate() {
        if !(*h > 0.0) {
            return Err(FemError::InvalidParameter(format!("mesh size must be positive, got {h}")));
        }
        if ladder[..i].iter().any(|g| (g - h).abs() <= 1e-12 * h) {
            return Err(FemError::InvalidParameter(format!("duplicate mesh size {h} in ladder")));
        }
    }
    let mut records = ladder
        .iter()
        .map(|&h| run_rung(problem, h, tau_rule, final_time, opts))
        .collect::<Result<Vec<_>>>()?;
    fill_orders(&mut records);
    Ok(records)
}

pub const CSV_HEADER: &str = "h,tau,error_l2,error_linf,error_energy,order_l2,order_linf,order_energy";

/// CSV text of `records`; numbers in `%.6e` style, orders blank when absent.
pub fn format_csv(records: &[ConvergenceRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let opt = |o: Option<f64>| o.map(|v| format!("{v:.6e}")).unwrap_or_default();
    for r in records {
        let _ = writeln!(
            out,
            "{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{},{},{}",
            r.h,
            r.tau,
            r.error_l2,
            r.error_linf,
            r.error_energy,
            opt(r.order_l2),
            opt(r.order_linf),
            opt(r.order_energy)
        );
    }
    out
}

pub fn write_csv(records: &[ConvergenceRecord], path: &Path) -> Result<()> {
    fs::write(path, format_csv(records))?;
    Ok(())
}

/// Parses text written by [`format_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ConvergenceRecord>> {
    let origin = Path::new("<csv>");
    let err = |line: usize, msg: String| FemError::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(err(1, "missing header".into())),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let fields: Vec<&str> = l.split(',').collect();
            if fields.len() != 8 {
                return Err(err(i + 1, format!("expected 8 fields, got {}", fields.len())));
            }
            let num = |k: usize| -> Result<f64> {
                fields[k]
                    .trim()
                    .parse()
                    .map_err(|e| err(i + 1, format!("field {}: {e}", k + 1)))
            };
            let opt = |k: usize| -> Result<Option<f64>> {
                if fields[k].trim().is_empty() {
                    Ok(None)
                } else {
                    num(k).map(Some)
                }
            };
            Ok(ConvergenceRecord {
                h: num(0)?,
                tau: num(1)?,
                error_l2: num(2)?,
                error_linf: num(3)?,
                error_energy: num(4)?,
                order_l2: opt(5)?,
                order_linf: opt(6)?,
                order_energy: opt(7)?,
            })
        })
        .collect()
}

/// Legacy VTK (ASCII) unstructured grid with one point-data scalar per field.
pub fn write_vtk(mesh: &Triangulation, fields: &[(&str, &[f64])], out: &mut impl Write) -> Result<()> {
    for (_, f) in fields {
        check_len(mesh, f)?;
    }
    writeln!(out, "# vtk DataFile Version 2.0")?;
    writeln!(out, "fracfem field")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_vertices())?;
    for v in mesh.vertices() {
        writeln!(out, "{} {} 0", v.x, v.y)?;
    }
    writeln!(out, "CELLS {} {}", mesh.num_cells(), 4 * mesh.num_cells())?;
    for c in mesh.cells() {
        writeln!(out, "3 {} {} {}", c.v[0], c.v[1], c.v[2])?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.num_cells())?;
    for _ in mesh.cells() {
        writeln!(out, "5")?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.num_vertices())?;
    }
    for (name, f) in fields {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in *f {
            writeln!(out, "{v}")?;
        }
    }
    Ok(())
}

/// Writes `coeffs` as the point field `u`.
pub fn write_field(mesh: &Triangulation, coeffs: &[f64], path: &Path) -> Result<()> {
    write_fields(mesh, &[("u", coeffs)], path)
}

pub fn write_fields(mesh: &Triangulation, fields: &[(&str, &[f64])], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    write_vtk(mesh, fields, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Solves on `mesh` directly and returns the three errors at the final time.
pub fn errors_on_mesh(
    mesh: &Triangulation,
    problem: &ProblemSpec,
    grid: &TimeGrid,
    opts: &RunOptions,
) -> Result<(Vec<f64>, Option<(f64, f64, f64)>)> {
    let rule = triangle_rule(opts.quadrature_degree)?;
    let a = assemble_stiffness(mesh, problem.alpha, problem.beta, problem.kx, problem.ky, &rule)?;
    let traj = begm_solve_with_stiffness(mesh, problem, &a, grid, opts)?;
    let u = traj.final_state.u;
    let errs = match ExactSolution::of(problem) {
        Some(ex) => {
            let t = grid.final_time();
            Some((
                error_l2(mesh, &u, ex.value, t, &rule)?,
                error_linf(mesh, &u, ex.value, t)?,
                error_energy(mesh, &u, &ex, t, problem.alpha, problem.beta, problem.kx, problem.ky, &rule)?,
            ))
        }
        None => None,
    };
    Ok((u, errs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_pentagon_mesh, generate_square_mesh};

    #[test]
    fn interpolant_of_linear_has_zero_error() {
        let m = generate_pentagon_mesh(4).unwrap();
        let rule = triangle_rule(4).unwrap();
        let u = |x: f64, y: f64, _t: f64| 0.3 + 2.0 * x - 1.5 * y;
        let c = m.interpolate(|x, y| u(x, y, 0.0));
        assert!(error_l2(&m, &c, &u, 0.0, &rule).unwrap() < 1e-12);
        assert!(error_linf(&m, &c, &u, 0.0).unwrap() < 1e-12);
        assert!(error_energy_interpolant(&m, &c, &u, 0.0, 0.8, 0.7, 1.0, 1.0, &rule).unwrap() < 1e-12);
        let grad = |_: f64, _: f64, _: f64| [2.0, -1.5];
        let ex = ExactSolution {
            value: &u,
            gradient: &grad,
            domain: Domain::Pentagon,
        };
        assert!(error_energy(&m, &c, &ex, 0.0, 0.8, 0.7, 1.0, 1.0, &rule).unwrap() < 1e-9);
    }

    #[test]
    fn norms_are_homogeneous() {
        let m = generate_square_mesh(5).unwrap();
        let rule = triangle_rule(4).unwrap();
        let u = |x: f64, y: f64, _t: f64| (x * y * 7.0).sin();
        let zero = |_: f64, _: f64, _: f64| 0.0;
        let c = m.interpolate(|x, y| u(x, y, 0.0) + 0.1 * x);
        let c3: Vec<f64> = c.iter().map(|v| -3.0 * v).collect();
        let e1 = error_l2(&m, &c, &zero, 0.0, &rule).unwrap();
        let e3 = error_l2(&m, &c3, &zero, 0.0, &rule).unwrap();
        assert!((e3 - 3.0 * e1).abs() < 1e-12 * e3);
        let n1 = error_energy_interpolant(&m, &c, &zero, 0.0, 0.8, 0.8, 1.0, 1.0, &rule).unwrap();
        let n3 = error_energy_interpolant(&m, &c3, &zero, 0.0, 0.8, 0.8, 1.0, 1.0, &rule).unwrap();
        assert!((n3 - 3.0 * n1).abs() < 1e-12 * n3);
        // Energy norm dominates the L² part and the weighted x-seminorm.
        let only_x = error_energy_interpolant(&m, &c, &zero, 0.0, 0.8, 0.8, 2.0, 1e-300, &rule).unwrap();
        assert!(n1 >= e1);
        let more = error_energy_interpolant(&m, &c, &zero, 0.0, 0.8, 0.8, 2.0, 1.0, &rule).unwrap();
        assert!(more >= only_x);
    }

    #[test]
    fn linf_covers_nodes() {
        let m = generate_square_mesh(3).unwrap();
        let u = |x: f64, y: f64, _t: f64| x * x + y;
        let c = vec![0.0; m.num_vertices()];
        let nodes = m.vertices().iter().map(|p| u(p.x, p.y, 0.0).abs()).fold(0.0, f64::max);
        assert!(error_linf(&m, &c, &u, 0.0).unwrap() >= nodes);
    }

    #[test]
    fn energy_norm_of_exact_solution_matches_power_rule() {
        use statrs::function::gamma::gamma;
        let m = generate_square_mesh(6).unwrap();
        let rule = triangle_rule(4).unwrap();
        let p = crate::problems::example1_spec(0.8, 0.7, 1.0, 2.0).unwrap();
        let ex = ExactSolution::of(&p).unwrap();
        let zero = vec![0.0; m.num_vertices()];
        let got = error_energy(&m, &zero, &ex, 0.0, 0.8, 0.7, 1.0, 2.0, &rule).unwrap();
        let bump = |s: f64| s * s * (1.0 - s) * (1.0 - s);
        let d = |s: f64, mu: f64| {
            let k = |p: f64| gamma(p + 1.0) / gamma(p + 1.0 - mu) * s.powf(p - mu);
            k(2.0) - 2.0 * k(3.0) + k(4.0)
        };
        let mut sum = 0.0;
        for c in 0..m.num_cells() {
            for q in map_rule_to_cell(&rule, &m, c) {
                let u = 10.0 * bump(q.x) * bump(q.y);
                let dx = 10.0 * d(q.x, 0.8) * bump(q.y);
                let dy = 10.0 * bump(q.x) * d(q.y, 0.7);
                sum += q.weight * (u * u + dx * dx + 2.0 * dy * dy);
            }
        }
        assert!((got - sum.sqrt()).abs() < 1e-9 * got, "{got} vs {}", sum.sqrt());
    }

    #[test]
    fn orders_and_ladder_checks() {
        assert!((observed_order(4.0, 1.0, 0.2, 0.1) - 2.0).abs() < 1e-15);
        let p = crate::problems::example1_spec(0.8, 0.8, 1.0, 1.0).unwrap();
        let o = RunOptions::default();
        assert!(convergence_study(&p, &[0.5, 0.25], TauRule::H, 1.0, &o).is_err());
        assert!(convergence_study(&p, &[0.5, 0.25, 0.5], TauRule::H, 1.0, &o).is_err());
        assert_eq!("h2".parse::<TauRule>().unwrap(), TauRule::HSquared);
        assert_eq!("0.01".parse::<TauRule>().unwrap(), TauRule::Fixed(0.01));
        assert!("-1".parse::<TauRule>().is_err());
    }

    #[test]
    fn small_study_and_csv_round_trip() {
        let p = crate::problems::example1_spec(0.8, 0.8, 1.0, 1.0).unwrap();
        let recs = convergence_study(&p, &[0.5, 0.25, 0.125], TauRule::H, 0.25, &RunOptions::default()).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs[0].order_l2.is_none() && recs[2].order_l2.is_some());
        let text = format_csv(&recs);
        assert!(text.starts_with(CSV_HEADER));
        let back = parse_csv(&text).unwrap();
        for (a, b) in recs.iter().zip(&back) {
            assert!((a.error_l2 - b.error_l2).abs() <= 1e-6 * a.error_l2);
            assert!((a.order_energy.unwrap_or(0.0) - b.order_energy.unwrap_or(0.0)).abs() <= 1e-6);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_csv(&recs, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), text);
    }

    #[test]
    fn superlevel_area_of_linear_field() {
        let m = generate_square_mesh(7).unwrap();
        let c = m.interpolate(|x, _| x);
        for thr in [0.0 - 1e-9, 0.3, 0.55, 1.0] {
            let a = superlevel_area(&m, &c, thr).unwrap();
            assert!((a - (1.0 - thr.max(0.0))).abs() < 1e-12, "{thr}: {a}");
        }
        let d = m.interpolate(|x, y| x + y);
        assert!((superlevel_area(&m, &d, 1.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn vtk_layout() {
        let m = generate_square_mesh(3).unwrap();
        let zero = vec![0.0; m.num_vertices()];
        let mut buf = Vec::new();
        write_vtk(&m, &[("u", &zero)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 2.0"));
        assert!(text.contains(&format!("CELLS {} {}", m.num_cells(), 4 * m.num_cells())));
        assert!(text.contains(&format!("CELL_TYPES {}", m.num_cells())));
        let data: Vec<&str> = text.split("LOOKUP_TABLE default\n").nth(1).unwrap().lines().collect();
        assert_eq!(data.len(), m.num_vertices());
        assert!(data.iter().all(|l| *l == "0"));
        assert!(write_vtk(&m, &[("u", &[0.0])], &mut Vec::new()).is_err());
    }
}
