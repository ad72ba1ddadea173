//! Self-checks comparing the production code against the independent oracles.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use statrs::function::gamma::gamma;

use crate::assembly::{apply_dirichlet, assemble_mass, assemble_stiffness};
use crate::error::Result;
use crate::fracderiv::{basis_derivs_along_path, eval_frac_deriv_of_fe_function, RlKernel};
use crate::fracpath::{influence_all, integral_path, Direction};
use crate::mesh::{generate_pentagon_mesh, generate_square_mesh, Triangulation};
use crate::oracle::{gl_deriv, rl_deriv_quadrature, stiffness_entry_oracle, OracleConfig};
use crate::quadrature::{map_rule_to_cell, triangle_rule, DEFAULT_DEGREE};

/// Outcome of one check; `worst` is the largest observed deviation.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub limit: f64,
}

impl Check {
    fn new(name: impl Into<String>, worst: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: worst <= limit,
            worst,
            limit,
        }
    }

    fn from_result(name: impl Into<String>, r: Result<(f64, f64)>) -> Self {
        let name = name.into();
        match r {
            Ok((worst, limit)) => Self::new(name, worst, limit),
            Err(e) => {
                log::error!("{name}: {e}");
                Self {
                    name,
                    passed: false,
                    worst: f64::NAN,
                    limit: f64::NAN,
                }
            }
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: worst {:.3e} (limit {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.limit
        )
    }
}

/// Oracle quadrature of `D^μ t^p` against `Γ(p+1)/Γ(p+1−μ) x^{p−μ}`.
pub fn oracle_power_rule() -> Check {
    let cfg = OracleConfig::default();
    let run = || -> Result<(f64, f64)> {
        let mut worst: f64 = 0.0;
        for p in 0..=4 {
            let pf = p as f64;
            for mu in [0.3, 0.6, 0.9] {
                let x = 0.7;
                let f = |t: f64| t.powi(p);
                let df = |t: f64| if p == 0 { 0.0 } else { pf * t.powi(p - 1) };
                let got = rl_deriv_quadrature(&f, &df, 0.0, x, mu, &[], &cfg)?;
                let expect = gamma(pf + 1.0) / gamma(pf + 1.0 - mu) * x.powf(pf - mu);
                worst = worst.max((got - expect).abs());
            }
        }
        Ok((worst, 1e-8))
    };
    Check::from_result("oracle power rule", run())
}

/// Grünwald-Letnikov sum against oracle quadrature for `f(t) = t²`.
pub fn grunwald_agreement() -> Check {
    let cfg = OracleConfig::default();
    let run = || -> Result<(f64, f64)> {
        let (x, mu, step): (f64, f64, f64) = (0.8, 0.6, 1e-4);
        let n = (x / step).round() as usize;
        let samples: Vec<f64> = (0..=n).map(|k| (k as f64 * step).powi(2)).collect();
        let gl = gl_deriv(&samples, mu, step);
        let q = rl_deriv_quadrature(&|t| t * t, &|t| 2.0 * t, 0.0, x, mu, &[], &cfg)?;
        Ok(((gl - q).abs(), (10.0 * step).max(1e-6)))
    };
    Check::from_result("Grunwald-Letnikov vs quadrature", run())
}

/// Closed-form path derivative of the interpolant of `x` against the power rule.
pub fn fracderiv_power_rule() -> Check {
    let run = || -> Result<(f64, f64)> {
        let m = generate_square_mesh(8)?;
        let u = m.interpolate(|x, _| x);
        let mut worst: f64 = 0.0;
        for &(x, y) in &[(0.31, 0.47), (0.77, 0.12), (0.52, 0.93)] {
            for mu in [0.6, 0.8, 0.95] {
                let got = eval_frac_deriv_of_fe_function(&m, &u, (x, y), mu, Direction::LEFT)?;
                worst = worst.max((got - x.powf(1.0 - mu) / gamma(2.0 - mu)).abs());
            }
        }
        Ok((worst, 1e-12))
    };
    Check::from_result("path derivative power rule", run())
}

/// Sum of all basis derivatives at a point equals the derivative of 1.
pub fn partition_of_unity(mesh: &Triangulation, mu: f64, label: &str) -> Check {
    let run = || -> Result<(f64, f64)> {
        let rule = triangle_rule(DEFAULT_DEGREE)?;
        let kernel = RlKernel::new(mu)?;
        let mut worst: f64 = 0.0;
        for c in 0..mesh.num_cells() {
            let influence = influence_all(mesh, c);
            for q in map_rule_to_cell(&rule, mesh, c) {
                for (d, dir) in Direction::ALL.iter().enumerate() {
                    let path = integral_path(mesh, &influence[d], (q.x, q.y), *dir)?;
                    let map = basis_derivs_along_path(mesh, &path, &kernel)?;
                    let expect = path.length().powf(-mu) / gamma(1.0 - mu);
                    worst = worst.max((map.sum() - expect).abs() / expect);
                }
            }
        }
        Ok((worst, 1e-10))
    };
    Check::from_result(format!("partition of unity ({label}, mu={mu})"), run())
}

/// Assembled stiffness against the quadrature oracle, entrywise. Entries are
/// compared relative to their size, with a floor of `1e-3·max|A|`.
pub fn stiffness_vs_oracle(n: usize, alpha: f64, beta: f64) -> Check {
    let run = || -> Result<(f64, f64)> {
        let m = generate_square_mesh(n)?;
        let rule = triangle_rule(DEFAULT_DEGREE)?;
        let cfg = OracleConfig::default();
        let a = assemble_stiffness(&m, alpha, beta, 1.0, 1.0, &rule)?;
        let floor = 1e-3 * a.max_abs();
        let mut worst: f64 = 0.0;
        for k in 0..m.num_vertices() {
            for l in 0..m.num_vertices() {
                let o = stiffness_entry_oracle(&m, k, l, alpha, beta, 1.0, 1.0, &rule, &cfg)?;
                worst = worst.max((a.get(k, l) - o).abs() / o.abs().max(floor));
            }
        }
        Ok((worst, 1e-6))
    };
    Check::from_result(format!("stiffness vs oracle (n={n}, alpha={alpha}, beta={beta})"), run())
}

/// Relative asymmetry of the stiffness matrix.
pub fn stiffness_symmetry(mesh: &Triangulation, alpha: f64, beta: f64, label: &str) -> Check {
    let run = || -> Result<(f64, f64)> {
        let a = assemble_stiffness(mesh, alpha, beta, 1.0, 1.0, &triangle_rule(DEFAULT_DEGREE)?)?;
        Ok((a.max_asymmetry() / a.max_abs(), 1e-10))
    };
    Check::from_result(format!("stiffness symmetry ({label}, alpha={alpha}, beta={beta})"), run())
}

/// Smallest `uᵀAu / uᵀu` over random free vectors; the check passes when
/// it is positive.
pub fn stiffness_positivity(mesh: &Triangulation, alpha: f64, beta: f64, trials: usize, seed: u64, label: &str) -> Check {
    let run = || -> Result<(f64, f64)> {
        let full = assemble_stiffness(mesh, alpha, beta, 1.0, 1.0, &triangle_rule(DEFAULT_DEGREE)?)?;
        let a = apply_dirichlet(mesh, &full);
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut lowest = f64::INFINITY;
        for _ in 0..trials {
            let u: Vec<f64> = (0..a.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let au = a.mul_vec(&u);
            let q: f64 = u.iter().zip(&au).map(|(x, y)| x * y).sum();
            let nn: f64 = u.iter().map(|x| x * x).sum();
            lowest = lowest.min(q / nn);
        }
        // Reported as a deviation: pass iff -lowest < 0.
        Ok((-lowest, 0.0))
    };
    let mut c = Check::from_result(format!("stiffness positivity ({label}, alpha={alpha}, beta={beta})"), run());
    c.passed = c.worst < 0.0;
    c
}

/// Cholesky of the reduced mass matrix succeeds.
pub fn mass_spd(mesh: &Triangulation, label: &str) -> Check {
    let m = apply_dirichlet(mesh, &assemble_mass(mesh));
    let n = m.nrows();
    let mut d = DMatrix::<f64>::zeros(n, n);
    for r in 0..n {
        for (c, v) in m.row(r) {
            d[(r, c)] = v;
        }
    }
    let ok = d.cholesky().is_some();
    Check {
        name: format!("mass matrix SPD ({label})"),
        passed: ok,
        worst: if ok { 0.0 } else { 1.0 },
        limit: 0.0,
    }
}

/// The quick suite run by `fracfem validate`.
pub fn run_suite(seed: u64) -> Vec<Check> {
    let mut out = vec![oracle_power_rule(), grunwald_agreement(), fracderiv_power_rule()];
    let meshes: Vec<(&str, Triangulation)> = [
        ("square", generate_square_mesh(5)),
        ("pentagon", generate_pentagon_mesh(5)),
    ]
    .into_iter()
    .filter_map(|(l, m)| m.ok().map(|m| (l, m)))
    .collect();
    for (label, m) in &meshes {
        out.push(partition_of_unity(m, 0.75, label));
        out.push(stiffness_symmetry(m, 0.8, 0.65, label));
        out.push(stiffness_positivity(m, 0.8, 0.65, 20, seed, label));
        out.push(mass_spd(m, label));
    }
    out.push(stiffness_vs_oracle(2, 0.75, 0.75));
    out.push(stiffness_vs_oracle(3, 0.6, 0.9));
    out
}
