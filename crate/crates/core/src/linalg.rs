//! Linear solvers for the time-step systems.
//!
//! Systems are solved with Jacobi-preconditioned BiCGSTAB started from a
//! caller-supplied guess. Small systems that fail to converge fall back to
//! dense LU.

use std::fmt;
use std::time::{Duration, Instant};

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{FemError, Result};
use crate::sparse::SparseMatrix;

/// Relative residual target `‖b − Ax‖ / ‖b‖`.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Largest system handed to the dense fallback.
pub const DENSE_FALLBACK_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    BiCgStab,
    DenseLu,
}

impl fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveMethod::BiCgStab => write!(f, "bicgstab"),
            SolveMethod::DenseLu => write!(f, "dense-lu"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    pub iterations: usize,
    /// Recomputed from the returned solution, not taken from the recurrence.
    pub relative_residual: f64,
    pub wall_time: Duration,
    pub method: SolveMethod,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: 5000,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

/// Relative residual of `x`; absolute when `b = 0`.
pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r = norm(&residual(a, x, b));
    let nb = norm(b);
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}

fn bicgstab(a: &SparseMatrix, b: &[f64], x: &mut [f64], opts: &SolverOptions) -> (usize, bool) {
    let n = b.len();
    let nb = norm(b);
    if nb == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return (0, true);
    }
    let target = opts.tolerance * nb;
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precond = |v: &[f64], out: &mut [f64]| {
        for ((o, vi), di) in out.iter_mut().zip(v).zip(&inv_diag) {
            *o = vi * di;
        }
    };

    let mut r = residual(a, x, b);
    if norm(&r) <= target {
        return (0, true);
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];

    for it in 1..=opts.max_iterations {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return (it, false);
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut y);
        a.mul_vec_into(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            return (it, false);
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= target {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return (it, true);
        }
        precond(&s, &mut z);
        a.mul_vec_into(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= target {
            return (it, true);
        }
    }
    (opts.max_iterations, false)
}

fn dense_lu(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    let mut d = DMatrix::<f64>::zeros(n, n);
    for r in 0..n {
        for (c, v) in a.row(r) {
            d[(r, c)] = v;
        }
    }
    d.lu()
        .solve(&DVector::from_column_slice(b))
        .map(|x| x.as_slice().to_vec())
        .ok_or(FemError::SingularMatrix)
}

fn check_dims(a: &SparseMatrix, b: &[f64], guess: Option<&[f64]>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(FemError::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    for len in std::iter::once(b.len()).chain(guess.map(<[f64]>::len)) {
        if len != a.nrows() {
            return Err(FemError::DimensionMismatch {
                expected: a.nrows(),
                got: len,
            });
        }
    }
    Ok(())
}

/// Solves `A x = b` starting from `guess`.
pub fn solve_with_guess(
    a: &SparseMatrix,
    b: &[f64],
    guess: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(a, b, Some(guess))?;
    let start = Instant::now();
    let mut x = guess.to_vec();
    let (iterations, converged) = bicgstab(a, b, &mut x, opts);
    let mut rel = relative_residual(a, &x, b);
    let mut method = SolveMethod::BiCgStab;
    if !converged || !(rel <= opts.tolerance * 10.0) {
        if a.nrows() > DENSE_FALLBACK_LIMIT {
            return Err(FemError::NoConvergence {
                iterations,
                residual: rel,
            });
        }
        warn!("bicgstab stalled after {iterations} iterations (residual {rel:.3e}); using dense LU");
        x = dense_lu(a, b)?;
        rel = relative_residual(a, &x, b);
        method = SolveMethod::DenseLu;
    }
    Ok((
        x,
        SolveReport {
            iterations,
            relative_residual: rel,
            wall_time: start.elapsed(),
            method,
        },
    ))
}

/// Solves `A x = b` from a zero start.
pub fn solve(a: &SparseMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(a, b, None)?;
    solve_with_guess(a, b, &vec![0.0; b.len()], &SolverOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_mass;
    use crate::mesh::generate_square_mesh;
    use rand::{Rng, SeedableRng};

    /// Gaussian elimination with partial pivoting on a dense copy.
    fn dense_oracle(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for r in (col + 1)..n {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = ((r + 1)..n).map(|c| a[r][c] * x[c]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn identity_returns_rhs() {
        let b = vec![1.0, -2.0, 3.5];
        let (x, rep) = solve(&SparseMatrix::identity(3), &b).unwrap();
        assert_eq!(x, b);
        assert!(rep.relative_residual < 1e-15);
    }

    #[test]
    fn mass_times_ones() {
        let m = assemble_mass(&generate_square_mesh(6).unwrap());
        let ones = vec![1.0; m.nrows()];
        let b = m.mul_vec(&ones);
        let (x, rep) = solve(&m, &b).unwrap();
        assert!(rep.relative_residual <= DEFAULT_TOLERANCE);
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn random_spd_matches_dense_elimination() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let n = 50;
        let g: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                dense[i][j] = (0..n).map(|k| g[k][i] * g[k][j]).sum::<f64>();
            }
            dense[i][i] += n as f64;
        }
        let trip: Vec<_> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, dense[i][j]))
            .collect();
        let a = SparseMatrix::from_triplets(n, n, &trip);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, _) = solve(&a, &b).unwrap();
        let expect = dense_oracle(dense, b);
        let scale = expect.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (u, v) in x.iter().zip(&expect) {
            assert!((u - v).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn warm_start_at_solution_takes_no_iterations() {
        let m = assemble_mass(&generate_square_mesh(4).unwrap());
        let x0: Vec<f64> = (0..m.nrows()).map(|i| i as f64).collect();
        let b = m.mul_vec(&x0);
        let (_, rep) = solve_with_guess(&m, &b, &x0, &SolverOptions::default()).unwrap();
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn singular_system_is_reported() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        let r = solve(&a, &[1.0, 0.0]);
        assert!(matches!(r, Err(FemError::SingularMatrix)) || r.unwrap().1.relative_residual > 1e-3);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            solve(&SparseMatrix::identity(3), &[1.0]),
            Err(FemError::DimensionMismatch { .. })
        ));
    }
}
