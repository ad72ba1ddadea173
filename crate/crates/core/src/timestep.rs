//! Backward Euler Galerkin time stepping and the FitzHugh-Nagumo splitting.
//!
//! Each step solves
//! `(M + τA − τD) uⁿ = (M − τD) u^{n−1} + τ b₁ + τ b₂`
//! where `D` and `b₁` linearize `F` about `u^{n−1}` and `b₂` is the source at
//! `t_n`. `M` and `A` are fixed; `D` is re-assembled into a precomputed
//! pattern every step.

use std::time::Duration;

use log::{debug, warn};

use crate::assembly::{
    accumulate_reaction, assemble_mass, assemble_stiffness, load_nonlinear, load_source, DofMap, ElementPattern,
    QuadratureCache,
};
use crate::error::{FemError, Result};
use crate::linalg::{solve_with_guess, SolveReport, SolverOptions};
use crate::mesh::Triangulation;
use crate::problems::{FhnSpec, ProblemSpec};
use crate::quadrature::{triangle_rule, TriangleRule, DEFAULT_DEGREE};
use crate::sparse::SparseMatrix;

/// Uniform time grid `t_n = nτ`, `n = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    tau: f64,
    steps: usize,
    final_time: f64,
}

impl TimeGrid {
    pub fn new(final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(FemError::InvalidParameter(format!("final time must be positive, got {final_time}")));
        }
        if steps == 0 {
            return Err(FemError::InvalidParameter("number of time steps must be at least 1".into()));
        }
        Ok(Self {
            tau: final_time / steps as f64,
            steps,
            final_time,
        })
    }

    /// Grid with step as close to `tau` as possible while dividing `final_time`.
    pub fn with_step(final_time: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(FemError::InvalidParameter(format!("time step must be positive, got {tau}")));
        }
        let steps = (final_time / tau - 1e-9).ceil().max(1.0) as usize;
        Self::new(final_time, steps)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.final_time
        } else {
            n as f64 * self.tau
        }
    }
}

/// Coefficients on all mesh nodes; boundary entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub step: usize,
    pub u: Vec<f64>,
    /// Recovery variable (FitzHugh-Nagumo only).
    pub w: Option<Vec<f64>>,
}

/// Nodal interpolant of `phi` with boundary values zeroed.
pub fn begm_init(mesh: &Triangulation, phi: &dyn Fn(f64, f64) -> f64) -> SchemeState {
    let u = mesh
        .vertices()
        .iter()
        .map(|p| if p.on_boundary { 0.0 } else { phi(p.x, p.y) })
        .collect();
    SchemeState { step: 0, u, w: None }
}

/// Cached operators for repeated steps with a fixed `τ`.
pub struct BegmStepper<'a> {
    mesh: &'a Triangulation,
    problem: &'a ProblemSpec,
    tau: f64,
    dofs: DofMap,
    quad: QuadratureCache,
    pattern: ElementPattern,
    mass: SparseMatrix,
    /// Reduced `M + τA` in the system pattern.
    base: Vec<f64>,
    system: SparseMatrix,
    /// Position in `system` of each element-pattern entry with free row and column.
    reaction_slots: Vec<Option<usize>>,
    reaction: Vec<f64>,
    options: SolverOptions,
}

impl<'a> BegmStepper<'a> {
    /// `stiffness` is the full-node fractional stiffness matrix.
    pub fn new(
        mesh: &'a Triangulation,
        problem: &'a ProblemSpec,
        stiffness: &SparseMatrix,
        tau: f64,
        rule: &TriangleRule,
    ) -> Result<Self> {
        let n = mesh.num_vertices();
        if stiffness.nrows() != n || stiffness.ncols() != n {
            return Err(FemError::DimensionMismatch {
                expected: n,
                got: stiffness.nrows(),
            });
        }
        if !(tau > 0.0) {
            return Err(FemError::InvalidParameter(format!("time step must be positive, got {tau}")));
        }
        let dofs = DofMap::new(mesh);
        let pattern = ElementPattern::new(mesh);
        let mass = assemble_mass(mesh);
        let m_red = dofs.restrict_matrix(&mass);
        let a_red = dofs.restrict_matrix(stiffness);
        let (mut system, map_m, map_a) = SparseMatrix::union_pattern(&m_red, &a_red);
        {
            let vals = system.values_mut();
            for (k, &p) in map_m.iter().enumerate() {
                vals[p] += m_red.values()[k];
            }
            for (k, &p) in map_a.iter().enumerate() {
                vals[p] += tau * a_red.values()[k];
            }
        }
        let base = system.values().to_vec();
        let full = &pattern.matrix;
        let mut reaction_slots = vec![None; full.nnz()];
        for r in 0..n {
            let Some(fr) = dofs.free_index(r) else { continue };
            for k in full.row_ptr()[r]..full.row_ptr()[r + 1] {
                if let Some(fc) = dofs.free_index(full.col_idx()[k]) {
                    reaction_slots[k] = system.position(fr, fc);
                }
            }
        }
        Ok(Self {
            mesh,
            problem,
            tau,
            dofs,
            quad: QuadratureCache::new(mesh, rule),
            reaction: vec![0.0; full.nnz()],
            pattern,
            mass,
            base,
            system,
            reaction_slots,
            options: SolverOptions::default(),
        })
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Advances `u` from `t_{n−1}` to `t_n`. `extra` is an optional full-node
    /// load vector added to the right-hand side (scaled by `τ`).
    pub fn step(&mut self, u_prev: &[f64], t_n: f64, extra: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
        let tau = self.tau;
        let p = self.problem;
        self.reaction.iter_mut().for_each(|v| *v = 0.0);
        accumulate_reaction(
            self.mesh,
            &self.quad,
            &self.pattern,
            u_prev,
            &*p.nonlinearity_derivative,
            &mut self.reaction,
        );
        let vals = self.system.values_mut();
        vals.copy_from_slice(&self.base);
        for (k, slot) in self.reaction_slots.iter().enumerate() {
            if let Some(s) = slot {
                vals[*s] -= tau * self.reaction[k];
            }
        }

        let mut d = self.pattern.matrix.clone();
        d.values_mut().copy_from_slice(&self.reaction);
        let mu = self.mass.mul_vec(u_prev);
        let du = d.mul_vec(u_prev);
        let b1 = load_nonlinear(self.mesh, &self.quad, u_prev, &*p.nonlinearity);
        let b2 = load_source(self.mesh, &self.quad, &*p.source, t_n);
        let mut rhs_full: Vec<f64> = (0..u_prev.len())
            .map(|i| mu[i] - tau * du[i] + tau * (b1[i] + b2[i]))
            .collect();
        if let Some(e) = extra {
            for (r, v) in rhs_full.iter_mut().zip(e) {
                *r += tau * v;
            }
        }
        let rhs = self.dofs.restrict(&rhs_full);
        let guess = self.dofs.restrict(u_prev);
        let (x, report) = solve_with_guess(&self.system, &rhs, &guess, &self.options)?;
        Ok((self.dofs.embed(&x), report))
    }
}

/// One step from scratch; prefer [`BegmStepper`] in loops.
pub fn begm_step(
    mesh: &Triangulation,
    state: &SchemeState,
    stiffness: &SparseMatrix,
    problem: &ProblemSpec,
    tau: f64,
    t_n: f64,
) -> Result<SchemeState> {
    let rule = triangle_rule(DEFAULT_DEGREE)?;
    let mut stepper = BegmStepper::new(mesh, problem, stiffness, tau, &rule)?;
    let (u, _) = stepper.step(&state.u, t_n, None)?;
    Ok(SchemeState {
        step: state.step + 1,
        u,
        w: state.w.clone(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Keep every `k`-th state (plus the initial and final ones).
    pub snapshot_every: Option<usize>,
    pub quadrature_degree: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            snapshot_every: None,
            quadrature_degree: DEFAULT_DEGREE,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolverStats {
    pub solves: usize,
    pub total_iterations: usize,
    pub max_relative_residual: f64,
    pub solve_time: Duration,
}

impl SolverStats {
    fn record(&mut self, r: &SolveReport) {
        self.solves += 1;
        self.total_iterations += r.iterations;
        self.max_relative_residual = self.max_relative_residual.max(r.relative_residual);
        self.solve_time += r.wall_time;
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_state: SchemeState,
    /// `(t, state)` pairs in time order.
    pub snapshots: Vec<(f64, SchemeState)>,
    pub stats: SolverStats,
}

fn wants_snapshot(opts: &RunOptions, n: usize, last: usize) -> bool {
    opts.snapshot_every.is_some_and(|k| k > 0 && (n % k == 0 || n == last))
}

fn stability_check(problem: &ProblemSpec, u0: &[f64], tau: f64) {
    // τ < 1/(2(M₂ − B)) with the coercivity constant B ≥ 0 unknown.
    let m2 = u0
        .iter()
        .map(|&u| (problem.nonlinearity_derivative)(u))
        .fold(f64::NEG_INFINITY, f64::max);
    if m2 > 0.0 && 2.0 * tau * m2 >= 1.0 {
        warn!("time step {tau} may violate the stability bound: sup F'(u0) = {m2:.3e}");
    }
}

/// Runs the scheme with a precomputed full-node stiffness matrix.
pub fn begm_solve_with_stiffness(
    mesh: &Triangulation,
    problem: &ProblemSpec,
    stiffness: &SparseMatrix,
    grid: &TimeGrid,
    opts: &RunOptions,
) -> Result<Trajectory> {
    let rule = triangle_rule(opts.quadrature_degree)?;
    let mut stepper = BegmStepper::new(mesh, problem, stiffness, grid.tau(), &rule)?;
    let mut state = begm_init(mesh, &*problem.initial);
    stability_check(problem, &state.u, grid.tau());
    let mut snapshots = Vec::new();
    if wants_snapshot(opts, 0, grid.steps()) {
        snapshots.push((0.0, state.clone()));
    }
    let mut stats = SolverStats::default();
    for n in 1..=grid.steps() {
        let (u, report) = stepper.step(&state.u, grid.time(n), None)?;
        stats.record(&report);
        state = SchemeState { step: n, u, w: None };
        if wants_snapshot(opts, n, grid.steps()) {
            snapshots.push((grid.time(n), state.clone()));
        }
    }
    debug!(
        "{} steps, {} solver iterations, max residual {:.2e}",
        stats.solves, stats.total_iterations, stats.max_relative_residual
    );
    Ok(Trajectory {
        final_state: state,
        snapshots,
        stats,
    })
}

pub fn begm_solve(mesh: &Triangulation, problem: &ProblemSpec, grid: &TimeGrid, opts: &RunOptions) -> Result<Trajectory> {
    let rule = triangle_rule(opts.quadrature_degree)?;
    let a = assemble_stiffness(mesh, problem.alpha, problem.beta, problem.kx, problem.ky, &rule)?;
    begm_solve_with_stiffness(mesh, problem, &a, grid, opts)
}

/// Recovery initial data at all nodes, with the lower-region value on the
/// discontinuity line.
fn recovery_init(mesh: &Triangulation, spec: &FhnSpec) -> Vec<f64> {
    mesh.interpolate(|x, y| (spec.recovery_initial)(x, y))
}

/// FitzHugh-Nagumo by splitting: a scheme step for `u` with source `−w^{n−1}`,
/// then the explicit update `wⁿ = w^{n−1} + τε(λuⁿ − γw^{n−1} − δ)`.
pub fn fhn_simulate(mesh: &Triangulation, spec: &FhnSpec, grid: &TimeGrid, opts: &RunOptions) -> Result<Trajectory> {
    let p = &spec.problem;
    let rule = triangle_rule(opts.quadrature_degree)?;
    let a = assemble_stiffness(mesh, p.alpha, p.beta, p.kx, p.ky, &rule)?;
    let u0 = begm_init(mesh, &*p.initial).u;
    let w0 = recovery_init(mesh, spec);
    fhn_simulate_from(mesh, spec, &a, grid, opts, u0, w0)
}

/// [`fhn_simulate`] from given nodal data and stiffness matrix.
pub fn fhn_simulate_from(
    mesh: &Triangulation,
    spec: &FhnSpec,
    stiffness: &SparseMatrix,
    grid: &TimeGrid,
    opts: &RunOptions,
    u0: Vec<f64>,
    w0: Vec<f64>,
) -> Result<Trajectory> {
    let p = &spec.problem;
    let fp = spec.params;
    let tau = grid.tau();
    let rule = triangle_rule(opts.quadrature_degree)?;
    let mut stepper = BegmStepper::new(mesh, p, stiffness, tau, &rule)?;
    let dofs = stepper.dofs().clone();
    let mut state = SchemeState {
        step: 0,
        u: dofs.embed(&dofs.restrict(&u0)),
        w: Some(w0),
    };
    stability_check(p, &state.u, tau);
    let mut snapshots = Vec::new();
    if wants_snapshot(opts, 0, grid.steps()) {
        snapshots.push((0.0, state.clone()));
    }
    let mut stats = SolverStats::default();
    for n in 1..=grid.steps() {
        let w = state.w.take().expect("recovery field");
        let extra: Vec<f64> = stepper.mass().mul_vec(&w).into_iter().map(|v| -v).collect();
        let (u, report) = stepper.step(&state.u, grid.time(n), Some(&extra))?;
        stats.record(&report);
        let w_next = w
            .iter()
            .zip(&u)
            .map(|(&wi, &ui)| wi + tau * fp.epsilon * (fp.lambda * ui - fp.gamma * wi - fp.delta))
            .collect();
        state = SchemeState {
            step: n,
            u,
            w: Some(w_next),
        };
        if wants_snapshot(opts, n, grid.steps()) {
            snapshots.push((grid.time(n), state.clone()));
        }
    }
    Ok(Trajectory {
        final_state: state,
        snapshots,
        stats,
    })
}
