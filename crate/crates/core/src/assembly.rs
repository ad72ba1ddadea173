//! Global matrices and load vectors.
//!
//! All assemblers work on the full node set; [`DofMap`] removes the
//! homogeneous Dirichlet rows and columns afterwards.
//!
//! The fractional stiffness matrix is nonlocal. For every Gauss point the
//! four directional derivative maps are computed once ([`FracDerivTable`]);
//! each matrix row is then accumulated independently by walking, for its
//! node, the Gauss points where that node's derivative is nonzero. Rows are
//! owned by exactly one task and summed in a fixed order, so the result is
//! bit-identical for any thread count.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{FemError, Result};
use crate::fracderiv::{basis_derivs_along_path, NodalDerivMap, RlKernel};
use crate::fracpath::{influence_all, integral_path, Direction};
use crate::mesh::Triangulation;
use crate::quadrature::{map_rule_to_cell, QuadPoint, TriangleRule};
use crate::sparse::SparseMatrix;

/// `c_μ = 1 / (2 cos(μπ))`; negative for `1/2 < μ ≤ 1`.
pub fn riesz_coefficient(order: f64) -> f64 {
    1.0 / (2.0 * (order * PI).cos())
}

/// Accepts `1/2 < order ≤ 1`; the upper end is the classical diffusion limit.
pub fn check_order(name: &'static str, value: f64) -> Result<()> {
    if value > 0.5 && value <= 1.0 {
        Ok(())
    } else {
        Err(FemError::InvalidOrder { name, value })
    }
}

/// Numbering of the free (interior) nodes.
///
/// Free nodes keep their relative order: free index `i` is the `i`-th
/// non-boundary vertex in mesh order.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    free_index: Vec<Option<usize>>,
    free_nodes: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Triangulation) -> Self {
        let mut free_index = vec![None; mesh.num_vertices()];
        let mut free_nodes = Vec::new();
        for (v, p) in mesh.vertices().iter().enumerate() {
            if !p.on_boundary {
                free_index[v] = Some(free_nodes.len());
                free_nodes.push(v);
            }
        }
        Self {
            free_index,
            free_nodes,
        }
    }

    pub fn num_free(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.free_index.len()
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        self.free_index[node]
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_nodes.iter().map(|&n| full[n]).collect()
    }

    /// Full-node vector with zeros on the boundary.
    pub fn embed(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.num_nodes()];
        for (&n, &v) in self.free_nodes.iter().zip(reduced) {
            full[n] = v;
        }
        full
    }

    pub fn restrict_matrix(&self, m: &SparseMatrix) -> SparseMatrix {
        let rows = self
            .free_nodes
            .iter()
            .map(|&r| {
                m.row(r)
                    .filter_map(|(c, v)| self.free_index[c].map(|fc| (fc, v)))
                    .collect()
            })
            .collect();
        SparseMatrix::from_rows(self.num_free(), rows)
    }
}

/// Removes boundary rows and columns.
pub fn apply_dirichlet(mesh: &Triangulation, m: &SparseMatrix) -> SparseMatrix {
    DofMap::new(mesh).restrict_matrix(m)
}

/// Removes boundary entries.
pub fn apply_dirichlet_vector(mesh: &Triangulation, v: &[f64]) -> Vec<f64> {
    DofMap::new(mesh).restrict(v)
}

/// Node-adjacency pattern of the P1 space and, per cell, the positions of
/// its 3×3 local block in the value array (row-major).
#[derive(Debug, Clone)]
pub struct ElementPattern {
    pub matrix: SparseMatrix,
    pub slots: Vec<[usize; 9]>,
}

impl ElementPattern {
    pub fn new(mesh: &Triangulation) -> Self {
        let mut trip = Vec::with_capacity(9 * mesh.num_cells());
        for t in mesh.cells() {
            for &i in &t.v {
                for &j in &t.v {
                    trip.push((i, j, 0.0));
                }
            }
        }
        let n = mesh.num_vertices();
        let matrix = SparseMatrix::from_triplets(n, n, &trip);
        let slots = mesh
            .cells()
            .iter()
            .map(|t| {
                let mut s = [0; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        s[3 * a + b] = matrix.position(t.v[a], t.v[b]).expect("pattern entry");
                    }
                }
                s
            })
            .collect();
        Self { matrix, slots }
    }
}

/// Exact P1 mass matrix: `area/12 · [2 1 1; 1 2 1; 1 1 2]` per cell.
pub fn assemble_mass(mesh: &Triangulation) -> SparseMatrix {
    let ElementPattern { mut matrix, slots } = ElementPattern::new(mesh);
    let vals = matrix.values_mut();
    for (t, s) in mesh.cells().iter().zip(&slots) {
        for a in 0..3 {
            for b in 0..3 {
                let f = if a == b { 2.0 } else { 1.0 };
                vals[s[3 * a + b]] += f * t.area / 12.0;
            }
        }
    }
    matrix
}

/// Quadrature points of every cell, in cell order.
#[derive(Debug, Clone)]
pub struct QuadratureCache {
    rule: TriangleRule,
    points: Vec<QuadPoint>,
}

impl QuadratureCache {
    pub fn new(mesh: &Triangulation, rule: &TriangleRule) -> Self {
        let points = (0..mesh.num_cells())
            .flat_map(|c| map_rule_to_cell(rule, mesh, c))
            .collect();
        Self {
            rule: rule.clone(),
            points,
        }
    }

    pub fn rule(&self) -> &TriangleRule {
        &self.rule
    }

    /// Points of `cell`, paired with the barycentric weights of its vertices.
    pub fn cell_points(&self, cell: usize) -> impl Iterator<Item = (&QuadPoint, &[f64; 3])> {
        let n = self.rule.len();
        self.points[cell * n..(cell + 1) * n]
            .iter()
            .zip(self.rule.points())
    }

    pub fn all_points(&self) -> &[QuadPoint] {
        &self.points
    }
}

fn value_at(u: &[f64], v: &[usize; 3], l: &[f64; 3]) -> f64 {
    l[0] * u[v[0]] + l[1] * u[v[1]] + l[2] * u[v[2]]
}

/// Adds `(g(u_h) φ_j, φ_i)` into `values` laid out as `pattern`.
pub fn accumulate_reaction(
    mesh: &Triangulation,
    quad: &QuadratureCache,
    pattern: &ElementPattern,
    u: &[f64],
    g: &dyn Fn(f64) -> f64,
    values: &mut [f64],
) {
    for (c, t) in mesh.cells().iter().enumerate() {
        let s = &pattern.slots[c];
        for (q, l) in quad.cell_points(c) {
            let wg = q.weight * g(value_at(u, &t.v, l));
            for a in 0..3 {
                let wa = wg * l[a];
                for b in 0..3 {
                    values[s[3 * a + b]] += wa * l[b];
                }
            }
        }
    }
}

/// `d_kl = (F'(u_h) φ_l, φ_k)` on all nodes.
pub fn assemble_reaction(
    mesh: &Triangulation,
    u_prev: &[f64],
    dfdu: &dyn Fn(f64) -> f64,
    rule: &TriangleRule,
) -> SparseMatrix {
    let pattern = ElementPattern::new(mesh);
    let quad = QuadratureCache::new(mesh, rule);
    let mut m = pattern.matrix.clone();
    accumulate_reaction(mesh, &quad, &pattern, u_prev, dfdu, m.values_mut());
    m
}

/// `b_k = (F(u_h), φ_k)` on all nodes.
pub fn load_nonlinear(mesh: &Triangulation, quad: &QuadratureCache, u: &[f64], f: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_vertices()];
    for (c, t) in mesh.cells().iter().enumerate() {
        for (q, l) in quad.cell_points(c) {
            let w = q.weight * f(value_at(u, &t.v, l));
            for a in 0..3 {
                b[t.v[a]] += w * l[a];
            }
        }
    }
    b
}

/// `b_k = (f(·, t), φ_k)` on all nodes.
pub fn load_source(
    mesh: &Triangulation,
    quad: &QuadratureCache,
    f: &dyn Fn(f64, f64, f64) -> f64,
    t: f64,
) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_vertices()];
    for (c, tri) in mesh.cells().iter().enumerate() {
        for (q, l) in quad.cell_points(c) {
            let w = q.weight * f(q.x, q.y, t);
            for a in 0..3 {
                b[tri.v[a]] += w * l[a];
            }
        }
    }
    b
}

pub fn assemble_load_nonlinear(
    mesh: &Triangulation,
    u_prev: &[f64],
    f: &dyn Fn(f64) -> f64,
    rule: &TriangleRule,
) -> Vec<f64> {
    load_nonlinear(mesh, &QuadratureCache::new(mesh, rule), u_prev, f)
}

pub fn assemble_load_source(
    mesh: &Triangulation,
    f: &dyn Fn(f64, f64, f64) -> f64,
    t: f64,
    rule: &TriangleRule,
) -> Vec<f64> {
    load_source(mesh, &QuadratureCache::new(mesh, rule), f, t)
}

/// Directional derivative maps at one Gauss point, in [`Direction::ALL`] order.
#[derive(Debug, Clone)]
pub struct GaussPointDerivs {
    pub cell: usize,
    pub point: QuadPoint,
    pub maps: [NodalDerivMap; 4],
}

const LEFT: usize = 0;
const RIGHT: usize = 1;
const DOWN: usize = 2;
const UP: usize = 3;

/// Fractional derivatives of all basis functions at all Gauss points:
/// order `alpha` along `x`, order `beta` along `y`.
#[derive(Debug, Clone)]
pub struct FracDerivTable {
    alpha: f64,
    beta: f64,
    points: Vec<GaussPointDerivs>,
}

impl FracDerivTable {
    pub fn build(mesh: &Triangulation, alpha: f64, beta: f64, rule: &TriangleRule) -> Result<Self> {
        check_order("alpha", alpha)?;
        check_order("beta", beta)?;
        let kx = RlKernel::new(alpha)?;
        let ky = RlKernel::new(beta)?;
        let per_cell: Vec<Vec<GaussPointDerivs>> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|cell| -> Result<Vec<GaussPointDerivs>> {
                let influence = influence_all(mesh, cell);
                map_rule_to_cell(rule, mesh, cell)
                    .into_iter()
                    .map(|q| {
                        let mut maps: [NodalDerivMap; 4] = Default::default();
                        for (d, dir) in Direction::ALL.iter().enumerate() {
                            let kernel = if d < 2 { &kx } else { &ky };
                            let path = integral_path(mesh, &influence[d], (q.x, q.y), *dir)?;
                            maps[d] = basis_derivs_along_path(mesh, &path, kernel)?;
                        }
                        Ok(GaussPointDerivs { cell, point: q, maps })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            alpha,
            beta,
            points: per_cell.into_iter().flatten().collect(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn points(&self) -> &[GaussPointDerivs] {
        &self.points
    }

    /// For each direction and node, the `(gauss point, value)` pairs where
    /// the node's derivative is present, in Gauss point order.
    fn by_node(&self, num_nodes: usize) -> [Vec<Vec<(usize, f64)>>; 4] {
        let mut out: [Vec<Vec<(usize, f64)>>; 4] = Default::default();
        for (d, lists) in out.iter_mut().enumerate() {
            *lists = vec![Vec::new(); num_nodes];
            for (g, gp) in self.points.iter().enumerate() {
                for &(n, v) in gp.maps[d].entries() {
                    lists[n].push((g, v));
                }
            }
        }
        out
    }
}

/// `a_kl = a(φ_l, φ_k)` on all nodes from a precomputed derivative table.
pub fn stiffness_from_table(mesh: &Triangulation, table: &FracDerivTable, kx: f64, ky: f64) -> SparseMatrix {
    let n = mesh.num_vertices();
    let cx = kx * riesz_coefficient(table.alpha);
    let cy = ky * riesz_coefficient(table.beta);
    let by_node = table.by_node(n);
    let pts = &table.points;
    // (direction of φ_k, direction of φ_l, coefficient)
    let pairings = [(RIGHT, LEFT, cx), (LEFT, RIGHT, cx), (UP, DOWN, cy), (DOWN, UP, cy)];
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], vec![false; n], Vec::new()),
            |(acc, seen, touched), k| {
                for &(dk, dl, coef) in &pairings {
                    for &(g, vk) in &by_node[dk][k] {
                        let s = coef * pts[g].point.weight * vk;
                        for &(l, vl) in pts[g].maps[dl].entries() {
                            if !seen[l] {
                                seen[l] = true;
                                touched.push(l);
                            }
                            acc[l] += s * vl;
                        }
                    }
                }
                touched.sort_unstable();
                let row = touched.iter().map(|&l| (l, acc[l])).collect();
                for &l in touched.iter() {
                    acc[l] = 0.0;
                    seen[l] = false;
                }
                touched.clear();
                row
            },
        )
        .collect();
    SparseMatrix::from_rows(n, rows)
}

/// Fractional stiffness matrix on all nodes.
pub fn assemble_stiffness(
    mesh: &Triangulation,
    alpha: f64,
    beta: f64,
    kx: f64,
    ky: f64,
    rule: &TriangleRule,
) -> Result<SparseMatrix> {
    if !(kx > 0.0 && ky > 0.0) {
        return Err(FemError::InvalidParameter(format!(
            "diffusivities must be positive, got K_x = {kx}, K_y = {ky}"
        )));
    }
    let table = FracDerivTable::build(mesh, alpha, beta, rule)?;
    Ok(stiffness_from_table(mesh, &table, kx, ky))
}
