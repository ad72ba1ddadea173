//! Conforming triangulations of convex polygonal domains.
//!
//! A [`Triangulation`] is immutable once built. Construction orients every
//! cell counter-clockwise, computes areas and the mesh size `h`, builds the
//! vertex-to-cell adjacency and rejects edges shared by more than two cells.

mod generate;
mod io;

use std::collections::HashMap;

pub use generate::{
    generate_disk_mesh, generate_ellipse_mesh, generate_pentagon_mesh, generate_square_mesh,
};
pub use io::{load_mesh, read_mesh, save_mesh, write_mesh};

use crate::error::{FemError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
    pub on_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    /// Vertex indices in counter-clockwise order.
    pub v: [usize; 3],
    pub area: f64,
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl BBox {
    pub fn diameter(&self) -> f64 {
        (self.xmax - self.xmin).hypot(self.ymax - self.ymin)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    vertices: Vec<Vertex>,
    cells: Vec<Triangle>,
    h: f64,
    vertex_to_cells: Vec<Vec<usize>>,
    bbox: BBox,
}

/// How boundary flags are assigned when building a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryFlags {
    /// Keep the flags stored on the input vertices.
    Given,
    /// Mark exactly the vertices lying on edges owned by a single cell.
    FromTopology,
}

impl Triangulation {
    /// Builds a triangulation from raw vertices and cell connectivity.
    ///
    /// Clockwise cells are flipped. Zero-area cells, repeated vertices in a
    /// cell, out-of-range indices and edges shared by more than two cells are
    /// rejected with [`FemError::NonconformingMesh`].
    pub fn new(
        mut vertices: Vec<Vertex>,
        connectivity: Vec<[usize; 3]>,
        flags: BoundaryFlags,
    ) -> Result<Self> {
        if vertices.is_empty() || connectivity.is_empty() {
            return Err(FemError::NonconformingMesh(
                "mesh needs at least one vertex and one cell".into(),
            ));
        }
        for (i, p) in vertices.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(FemError::InvalidParameter(format!(
                    "vertex {i} has non-finite coordinates"
                )));
            }
        }
        let nv = vertices.len();
        let mut cells = Vec::with_capacity(connectivity.len());
        for (c, &[a, b, d]) in connectivity.iter().enumerate() {
            if a >= nv || b >= nv || d >= nv {
                return Err(FemError::NonconformingMesh(format!(
                    "cell {c} references a vertex outside 0..{nv}"
                )));
            }
            if a == b || b == d || a == d {
                return Err(FemError::NonconformingMesh(format!(
                    "cell {c} repeats a vertex"
                )));
            }
            let s = signed_area(&vertices[a], &vertices[b], &vertices[d]);
            if s == 0.0 {
                return Err(FemError::NonconformingMesh(format!(
                    "cell {c} has zero area"
                )));
            }
            let v = if s > 0.0 { [a, b, d] } else { [a, d, b] };
            cells.push(Triangle { v, area: s.abs() });
        }

        // Each undirected edge may be shared by at most two cells, and the two
        // must traverse it in opposite directions.
        let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (c, t) in cells.iter().enumerate() {
            for k in 0..3 {
                let (i, j) = (t.v[k], t.v[(k + 1) % 3]);
                edges.entry((i.min(j), i.max(j))).or_default().push(c);
            }
        }
        let mut boundary_vertex = vec![false; nv];
        for (&(i, j), owners) in &edges {
            match owners.len() {
                1 => {
                    boundary_vertex[i] = true;
                    boundary_vertex[j] = true;
                }
                2 => {
                    if same_direction(&cells[owners[0]], &cells[owners[1]], i, j) {
                        return Err(FemError::NonconformingMesh(format!(
                            "cells {} and {} overlap across edge ({i}, {j})",
                            owners[0], owners[1]
                        )));
                    }
                }
                n => {
                    return Err(FemError::NonconformingMesh(format!(
                        "edge ({i}, {j}) is shared by {n} cells"
                    )));
                }
            }
        }
        if flags == BoundaryFlags::FromTopology {
            for (p, b) in vertices.iter_mut().zip(&boundary_vertex) {
                p.on_boundary = *b;
            }
        }

        let mut vertex_to_cells = vec![Vec::new(); nv];
        for (c, t) in cells.iter().enumerate() {
            for &v in &t.v {
                vertex_to_cells[v].push(c);
            }
        }
        let h = cells
            .iter()
            .map(|t| longest_edge(&vertices, t))
            .fold(0.0, f64::max);
        let bbox = BBox {
            xmin: vertices.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
            xmax: vertices.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
            ymin: vertices.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
            ymax: vertices.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
        };
        Ok(Self {
            vertices,
            cells,
            h,
            vertex_to_cells,
            bbox,
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Triangle] {
        &self.cells
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Maximum element diameter (longest edge over all cells).
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn vertex_to_cells(&self) -> &[Vec<usize>] {
        &self.vertex_to_cells
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn area(&self) -> f64 {
        self.cells.iter().map(|t| t.area).sum()
    }

    /// Vertex coordinates of a cell in counter-clockwise order.
    pub fn cell_points(&self, cell: usize) -> [[f64; 2]; 3] {
        let t = &self.cells[cell];
        t.v.map(|i| [self.vertices[i].x, self.vertices[i].y])
    }

    pub fn cell_bbox(&self, cell: usize) -> BBox {
        let p = self.cell_points(cell);
        BBox {
            xmin: p[0][0].min(p[1][0]).min(p[2][0]),
            xmax: p[0][0].max(p[1][0]).max(p[2][0]),
            ymin: p[0][1].min(p[1][1]).min(p[2][1]),
            ymax: p[0][1].max(p[1][1]).max(p[2][1]),
        }
    }

    /// Barycentric coordinates of `(x, y)` with respect to `cell`; the i-th
    /// entry is the value of the i-th vertex's P1 basis function there.
    pub fn barycentric(&self, cell: usize, x: f64, y: f64) -> [f64; 3] {
        let [p0, p1, p2] = self.cell_points(cell);
        let two_area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let l1 = ((x - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (y - p0[1])) / two_area;
        let l2 = ((p1[0] - p0[0]) * (y - p0[1]) - (x - p0[0]) * (p1[1] - p0[1])) / two_area;
        [1.0 - l1 - l2, l1, l2]
    }

    /// True when `(x, y)` lies inside `cell`, boundary included up to `tol`
    /// in barycentric coordinates.
    pub fn contains(&self, cell: usize, x: f64, y: f64, tol: f64) -> bool {
        self.barycentric(cell, x, y).iter().all(|&l| l >= -tol)
    }

    /// Nodal interpolant of `f` (one value per vertex).
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.vertices.iter().map(|p| f(p.x, p.y)).collect()
    }

    /// Evaluates the P1 function with nodal values `coeffs` at a point of `cell`.
    pub fn eval_in_cell(&self, coeffs: &[f64], cell: usize, x: f64, y: f64) -> f64 {
        let l = self.barycentric(cell, x, y);
        let v = self.cells[cell].v;
        l[0] * coeffs[v[0]] + l[1] * coeffs[v[1]] + l[2] * coeffs[v[2]]
    }

    /// Mesh with `x` and `y` exchanged on every vertex (cells re-oriented).
    pub fn transposed(&self) -> Self {
        let vertices = self
            .vertices
            .iter()
            .map(|p| Vertex {
                x: p.y,
                y: p.x,
                on_boundary: p.on_boundary,
            })
            .collect();
        let conn = self.cells.iter().map(|t| t.v).collect();
        Self::new(vertices, conn, BoundaryFlags::Given).expect("reflection preserves validity")
    }
}

fn signed_area(a: &Vertex, b: &Vertex, c: &Vertex) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

fn longest_edge(vertices: &[Vertex], t: &Triangle) -> f64 {
    (0..3)
        .map(|k| {
            let p = &vertices[t.v[k]];
            let q = &vertices[t.v[(k + 1) % 3]];
            (p.x - q.x).hypot(p.y - q.y)
        })
        .fold(0.0, f64::max)
}

fn same_direction(a: &Triangle, b: &Triangle, i: usize, j: usize) -> bool {
    let dir = |t: &Triangle| (0..3).any(|k| t.v[k] == i && t.v[(k + 1) % 3] == j);
    dir(a) == dir(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vertex {
        Vertex {
            x,
            y,
            on_boundary: false,
        }
    }

    #[test]
    fn clockwise_cells_are_flipped() {
        let m = Triangulation::new(
            vec![v(0.0, 0.0), v(1.0, 0.0), v(0.0, 1.0)],
            vec![[0, 2, 1]],
            BoundaryFlags::FromTopology,
        )
        .unwrap();
        assert_eq!(m.cells()[0].v, [0, 1, 2]);
        assert_eq!(m.cells()[0].area, 0.5);
        assert!(m.vertices().iter().all(|p| p.on_boundary));
    }

    #[test]
    fn duplicate_cell_is_nonconforming() {
        let err = Triangulation::new(
            vec![v(0.0, 0.0), v(1.0, 0.0), v(0.0, 1.0)],
            vec![[0, 1, 2], [0, 1, 2]],
            BoundaryFlags::FromTopology,
        )
        .unwrap_err();
        assert!(matches!(err, FemError::NonconformingMesh(_)));
    }

    #[test]
    fn edge_shared_by_three_cells_is_rejected() {
        let err = Triangulation::new(
            vec![v(0.0, 0.0), v(1.0, 0.0), v(0.5, 1.0), v(0.5, -1.0), v(0.5, 2.0)],
            vec![[0, 1, 2], [0, 3, 1], [0, 1, 4]],
            BoundaryFlags::FromTopology,
        )
        .unwrap_err();
        assert!(matches!(err, FemError::NonconformingMesh(_)));
    }

    #[test]
    fn zero_area_cell_rejected() {
        let err = Triangulation::new(
            vec![v(0.0, 0.0), v(1.0, 0.0), v(2.0, 0.0)],
            vec![[0, 1, 2]],
            BoundaryFlags::FromTopology,
        )
        .unwrap_err();
        assert!(matches!(err, FemError::NonconformingMesh(_)));
    }

    #[test]
    fn barycentric_reproduces_vertices() {
        let m = generate_square_mesh(3).unwrap();
        for c in 0..m.num_cells() {
            let pts = m.cell_points(c);
            for (k, p) in pts.iter().enumerate() {
                let l = m.barycentric(c, p[0], p[1]);
                for (i, li) in l.iter().enumerate() {
                    let expect = if i == k { 1.0 } else { 0.0 };
                    assert!((li - expect).abs() < 1e-12);
                }
            }
        }
    }
}
