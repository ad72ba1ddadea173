use std::f64::consts::PI;

use super::{BoundaryFlags, Triangulation, Vertex};
use crate::error::{FemError, Result};

fn check_subdivisions(n: usize) -> Result<()> {
    if n < 2 {
        return Err(FemError::InvalidParameter(format!(
            "subdivision count must be at least 2, got {n}"
        )));
    }
    Ok(())
}

fn vertex(x: f64, y: f64) -> Vertex {
    Vertex {
        x,
        y,
        on_boundary: false,
    }
}

/// Splits the structured quad grid `ids[row][col]` into triangles along the
/// lower-left to upper-right diagonal of every quad.
fn split_quads(ids: &[Vec<usize>], conn: &mut Vec<[usize; 3]>) {
    for j in 0..ids.len() - 1 {
        for i in 0..ids[j].len() - 1 {
            let (a, b) = (ids[j][i], ids[j][i + 1]);
            let (c, d) = (ids[j + 1][i], ids[j + 1][i + 1]);
            conn.push([a, b, d]);
            conn.push([a, d, c]);
        }
    }
}

/// Unit square `(0,1)²` split into `n × n` squares, each cut along its
/// lower-left to upper-right diagonal: `(n+1)²` vertices and `2n²` cells.
pub fn generate_square_mesh(n: usize) -> Result<Triangulation> {
    check_subdivisions(n)?;
    let nf = n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    let mut ids = vec![vec![0; n + 1]; n + 1];
    for (j, row) in ids.iter_mut().enumerate() {
        for (i, id) in row.iter_mut().enumerate() {
            *id = vertices.len();
            vertices.push(vertex(i as f64 / nf, j as f64 / nf));
        }
    }
    let mut conn = Vec::with_capacity(2 * n * n);
    split_quads(&ids, &mut conn);
    Triangulation::new(vertices, conn, BoundaryFlags::FromTopology)
}

/// Pentagon `{(x,y) ∈ (0,1)² : x + y < 1.5}`.
///
/// The strip `y ≤ 1/2` is a structured rectangle grid; the trapezoid above it
/// is the image of a structured grid under the map that keeps the left side on
/// `x = 0` and puts the right side on the cut `x + y = 1.5`, so the cut is an
/// exact union of element edges for every `n`.
pub fn generate_pentagon_mesh(n: usize) -> Result<Triangulation> {
    check_subdivisions(n)?;
    let rows = n.div_ceil(2);
    let (nf, mf) = (n as f64, rows as f64);
    let mut vertices = Vec::new();
    let mut ids = vec![vec![0; n + 1]; 2 * rows + 1];
    for (j, row) in ids.iter_mut().enumerate() {
        for (i, id) in row.iter_mut().enumerate() {
            *id = vertices.len();
            let xi = i as f64 / nf;
            if j <= rows {
                vertices.push(vertex(xi, 0.5 * j as f64 / mf));
            } else {
                let eta = (j - rows) as f64 / mf;
                vertices.push(vertex(xi * (1.0 - 0.5 * eta), 0.5 + 0.5 * eta));
            }
        }
    }
    let mut conn = Vec::new();
    split_quads(&ids, &mut conn);
    Triangulation::new(vertices, conn, BoundaryFlags::FromTopology)
}

/// Ellipse `x²/a² + y²/b² < 1` centred at the origin.
///
/// Concentric rings `k = 1..=n` at radius fraction `k/n` carry `8k` equally
/// spaced angular nodes (including angle 0), so boundary nodes lie on the
/// ellipse and the node set is symmetric under both axis reflections and,
/// for `a = b`, under `x ↔ y`.
pub fn generate_ellipse_mesh(a: f64, b: f64, n: usize) -> Result<Triangulation> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(FemError::InvalidParameter(format!(
            "ellipse semi-axes must be positive, got a = {a}, b = {b}"
        )));
    }
    check_subdivisions(n)?;
    let mut vertices = vec![vertex(0.0, 0.0)];
    let mut rings: Vec<Vec<usize>> = vec![vec![0]];
    for k in 1..=n {
        let rho = k as f64 / n as f64;
        let count = 8 * k;
        let ring = (0..count)
            .map(|j| {
                let theta = 2.0 * PI * j as f64 / count as f64;
                vertices.push(vertex(a * rho * theta.cos(), b * rho * theta.sin()));
                vertices.len() - 1
            })
            .collect();
        rings.push(ring);
    }
    let mut conn = Vec::new();
    for k in 1..=n {
        stitch_rings(&rings[k - 1], &rings[k], &mut conn);
    }
    Triangulation::new(vertices, conn, BoundaryFlags::FromTopology)
}

/// Disk of radius `r` centred at `(cx, cy)`.
pub fn generate_disk_mesh(cx: f64, cy: f64, r: f64, n: usize) -> Result<Triangulation> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(FemError::InvalidParameter(format!(
            "disk radius must be positive, got {r}"
        )));
    }
    let unit = generate_ellipse_mesh(r, r, n)?;
    let vertices = unit
        .vertices()
        .iter()
        .map(|p| Vertex {
            x: cx + p.x,
            y: cy + p.y,
            on_boundary: p.on_boundary,
        })
        .collect();
    let conn = unit.cells().iter().map(|t| t.v).collect();
    Triangulation::new(vertices, conn, BoundaryFlags::Given)
}

/// Triangulates the annulus between two rings of equally spaced angular nodes
/// (both starting at angle 0) by merging them in angular order.
fn stitch_rings(inner: &[usize], outer: &[usize], conn: &mut Vec<[usize; 3]>) {
    let (m, p) = (inner.len(), outer.len());
    if m == 1 {
        for j in 0..p {
            conn.push([inner[0], outer[j], outer[(j + 1) % p]]);
        }
        return;
    }
    let (mut i, mut j) = (0, 0);
    while i < m || j < p {
        // Compare next angles (i+1)/m and (j+1)/p exactly in integers.
        let advance_inner = j == p || (i < m && (i + 1) * p <= (j + 1) * m);
        if advance_inner {
            conn.push([inner[i % m], outer[j % p], inner[(i + 1) % m]]);
            i += 1;
        } else {
            conn.push([inner[i % m], outer[j % p], outer[(j + 1) % p]]);
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn edge_counts(m: &Triangulation) -> HashMap<(usize, usize), usize> {
        let mut e = HashMap::new();
        for t in m.cells() {
            for k in 0..3 {
                let (i, j) = (t.v[k], t.v[(k + 1) % 3]);
                *e.entry((i.min(j), i.max(j))).or_insert(0) += 1;
            }
        }
        e
    }

    fn check_conforming(m: &Triangulation) {
        for ((i, j), c) in edge_counts(m) {
            let vi = m.vertices()[i];
            let vj = m.vertices()[j];
            match c {
                1 => assert!(vi.on_boundary && vj.on_boundary),
                2 => {}
                _ => panic!("edge shared by {c} cells"),
            }
        }
        for t in m.cells() {
            assert!(t.area > 0.0);
        }
        for (v, cells) in m.vertex_to_cells().iter().enumerate() {
            for &c in cells {
                assert!(m.cells()[c].v.contains(&v));
            }
        }
        let incidences: usize = m.vertex_to_cells().iter().map(Vec::len).sum();
        assert_eq!(incidences, 3 * m.num_cells());
    }

    #[test]
    fn square_n2_counts() {
        let m = generate_square_mesh(2).unwrap();
        assert_eq!(m.num_vertices(), 9);
        assert_eq!(m.num_cells(), 8);
        assert!((m.area() - 1.0).abs() < 1e-12);
        assert_eq!(m.vertices().iter().filter(|p| !p.on_boundary).count(), 1);
    }

    #[test]
    fn square_area_boundary_and_h() {
        for n in [2, 3, 7, 10, 16] {
            let m = generate_square_mesh(n).unwrap();
            check_conforming(&m);
            assert_eq!(m.num_cells(), 2 * n * n);
            assert!((m.area() - 1.0).abs() < 1e-12);
            assert!((m.h() - 2f64.sqrt() / n as f64).abs() < 1e-12);
            for p in m.vertices() {
                let on = p.x == 0.0 || p.x == 1.0 || p.y == 0.0 || p.y == 1.0;
                assert_eq!(on, p.on_boundary);
            }
        }
    }

    #[test]
    fn too_few_subdivisions() {
        assert!(matches!(
            generate_square_mesh(1),
            Err(FemError::InvalidParameter(_))
        ));
        assert!(generate_pentagon_mesh(0).is_err());
        assert!(generate_ellipse_mesh(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn pentagon_area_and_cut() {
        for n in [2, 5, 10, 20, 30] {
            let m = generate_pentagon_mesh(n).unwrap();
            check_conforming(&m);
            assert!((m.area() - 7.0 / 8.0).abs() < 1e-12, "n = {n}");
            for p in m.vertices().iter().filter(|p| p.on_boundary) {
                let on = p.x == 0.0
                    || p.x == 1.0
                    || p.y == 0.0
                    || p.y == 1.0
                    || (p.x + p.y - 1.5).abs() <= 1e-12;
                assert!(on, "({}, {})", p.x, p.y);
            }
            for p in m.vertices().iter().filter(|p| !p.on_boundary) {
                assert!(p.x > 0.0 && p.y > 0.0 && p.x < 1.0 && p.y < 1.0 && p.x + p.y < 1.5);
            }
        }
        let m = generate_pentagon_mesh(30).unwrap();
        assert!(m.h() < 2.5 / 30.0);
    }

    #[test]
    fn ellipse_area_converges() {
        let (a, b) = (0.5, 0.75);
        let exact = PI * a * b;
        for n in [4, 8, 16, 32] {
            let m = generate_ellipse_mesh(a, b, n).unwrap();
            check_conforming(&m);
            let rel = (m.area() - exact).abs() / exact;
            assert!(rel < m.h(), "n = {n}: rel {rel} h {}", m.h());
            for p in m.vertices().iter().filter(|p| p.on_boundary) {
                let r = (p.x / a).powi(2) + (p.y / b).powi(2);
                assert!((r - 1.0).abs() < 1e-12);
            }
        }
        let h: Vec<f64> = [5, 10, 20]
            .iter()
            .map(|&n| generate_ellipse_mesh(a, b, n).unwrap().h())
            .collect();
        assert!(h[1] < 0.6 * h[0] && h[2] < 0.6 * h[1]);
    }

    #[test]
    fn disk_boundary_on_circle() {
        let m = generate_disk_mesh(1.25, 1.25, 1.25, 10).unwrap();
        check_conforming(&m);
        for p in m.vertices().iter().filter(|p| p.on_boundary) {
            let d = (p.x - 1.25).hypot(p.y - 1.25);
            assert!((d - 1.25).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_disk_vertex_set_symmetric_under_swap() {
        let m = generate_ellipse_mesh(1.0, 1.0, 6).unwrap();
        for p in m.vertices() {
            let found = m
                .vertices()
                .iter()
                .any(|q| (q.x - p.y).abs() < 1e-12 && (q.y - p.x).abs() < 1e-12);
            assert!(found);
        }
    }
}
