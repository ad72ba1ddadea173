//! Symmetric Gaussian rules on triangles.
//!
//! Points are barycentric triples and weights are normalised to sum to one,
//! so the physical weight of a point in cell `K` is `w * area(K)`.

use crate::error::{FemError, Result};
use crate::mesh::Triangulation;

/// Degree used for all fractional pairings unless configured otherwise.
pub const DEFAULT_DEGREE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    degree: usize,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

/// A quadrature point mapped into a mesh cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
}

impl TriangleRule {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn orbit3(a: f64) -> [[f64; 3]; 3] {
    let b = 1.0 - 2.0 * a;
    [[b, a, a], [a, b, a], [a, a, b]]
}

fn orbit6(a: f64, b: f64) -> [[f64; 3]; 6] {
    let c = 1.0 - a - b;
    [
        [a, b, c],
        [a, c, b],
        [b, a, c],
        [b, c, a],
        [c, a, b],
        [c, b, a],
    ]
}

/// Rule exact for polynomials of total degree `degree` (1 to 5), all weights
/// positive.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut push = |pts: &[[f64; 3]], w: f64| {
        for p in pts {
            points.push(*p);
            weights.push(w);
        }
    };
    match degree {
        1 => push(&[[1.0 / 3.0; 3]], 1.0),
        2 => push(&orbit3(1.0 / 6.0), 1.0 / 3.0),
        // Strang-Fix six-point rule; avoids the negative centroid weight of
        // the four-point degree-3 rule.
        3 => push(
            &orbit6(0.659_027_622_374_092, 0.231_933_368_553_031),
            1.0 / 6.0,
        ),
        4 => {
            push(&orbit3(0.445_948_490_915_965), 0.223_381_589_678_011);
            push(&orbit3(0.091_576_213_509_771), 0.109_951_743_655_322);
        }
        5 => {
            push(&[[1.0 / 3.0; 3]], 0.225);
            push(&orbit3(0.470_142_064_105_115), 0.132_394_152_788_506);
            push(&orbit3(0.101_286_507_323_456), 0.125_939_180_544_827);
        }
        d => return Err(FemError::UnsupportedDegree(d)),
    }
    Ok(TriangleRule {
        degree,
        points,
        weights,
    })
}

/// Maps `rule` into `cell`: affine image of the barycentric points, weights
/// scaled by the cell area.
pub fn map_rule_to_cell(rule: &TriangleRule, mesh: &Triangulation, cell: usize) -> Vec<QuadPoint> {
    let p = mesh.cell_points(cell);
    let area = mesh.cells()[cell].area;
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(l, &w)| QuadPoint {
            x: l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
            y: l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
            weight: w * area,
        })
        .collect()
}

/// `∫_Ω g` over the whole mesh with `rule`.
pub fn integrate(mesh: &Triangulation, rule: &TriangleRule, g: impl Fn(f64, f64) -> f64) -> f64 {
    (0..mesh.num_cells())
        .map(|c| {
            map_rule_to_cell(rule, mesh, c)
                .iter()
                .map(|q| q.weight * g(q.x, q.y))
                .sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_pentagon_mesh, generate_square_mesh, BoundaryFlags, Vertex};
    use proptest::prelude::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// ∫ x^i y^j over the reference triangle (0,0),(1,0),(0,1).
    fn ref_monomial(i: u32, j: u32) -> f64 {
        factorial(i) * factorial(j) / factorial(i + j + 2)
    }

    fn ref_rule_integral(rule: &TriangleRule, f: impl Fn(f64, f64) -> f64) -> f64 {
        rule.points()
            .iter()
            .zip(rule.weights())
            .map(|(l, w)| 0.5 * w * f(l[1], l[2]))
            .sum()
    }

    #[test]
    fn weights_positive_and_normalised() {
        for d in 1..=5 {
            let r = triangle_rule(d).unwrap();
            assert!(r.weights().iter().all(|&w| w > 0.0));
            assert!((r.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for p in r.points() {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unsupported_degree() {
        assert!(matches!(triangle_rule(0), Err(FemError::UnsupportedDegree(0))));
        assert!(matches!(triangle_rule(6), Err(FemError::UnsupportedDegree(6))));
    }

    #[test]
    fn centroid_rule() {
        let r = triangle_rule(1).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.weights(), &[1.0]);
        let m = Triangulation::new(
            vec![
                Vertex { x: 0.0, y: 0.0, on_boundary: true },
                Vertex { x: 1.0, y: 0.0, on_boundary: true },
                Vertex { x: 0.0, y: 1.0, on_boundary: true },
            ],
            vec![[0, 1, 2]],
            BoundaryFlags::Given,
        )
        .unwrap();
        let q = map_rule_to_cell(&r, &m, 0);
        assert!((q[0].x - 1.0 / 3.0).abs() < 1e-15 && (q[0].y - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(q[0].weight, 0.5);
    }

    #[test]
    fn monomial_exactness_per_degree() {
        for d in 1..=5u32 {
            let r = triangle_rule(d as usize).unwrap();
            for i in 0..=d {
                for j in 0..=(d - i) {
                    let q = ref_rule_integral(&r, |x, y| x.powi(i as i32) * y.powi(j as i32));
                    let e = ref_monomial(i, j);
                    assert!((q - e).abs() <= 1e-12 * e.max(1e-3), "d={d} i={i} j={j}");
                }
            }
        }
        let r = triangle_rule(2).unwrap();
        assert!((ref_rule_integral(&r, |x, y| x * y) - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn constant_integrates_to_area() {
        let m = generate_pentagon_mesh(6).unwrap();
        for d in 1..=5 {
            let r = triangle_rule(d).unwrap();
            assert!((integrate(&m, &r, |_, _| 1.0) - 0.875).abs() < 1e-12);
        }
    }

    #[test]
    fn x4_over_unit_square() {
        let m = generate_square_mesh(5).unwrap();
        let r = triangle_rule(4).unwrap();
        assert!((integrate(&m, &r, |x, _| x.powi(4)) - 0.2).abs() < 1e-12);
    }

    fn poly_strategy(max_degree: u32) -> impl Strategy<Value = Vec<(u32, u32, f64)>> {
        let terms: Vec<(u32, u32)> = (0..=max_degree)
            .flat_map(|i| (0..=(max_degree - i)).map(move |j| (i, j)))
            .collect();
        let n = terms.len();
        proptest::collection::vec(-1.0f64..1.0, n).prop_map(move |c| {
            terms.iter().zip(c).map(|(&(i, j), c)| (i, j, c)).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn random_polynomials_are_integrated_exactly(
            d in 1usize..=5,
            poly in poly_strategy(5),
        ) {
            let r = triangle_rule(d).unwrap();
            let poly: Vec<_> = poly.into_iter().filter(|(i, j, _)| (i + j) as usize <= d).collect();
            let exact: f64 = poly.iter().map(|&(i, j, c)| c * ref_monomial(i, j)).sum();
            let scale: f64 = poly.iter().map(|&(i, j, c)| c.abs() * ref_monomial(i, j)).sum();
            let q = ref_rule_integral(&r, |x, y| {
                poly.iter().map(|&(i, j, c)| c * x.powi(i as i32) * y.powi(j as i32)).sum()
            });
            prop_assert!((q - exact).abs() <= 1e-12 * scale.max(1e-300));
        }
    }
}
