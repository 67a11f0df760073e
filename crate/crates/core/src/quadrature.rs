//! Fixed-degree Gauss quadrature on the reference triangle and the unit interval.
//!
//! Triangle rules are built by collapsing a tensor product of Gauss-Legendre
//! (in the first coordinate) and Gauss-Jacobi with weight (1-v) (in the
//! second) through the Duffy map, so any requested polynomial exactness up to
//! degree 20 is available without tabulated point sets.

use crate::error::Error;
use nalgebra::DMatrix;

/// Quadrature rule on the reference triangle {(0,0),(1,0),(0,1)}.
///
/// Points are stored as barycentric triples and weights sum to one, so an
/// integral over a physical triangle T is `|T| * sum_i w_i f(p_i)`.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

/// Quadrature rule on [0,1]; weights sum to one.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

pub const MAX_DEGREE: usize = 20;

/// Gauss rule on the reference triangle exact for all polynomials of total
/// degree `exact_degree`.
pub fn triangle_rule(exact_degree: usize) -> Result<TriangleRule, Error> {
    if exact_degree < 1 || exact_degree > MAX_DEGREE {
        return Err(Error::Config(format!(
            "triangle rule degree {exact_degree} outside supported range 1..={MAX_DEGREE}"
        )));
    }
    let n = exact_degree / 2 + 1; // 2n-1 >= exact_degree
    let (gu, wu) = gauss_legendre_01(n);
    let (gv, wv) = gauss_jacobi_10_01(n);

    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (v, wvj) in gv.iter().zip(&wv) {
        for (u, wui) in gu.iter().zip(&wu) {
            let x = u * (1.0 - v);
            let y = *v;
            points.push([1.0 - x - y, x, y]);
            // wv carries the (1-v) factor of the Duffy Jacobian; the product
            // weights sum to the reference area 1/2, normalize to 1.
            weights.push(2.0 * wui * wvj);
        }
    }
    Ok(TriangleRule {
        points,
        weights,
        exact_degree,
    })
}

/// Gauss-Legendre rule on [0,1] exact for polynomials of degree `exact_degree`.
pub fn edge_rule(exact_degree: usize) -> Result<EdgeRule, Error> {
    if exact_degree < 1 || exact_degree > MAX_DEGREE {
        return Err(Error::Config(format!(
            "edge rule degree {exact_degree} outside supported range 1..={MAX_DEGREE}"
        )));
    }
    let n = exact_degree / 2 + 1;
    let (points, weights) = gauss_legendre_01(n);
    Ok(EdgeRule {
        points,
        weights,
        exact_degree,
    })
}

impl TriangleRule {
    /// Map the rule to a physical triangle, yielding (point, weight) pairs
    /// with weights scaled by the triangle area.
    pub fn mapped<'a>(
        &'a self,
        v: &'a [[f64; 2]; 3],
        area: f64,
    ) -> impl Iterator<Item = ([f64; 2], f64)> + 'a {
        self.points.iter().zip(&self.weights).map(move |(l, w)| {
            let x = l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0];
            let y = l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1];
            ([x, y], area * w)
        })
    }
}

/// Nodes and weights of the n-point Gauss rule for weight function `w` on
/// [-1,1], from the symmetric tridiagonal Jacobi matrix (Golub-Welsch).
fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut jac = DMatrix::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = diag[i];
        if i + 1 < n {
            jac[(i, i + 1)] = offdiag[i];
            jac[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let first = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * first * first)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// n-point Gauss-Legendre on [0,1]; weights sum to 1.
fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let diag = vec![0.0; n];
    let offdiag: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            (k * k / (4.0 * k * k - 1.0)).sqrt()
        })
        .collect();
    let (x, w) = golub_welsch(&diag, &offdiag, 2.0);
    (
        x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|wi| 0.5 * wi).collect(),
    )
}

/// n-point Gauss-Jacobi with weight (1-v) on [0,1]; weights sum to 1/2.
fn gauss_jacobi_10_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Recurrence coefficients for the weight (1-x) on [-1,1].
    let diag: Vec<f64> = (0..n)
        .map(|k| {
            let k = k as f64;
            -1.0 / ((2.0 * k + 1.0) * (2.0 * k + 3.0))
        })
        .collect();
    let offdiag: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            (k * (k + 1.0)).sqrt() / (2.0 * k + 1.0)
        })
        .collect();
    let (x, w) = golub_welsch(&diag, &offdiag, 2.0);
    (
        x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|wi| 0.25 * wi).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).fold(1.0, |acc, k| acc * k as f64)
    }

    /// Closed-form moment of x^a y^b over the reference triangle.
    fn tri_moment(a: usize, b: usize) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    fn tri_quad_moment(rule: &TriangleRule, a: usize, b: usize) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(l, w)| 0.5 * w * l[1].powi(a as i32) * l[2].powi(b as i32))
            .sum()
    }

    #[test]
    fn weights_sum_to_one() {
        for deg in 1..=MAX_DEGREE {
            let tr = triangle_rule(deg).unwrap();
            let s: f64 = tr.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "deg {deg}: sum {s}");
            let er = edge_rule(deg).unwrap();
            let s: f64 = er.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "deg {deg}: sum {s}");
        }
    }

    #[test]
    fn constant_over_reference_triangle() {
        let rule = triangle_rule(8).unwrap();
        assert!((tri_quad_moment(&rule, 0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn barycentric_moment() {
        // integral of lambda_1 = x over the reference triangle is 1/6
        let rule = triangle_rule(8).unwrap();
        assert!((tri_quad_moment(&rule, 1, 0) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn monomial_x2_y3() {
        // 2! 3! / 7! = 12/5040
        let rule = triangle_rule(8).unwrap();
        let exact = 12.0 / 5040.0;
        assert_eq!(tri_moment(2, 3), exact);
        assert!((tri_quad_moment(&rule, 2, 3) - exact).abs() / exact < 1e-14);
    }

    #[test]
    fn edge_basics() {
        let r1 = edge_rule(1).unwrap();
        assert_eq!(r1.points.len(), 1);
        let s: f64 = r1.points.iter().zip(&r1.weights).map(|(x, w)| w * x).sum();
        assert!((s - 0.5).abs() < 1e-15, "midpoint rule integrates t to 0.5");

        let r3 = edge_rule(5).unwrap();
        assert_eq!(r3.points.len(), 3);
        let s: f64 = r3
            .points
            .iter()
            .zip(&r3.weights)
            .map(|(x, w)| w * x.powi(4))
            .sum();
        assert!((s - 0.2).abs() < 1e-15, "3-point rule integrates t^4 to 1/5");
    }

    #[test]
    fn degree_out_of_range_rejected() {
        assert!(triangle_rule(0).is_err());
        assert!(triangle_rule(21).is_err());
        assert!(edge_rule(0).is_err());
        assert!(edge_rule(21).is_err());
    }

    proptest! {
        #[test]
        fn triangle_exactness(deg in 1usize..=12, a in 0usize..=12, b in 0usize..=12) {
            prop_assume!(a + b <= deg);
            let rule = triangle_rule(deg).unwrap();
            let exact = tri_moment(a, b);
            let quad = tri_quad_moment(&rule, a, b);
            prop_assert!((quad - exact).abs() <= 1e-13 * exact.max(1.0));
        }

        #[test]
        fn edge_exactness(deg in 1usize..=20, a in 0usize..=20) {
            prop_assume!(a <= deg);
            let rule = edge_rule(deg).unwrap();
            let exact = 1.0 / (a as f64 + 1.0);
            let quad: f64 = rule.points.iter().zip(&rule.weights)
                .map(|(x, w)| w * x.powi(a as i32)).sum();
            prop_assert!((quad - exact).abs() <= 1e-13 * exact);
        }
    }
}
