//! Problem coefficients and manufactured exact solutions for the two test
//! domains.

use crate::mesh::{DomainTag, Point};
use std::f64::consts::PI;
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// Symmetric Darcy system: beta = 0, gamma = 0.
    Darcy,
    /// General second-order form with advection/reaction terms.
    General,
}

/// Coefficients of the first-order system: velocity equation
/// A^-1 u + grad p = 0, mass balance div u = f, plus the advection/reaction
/// form c(r,q) = int (gamma r + beta . grad r) q for the general kind.
#[derive(Clone)]
pub struct ProblemSpec {
    pub a_inv: MatrixFn,
    pub beta: VectorFn,
    pub gamma: ScalarFn,
    pub f: ScalarFn,
    pub exact: Option<ExactSolution>,
    pub kind: ProblemKind,
    /// Elliptic regularity index of the domain (1 on convex domains, 2/3 on
    /// the L-shape); harness metadata only.
    pub expected_alpha: f64,
}

#[derive(Clone)]
pub struct ExactSolution {
    pub p: ScalarFn,
    pub grad_p: VectorFn,
    /// u = -A grad p.
    pub u: VectorFn,
    pub f: ScalarFn,
    pub domain_tag: DomainTag,
    pub kind: ProblemKind,
}

/// Advection field used by the convection-diffusion experiments.
pub const CD_BETA: [f64; 2] = [2.0, -1.0];

fn identity_matrix() -> MatrixFn {
    Arc::new(|_| [[1.0, 0.0], [0.0, 1.0]])
}

/// p = sin(pi x) sin(pi y) on the unit square.
fn square_solution(kind: ProblemKind) -> ExactSolution {
    let p: ScalarFn = Arc::new(|x: Point| (PI * x[0]).sin() * (PI * x[1]).sin());
    let grad_p: VectorFn = Arc::new(|x: Point| {
        [
            PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
            PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
        ]
    });
    let u: VectorFn = {
        let g = grad_p.clone();
        Arc::new(move |x| {
            let gp = g(x);
            [-gp[0], -gp[1]]
        })
    };
    let f: ScalarFn = match kind {
        ProblemKind::Darcy => Arc::new(|x: Point| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()),
        ProblemKind::General => {
            let g = grad_p.clone();
            Arc::new(move |x: Point| {
                let gp = g(x);
                2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()
                    + CD_BETA[0] * gp[0]
                    + CD_BETA[1] * gp[1]
            })
        }
    };
    ExactSolution {
        p,
        grad_p,
        u,
        f,
        domain_tag: DomainTag::UnitSquare,
        kind,
    }
}

/// Polar angle measured counterclockwise from the positive x axis, shifted
/// into [0, 3 pi / 2] on the L-shaped domain so that sin(2 theta / 3)
/// vanishes on both re-entrant edges.
fn lshape_theta(x: Point) -> f64 {
    let t = x[1].atan2(x[0]);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// p = (1-x^2)(1-y^2) r^(2/3) sin(2 theta/3) on the L-shape; the singular
/// factor s = r^(2/3) sin(2 theta/3) is harmonic.
fn lshape_solution(kind: ProblemKind) -> ExactSolution {
    let sing = |x: Point| -> (f64, [f64; 2]) {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r == 0.0 {
            return (0.0, [0.0, 0.0]);
        }
        let theta = lshape_theta(x);
        let s = r.powf(2.0 / 3.0) * (2.0 * theta / 3.0).sin();
        let c = 2.0 / 3.0 * r.powf(-1.0 / 3.0);
        let grad = [
            -c * (theta / 3.0).sin(),
            c * (theta / 3.0).cos(),
        ];
        (s, grad)
    };
    let bubble = |x: Point| -> (f64, [f64; 2], f64) {
        let w = (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]);
        let grad = [
            -2.0 * x[0] * (1.0 - x[1] * x[1]),
            -2.0 * x[1] * (1.0 - x[0] * x[0]),
        ];
        let lap = -2.0 * (1.0 - x[1] * x[1]) - 2.0 * (1.0 - x[0] * x[0]);
        (w, grad, lap)
    };

    let p: ScalarFn = Arc::new(move |x: Point| {
        let (s, _) = sing(x);
        let (w, _, _) = bubble(x);
        w * s
    });
    let grad_p: VectorFn = Arc::new(move |x: Point| {
        let (s, gs) = sing(x);
        let (w, gw, _) = bubble(x);
        [w * gs[0] + s * gw[0], w * gs[1] + s * gw[1]]
    });
    let u: VectorFn = {
        let g = grad_p.clone();
        Arc::new(move |x| {
            let gp = g(x);
            [-gp[0], -gp[1]]
        })
    };
    // -lap p = -(w lap s + 2 grad w . grad s + s lap w), and lap s = 0.
    let neg_lap_p = move |x: Point| -> f64 {
        let (s, gs) = sing(x);
        let (_, gw, lw) = bubble(x);
        -(2.0 * (gw[0] * gs[0] + gw[1] * gs[1]) + s * lw)
    };
    let f: ScalarFn = match kind {
        ProblemKind::Darcy => Arc::new(neg_lap_p),
        ProblemKind::General => {
            let g = grad_p.clone();
            Arc::new(move |x: Point| {
                let gp = g(x);
                neg_lap_p(x) + CD_BETA[0] * gp[0] + CD_BETA[1] * gp[1]
            })
        }
    };
    ExactSolution {
        p,
        grad_p,
        u,
        f,
        domain_tag: DomainTag::LShape,
        kind,
    }
}

/// Manufactured exact solution for a supported (domain, kind) pair.
pub fn make_exact(domain_tag: DomainTag, kind: ProblemKind) -> ExactSolution {
    match domain_tag {
        DomainTag::UnitSquare => square_solution(kind),
        DomainTag::LShape => lshape_solution(kind),
    }
}

impl ProblemSpec {
    /// Darcy system with identity permeability and the domain's manufactured
    /// solution.
    pub fn darcy(domain_tag: DomainTag) -> Self {
        let exact = make_exact(domain_tag, ProblemKind::Darcy);
        ProblemSpec {
            a_inv: identity_matrix(),
            beta: Arc::new(|_| [0.0, 0.0]),
            gamma: Arc::new(|_| 0.0),
            f: exact.f.clone(),
            exact: Some(exact),
            kind: ProblemKind::Darcy,
            expected_alpha: expected_alpha(domain_tag),
        }
    }

    /// Convection-diffusion problem -lap p + beta . grad p = f with
    /// beta = (2, -1).
    pub fn convection_diffusion(domain_tag: DomainTag) -> Self {
        let exact = make_exact(domain_tag, ProblemKind::General);
        ProblemSpec {
            a_inv: identity_matrix(),
            beta: Arc::new(|_| CD_BETA),
            gamma: Arc::new(|_| 0.0),
            f: exact.f.clone(),
            exact: Some(exact),
            kind: ProblemKind::General,
            expected_alpha: expected_alpha(domain_tag),
        }
    }

    pub fn from_name(domain_tag: DomainTag, name: &str) -> crate::Result<Self> {
        match name {
            "darcy" => Ok(ProblemSpec::darcy(domain_tag)),
            "cd" | "convection_diffusion" => Ok(ProblemSpec::convection_diffusion(domain_tag)),
            other => Err(crate::Error::Config(format!("unknown problem '{other}'"))),
        }
    }
}

fn expected_alpha(domain_tag: DomainTag) -> f64 {
    match domain_tag {
        DomainTag::UnitSquare => 1.0,
        DomainTag::LShape => 2.0 / 3.0,
    }
}

/// Sample `count` points on the domain boundary (uniformly along the
/// perimeter polyline); used by validation tests.
pub fn boundary_samples(domain_tag: DomainTag, count: usize) -> Vec<Point> {
    let corners: &[Point] = match domain_tag {
        DomainTag::UnitSquare => &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        DomainTag::LShape => &[
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [-1.0, 1.0],
            [-1.0, -1.0],
            [0.0, -1.0],
        ],
    };
    let n = corners.len();
    let lengths: Vec<f64> = (0..n)
        .map(|i| {
            let a = corners[i];
            let b = corners[(i + 1) % n];
            ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
        })
        .collect();
    let total: f64 = lengths.iter().sum();
    (0..count)
        .map(|i| {
            let mut s = total * (i as f64 + 0.5) / count as f64;
            let mut seg = 0;
            while s > lengths[seg] {
                s -= lengths[seg];
                seg += 1;
            }
            let a = corners[seg];
            let b = corners[(seg + 1) % n];
            let t = s / lengths[seg];
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_at_square_center() {
        let darcy = make_exact(DomainTag::UnitSquare, ProblemKind::Darcy);
        assert!(((darcy.f)([0.5, 0.5]) - 2.0 * PI * PI).abs() < 1e-12);
        // beta . grad p vanishes at the center by symmetry
        let cd = make_exact(DomainTag::UnitSquare, ProblemKind::General);
        assert!(((cd.f)([0.5, 0.5]) - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn pressure_vanishes_on_boundary() {
        for (tag, tol) in [(DomainTag::UnitSquare, 1e-10), (DomainTag::LShape, 1e-8)] {
            let exact = make_exact(tag, ProblemKind::Darcy);
            for p in boundary_samples(tag, 200) {
                assert!(
                    (exact.p)(p).abs() <= tol,
                    "p({p:?}) = {} on boundary of {tag:?}",
                    (exact.p)(p)
                );
            }
        }
    }

    #[test]
    fn velocity_matches_finite_difference_gradient() {
        let h = 1e-6;
        for tag in [DomainTag::UnitSquare, DomainTag::LShape] {
            let exact = make_exact(tag, ProblemKind::Darcy);
            let samples: Vec<Point> = match tag {
                DomainTag::UnitSquare => vec![[0.3, 0.2], [0.7, 0.9], [0.5, 0.5], [0.1, 0.8]],
                // stay away from the re-entrant corner
                DomainTag::LShape => vec![[-0.5, 0.5], [0.5, 0.5], [-0.5, -0.5], [-0.3, 0.8]],
            };
            for x in samples {
                let px = |p: Point| (exact.p)(p);
                let fd = [
                    (px([x[0] + h, x[1]]) - px([x[0] - h, x[1]])) / (2.0 * h),
                    (px([x[0], x[1] + h]) - px([x[0], x[1] - h])) / (2.0 * h),
                ];
                let u = (exact.u)(x);
                for c in 0..2 {
                    let err = (u[c] + fd[c]).abs() / (1.0 + fd[c].abs());
                    assert!(err <= 1e-5, "u vs -grad p at {x:?}: {err:e}");
                }
            }
        }
    }

    #[test]
    fn lshape_source_matches_fd_laplacian() {
        let exact = make_exact(DomainTag::LShape, ProblemKind::Darcy);
        let x = [-0.5, 0.5];
        let h = 1e-4;
        let p = |q: Point| (exact.p)(q);
        let lap = (p([x[0] + h, x[1]]) + p([x[0] - h, x[1]]) + p([x[0], x[1] + h])
            + p([x[0], x[1] - h])
            - 4.0 * p(x))
            / (h * h);
        let f = (exact.f)(x);
        assert!(
            ((f + lap) / f).abs() <= 1e-5,
            "f = {f}, -fd lap = {}",
            -lap
        );
    }

    #[test]
    fn lshape_theta_branch() {
        assert!((lshape_theta([1.0, 0.0]) - 0.0).abs() < 1e-15);
        assert!((lshape_theta([0.0, 1.0]) - PI / 2.0).abs() < 1e-14);
        assert!((lshape_theta([-1.0, -1.0]) - 5.0 * PI / 4.0).abs() < 1e-14);
        assert!((lshape_theta([0.0, -1.0]) - 3.0 * PI / 2.0).abs() < 1e-14);
        // p vanishes on both re-entrant edges
        let exact = make_exact(DomainTag::LShape, ProblemKind::Darcy);
        assert!((exact.p)([0.5, 0.0]).abs() < 1e-15);
        assert!((exact.p)([0.0, -0.5]).abs() < 1e-15);
    }
}
