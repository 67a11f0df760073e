//! Order-1 Raviart-Thomas-Nedelec velocity space, discontinuous P1 pressure
//! space, nodal interpolation and the coarse-to-fine injection matrices.
//!
//! RT dofs: per edge, two moments of the normal trace against the orthonormal
//! Legendre pair {1, sqrt(3)(2t-1)} in the edge's intrinsic parameterization
//! (lower vertex index to higher); per triangle, the two components of the
//! mean value (the orthogonal projection onto constant vector fields). The
//! local nodal basis is recovered per element by inverting the 8x8 moment
//! matrix of a translated and scaled monomial basis of RT1.

use crate::error::{Error, Result};
use crate::mesh::{Point, TriangleMesh};
use crate::quadrature::{edge_rule, triangle_rule};
use crate::sparse::CsrMatrix;
use nalgebra::{SMatrix, SVector};
use std::sync::Arc;

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Orthonormal Legendre pair on [0,1].
#[inline]
pub fn edge_legendre(i: usize, t: f64) -> f64 {
    match i {
        0 => 1.0,
        1 => SQRT3 * (2.0 * t - 1.0),
        _ => unreachable!("edge dof index"),
    }
}

/// Monomial RT1 basis on scaled local coordinates: values of the 8 fields.
#[inline]
fn mono_values(xi: f64, eta: f64) -> [[f64; 2]; 8] {
    [
        [1.0, 0.0],
        [xi, 0.0],
        [eta, 0.0],
        [0.0, 1.0],
        [0.0, xi],
        [0.0, eta],
        [xi * xi, xi * eta],
        [xi * eta, eta * eta],
    ]
}

/// Divergence of the monomials in local coordinates (multiply by 1/scale for
/// the physical divergence).
#[inline]
fn mono_divs_local(xi: f64, eta: f64) -> [f64; 8] {
    [0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 3.0 * xi, 3.0 * eta]
}

#[derive(Debug, Clone)]
struct RtElement {
    verts: [Point; 3],
    area: f64,
    centroid: Point,
    inv_scale: f64,
    /// Column k holds the monomial coefficients of the nodal basis dual to
    /// local dof k.
    coeff: SMatrix<f64, 8, 8>,
    dofs: [usize; 8],
}

/// Local RT1 function on one triangle, as monomial coefficients.
#[derive(Debug, Clone)]
pub struct RtLocal {
    w: SVector<f64, 8>,
    centroid: Point,
    inv_scale: f64,
}

impl RtLocal {
    pub fn eval(&self, p: Point) -> [f64; 2] {
        let xi = (p[0] - self.centroid[0]) * self.inv_scale;
        let eta = (p[1] - self.centroid[1]) * self.inv_scale;
        let mono = mono_values(xi, eta);
        let mut out = [0.0, 0.0];
        for m in 0..8 {
            out[0] += self.w[m] * mono[m][0];
            out[1] += self.w[m] * mono[m][1];
        }
        out
    }

    pub fn div(&self, p: Point) -> f64 {
        let xi = (p[0] - self.centroid[0]) * self.inv_scale;
        let eta = (p[1] - self.centroid[1]) * self.inv_scale;
        let divs = mono_divs_local(xi, eta);
        let mut out = 0.0;
        for m in 0..8 {
            out += self.w[m] * divs[m];
        }
        out * self.inv_scale
    }
}

#[derive(Debug, Clone)]
pub struct RtSpace {
    pub mesh: Arc<TriangleMesh>,
    elements: Vec<RtElement>,
    dim: usize,
}

impl RtSpace {
    pub fn new(mesh: Arc<TriangleMesh>) -> Result<Self> {
        let erule = edge_rule(8)?;
        let trule = triangle_rule(8)?;
        let mut elements = Vec::with_capacity(mesh.num_triangles());

        for t in 0..mesh.num_triangles() {
            let verts = mesh.triangle_vertices(t);
            let area = mesh.signed_area(t);
            if area <= 0.0 {
                return Err(Error::Assembly(format!("triangle {t} not positively oriented")));
            }
            let centroid = [
                (verts[0][0] + verts[1][0] + verts[2][0]) / 3.0,
                (verts[0][1] + verts[1][1] + verts[2][1]) / 3.0,
            ];
            let scale = (0..3)
                .map(|i| {
                    let a = verts[i];
                    let b = verts[(i + 1) % 3];
                    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
                })
                .fold(0.0f64, f64::max);
            let inv_scale = 1.0 / scale;

            let mut vand = SMatrix::<f64, 8, 8>::zeros();
            let mut dofs = [0usize; 8];
            for le in 0..3 {
                let (e, _) = mesh.edge_of_triangle[t][le];
                let n = mesh.edge_normal(e);
                for (tq, wq) in erule.points.iter().zip(&erule.weights) {
                    let p = mesh.edge_point(e, *tq);
                    let xi = (p[0] - centroid[0]) * inv_scale;
                    let eta = (p[1] - centroid[1]) * inv_scale;
                    let mono = mono_values(xi, eta);
                    for i in 0..2 {
                        let lw = wq * edge_legendre(i, *tq);
                        for m in 0..8 {
                            vand[(2 * le + i, m)] += lw * (mono[m][0] * n[0] + mono[m][1] * n[1]);
                        }
                    }
                }
                dofs[2 * le] = 2 * e;
                dofs[2 * le + 1] = 2 * e + 1;
            }
            for (lambda, wq) in trule.points.iter().zip(&trule.weights) {
                let p = [
                    lambda[0] * verts[0][0] + lambda[1] * verts[1][0] + lambda[2] * verts[2][0],
                    lambda[0] * verts[0][1] + lambda[1] * verts[1][1] + lambda[2] * verts[2][1],
                ];
                let xi = (p[0] - centroid[0]) * inv_scale;
                let eta = (p[1] - centroid[1]) * inv_scale;
                let mono = mono_values(xi, eta);
                for c in 0..2 {
                    for m in 0..8 {
                        vand[(6 + c, m)] += wq * mono[m][c];
                    }
                }
            }
            dofs[6] = 2 * mesh.num_edges() + 2 * t;
            dofs[7] = 2 * mesh.num_edges() + 2 * t + 1;

            let coeff = vand.try_inverse().ok_or_else(|| {
                Error::Assembly(format!("singular RT moment matrix on triangle {t}"))
            })?;

            elements.push(RtElement {
                verts,
                area,
                centroid,
                inv_scale,
                coeff,
                dofs,
            });
        }

        let dim = 2 * mesh.num_edges() + 2 * mesh.num_triangles();
        Ok(RtSpace { mesh, elements, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_edge_dofs(&self) -> usize {
        2 * self.mesh.num_edges()
    }

    #[inline]
    pub fn edge_dof(e: usize, moment: usize) -> usize {
        2 * e + moment
    }

    #[inline]
    pub fn interior_dof(&self, t: usize, comp: usize) -> usize {
        2 * self.mesh.num_edges() + 2 * t + comp
    }

    pub fn local_dofs(&self, t: usize) -> [usize; 8] {
        self.elements[t].dofs
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        self.elements[t].area
    }

    pub fn triangle_verts(&self, t: usize) -> [Point; 3] {
        self.elements[t].verts
    }

    /// Values and physical divergences of the 8 local nodal basis functions
    /// at a point of triangle t.
    pub fn basis_at(&self, t: usize, p: Point) -> ([[f64; 2]; 8], [f64; 8]) {
        let el = &self.elements[t];
        let xi = (p[0] - el.centroid[0]) * el.inv_scale;
        let eta = (p[1] - el.centroid[1]) * el.inv_scale;
        let mono = mono_values(xi, eta);
        let mono_div = mono_divs_local(xi, eta);
        let mut vals = [[0.0; 2]; 8];
        let mut divs = [0.0; 8];
        for k in 0..8 {
            let mut vx = 0.0;
            let mut vy = 0.0;
            let mut d = 0.0;
            for m in 0..8 {
                let c = el.coeff[(m, k)];
                vx += c * mono[m][0];
                vy += c * mono[m][1];
                d += c * mono_div[m];
            }
            vals[k] = [vx, vy];
            divs[k] = d * el.inv_scale;
        }
        (vals, divs)
    }

    /// The restriction of the coefficient combination to triangle t.
    pub fn local_poly(&self, t: usize, coeffs: &[f64]) -> RtLocal {
        let el = &self.elements[t];
        let mut c_loc = SVector::<f64, 8>::zeros();
        for (k, d) in el.dofs.iter().enumerate() {
            c_loc[k] = coeffs[*d];
        }
        RtLocal {
            w: el.coeff * c_loc,
            centroid: el.centroid,
            inv_scale: el.inv_scale,
        }
    }

    /// The local nodal basis function dual to local dof k on triangle t.
    pub fn basis_local(&self, t: usize, k: usize) -> RtLocal {
        let el = &self.elements[t];
        RtLocal {
            w: el.coeff.column(k).into_owned(),
            centroid: el.centroid,
            inv_scale: el.inv_scale,
        }
    }

    pub fn eval(&self, coeffs: &[f64], t: usize, p: Point) -> [f64; 2] {
        self.local_poly(t, coeffs).eval(p)
    }

    pub fn div_eval(&self, coeffs: &[f64], t: usize, p: Point) -> f64 {
        self.local_poly(t, coeffs).div(p)
    }

    /// Nodal interpolation: edge moments and element mean values of `field`.
    pub fn interpolate<F: Fn(Point) -> [f64; 2]>(&self, field: F) -> Vec<f64> {
        let erule = edge_rule(12).expect("static degree");
        let trule = triangle_rule(12).expect("static degree");
        let mesh = &self.mesh;
        let mut coeffs = vec![0.0; self.dim];
        for e in 0..mesh.num_edges() {
            let n = mesh.edge_normal(e);
            let mut m0 = 0.0;
            let mut m1 = 0.0;
            for (tq, wq) in erule.points.iter().zip(&erule.weights) {
                let v = field(mesh.edge_point(e, *tq));
                let vn = v[0] * n[0] + v[1] * n[1];
                m0 += wq * vn;
                m1 += wq * vn * edge_legendre(1, *tq);
            }
            coeffs[2 * e] = m0;
            coeffs[2 * e + 1] = m1;
        }
        for t in 0..mesh.num_triangles() {
            let el = &self.elements[t];
            let mut mean = [0.0, 0.0];
            for (lambda, wq) in trule.points.iter().zip(&trule.weights) {
                let p = [
                    lambda[0] * el.verts[0][0] + lambda[1] * el.verts[1][0] + lambda[2] * el.verts[2][0],
                    lambda[0] * el.verts[0][1] + lambda[1] * el.verts[1][1] + lambda[2] * el.verts[2][1],
                ];
                let v = field(p);
                mean[0] += wq * v[0];
                mean[1] += wq * v[1];
            }
            coeffs[el.dofs[6]] = mean[0];
            coeffs[el.dofs[7]] = mean[1];
        }
        coeffs
    }
}

#[derive(Debug, Clone)]
pub struct DgSpace {
    pub mesh: Arc<TriangleMesh>,
    /// Per triangle, gradient of each vertex basis function (constant).
    grads: Vec<[[f64; 2]; 3]>,
    areas: Vec<f64>,
    dim: usize,
}

impl DgSpace {
    pub fn new(mesh: Arc<TriangleMesh>) -> Result<Self> {
        let mut grads = Vec::with_capacity(mesh.num_triangles());
        let mut areas = Vec::with_capacity(mesh.num_triangles());
        for t in 0..mesh.num_triangles() {
            let v = mesh.triangle_vertices(t);
            let area = mesh.signed_area(t);
            if area <= 0.0 {
                return Err(Error::Assembly(format!("triangle {t} not positively oriented")));
            }
            let inv2a = 1.0 / (2.0 * area);
            let mut g = [[0.0; 2]; 3];
            for i in 0..3 {
                let a = v[(i + 1) % 3];
                let b = v[(i + 2) % 3];
                // gradient of the barycentric coordinate of vertex i
                g[i] = [-(b[1] - a[1]) * inv2a, (b[0] - a[0]) * inv2a];
            }
            grads.push(g);
            areas.push(area);
        }
        let dim = 3 * mesh.num_triangles();
        Ok(DgSpace { mesh, grads, areas, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn dof(t: usize, vertex: usize) -> usize {
        3 * t + vertex
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let v = self.mesh.triangle_vertices(t);
        let inv2a = 1.0 / (2.0 * self.areas[t]);
        let mut l = [0.0; 3];
        for i in 0..3 {
            let a = v[(i + 1) % 3];
            let b = v[(i + 2) % 3];
            l[i] = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) * inv2a;
        }
        l
    }

    pub fn eval(&self, coeffs: &[f64], t: usize, p: Point) -> f64 {
        let l = self.barycentric(t, p);
        l[0] * coeffs[3 * t] + l[1] * coeffs[3 * t + 1] + l[2] * coeffs[3 * t + 2]
    }

    /// Piecewise gradient on triangle t (constant).
    pub fn grad(&self, coeffs: &[f64], t: usize) -> [f64; 2] {
        let g = &self.grads[t];
        let mut out = [0.0, 0.0];
        for i in 0..3 {
            out[0] += coeffs[3 * t + i] * g[i][0];
            out[1] += coeffs[3 * t + i] * g[i][1];
        }
        out
    }

    pub fn basis_grads(&self, t: usize) -> &[[f64; 2]; 3] {
        &self.grads[t]
    }

    /// Per-element vertex interpolation.
    pub fn interpolate<F: Fn(Point) -> f64>(&self, f: F) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.dim];
        for t in 0..self.mesh.num_triangles() {
            let v = self.mesh.triangle_vertices(t);
            for i in 0..3 {
                coeffs[3 * t + i] = f(v[i]);
            }
        }
        coeffs
    }
}

/// Coefficient pair for the product space V_k x Q_k.
#[derive(Debug, Clone)]
pub struct BlockVector {
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    pub level: usize,
}

impl BlockVector {
    pub fn zeros(dim_v: usize, dim_q: usize, level: usize) -> Self {
        BlockVector {
            v: vec![0.0; dim_v],
            q: vec![0.0; dim_q],
            level,
        }
    }

    pub fn axpy(&mut self, alpha: f64, x: &BlockVector) {
        for (a, b) in self.v.iter_mut().zip(&x.v) {
            *a += alpha * b;
        }
        for (a, b) in self.q.iter_mut().zip(&x.q) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.v.iter_mut().for_each(|a| *a *= alpha);
        self.q.iter_mut().for_each(|a| *a *= alpha);
    }

    pub fn fill(&mut self, value: f64) {
        self.v.fill(value);
        self.q.fill(value);
    }
}

fn consecutive_levels(coarse: &TriangleMesh, fine: &TriangleMesh) -> Result<()> {
    if fine.level != coarse.level + 1 || fine.num_triangles() != 4 * coarse.num_triangles() {
        return Err(Error::Dimension(format!(
            "injection requires consecutive levels, got {} -> {}",
            coarse.level, fine.level
        )));
    }
    Ok(())
}

/// Injection matrix realizing V_{k-1} subset V_k: maps coarse coefficients to
/// the fine coefficients of the same function.
pub fn injection_matrix_rt(
    coarse: &RtSpace,
    fine: &RtSpace,
    children: &[[usize; 4]],
) -> Result<CsrMatrix> {
    consecutive_levels(&coarse.mesh, &fine.mesh)?;
    let erule = edge_rule(8)?;
    let trule = triangle_rule(8)?;

    let mut parent_of = vec![0usize; fine.mesh.num_triangles()];
    for (t, kids) in children.iter().enumerate() {
        for &kid in kids {
            parent_of[kid] = t;
        }
    }

    let mut triplets: Vec<(usize, usize, f64)> =
        Vec::with_capacity(16 * fine.mesh.num_edges() + 16 * fine.mesh.num_triangles());

    // Fine edge dofs: moments of the coarse basis functions of the parent of
    // the edge's `from` triangle. Basis functions of the other parent have
    // vanishing normal trace there except for the shared coarse edge dofs,
    // whose traces are single-valued, so one side covers every nonzero entry.
    for fe in 0..fine.mesh.num_edges() {
        let ft = fine.mesh.edge_adjacency[fe].from;
        let ct = parent_of[ft];
        let n = fine.mesh.edge_normal(fe);
        let cdofs = coarse.local_dofs(ct);
        let mut moments = [[0.0f64; 2]; 8];
        for (tq, wq) in erule.points.iter().zip(&erule.weights) {
            let p = fine.mesh.edge_point(fe, *tq);
            let (vals, _) = coarse.basis_at(ct, p);
            let l1 = edge_legendre(1, *tq);
            for k in 0..8 {
                let vn = vals[k][0] * n[0] + vals[k][1] * n[1];
                moments[k][0] += wq * vn;
                moments[k][1] += wq * vn * l1;
            }
        }
        for k in 0..8 {
            for i in 0..2 {
                triplets.push((2 * fe + i, cdofs[k], moments[k][i]));
            }
        }
    }

    // Fine interior dofs: mean values of the coarse basis over each child.
    for (ct, kids) in children.iter().enumerate() {
        let cdofs = coarse.local_dofs(ct);
        for &kid in kids {
            let vk = fine.triangle_verts(kid);
            let mut mean = [[0.0f64; 2]; 8];
            for (lambda, wq) in trule.points.iter().zip(&trule.weights) {
                let p = [
                    lambda[0] * vk[0][0] + lambda[1] * vk[1][0] + lambda[2] * vk[2][0],
                    lambda[0] * vk[0][1] + lambda[1] * vk[1][1] + lambda[2] * vk[2][1],
                ];
                let (vals, _) = coarse.basis_at(ct, p);
                for k in 0..8 {
                    mean[k][0] += wq * vals[k][0];
                    mean[k][1] += wq * vals[k][1];
                }
            }
            for k in 0..8 {
                for c in 0..2 {
                    triplets.push((fine.interior_dof(kid, c), cdofs[k], mean[k][c]));
                }
            }
        }
    }

    Ok(CsrMatrix::from_triplets(fine.dim(), coarse.dim(), &triplets))
}

/// Injection matrix realizing Q_{k-1} subset Q_k (pointwise evaluation of the
/// coarse linear function at the child vertices).
pub fn injection_matrix_dg(
    coarse: &DgSpace,
    fine: &DgSpace,
    children: &[[usize; 4]],
) -> Result<CsrMatrix> {
    consecutive_levels(&coarse.mesh, &fine.mesh)?;
    let mut triplets = Vec::with_capacity(9 * fine.mesh.num_triangles());
    for (ct, kids) in children.iter().enumerate() {
        for &kid in kids {
            let vk = fine.mesh.triangle_vertices(kid);
            for i in 0..3 {
                let l = coarse.barycentric(ct, vk[i]);
                for k in 0..3 {
                    if l[k] != 0.0 {
                        triplets.push((DgSpace::dof(kid, i), DgSpace::dof(ct, k), l[k]));
                    }
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(fine.dim(), coarse.dim(), &triplets))
}
