//! Mesh-dependent norms, discretization errors against exact solutions, and
//! the constructive inf-sup witness.
//!
//! Vector norm: elementwise L2 plus edge-length-weighted normal traces,
//!   |v|^2 = sum_T ||v||_T^2 + sum_s h_s ||v.n_s||_s^2.
//! Scalar norm: broken H1 plus jump penalty (boundary edges included),
//!   |q|^2 = sum_T ||grad q||_T^2 + sum_s h_s^-1 ||[q]||_s^2.

use crate::assembly::NORM_DEGREE;
use crate::mesh::TriangleMesh;
use crate::problem::ExactSolution;
use crate::quadrature::{edge_rule, triangle_rule};
use crate::spaces::{edge_legendre, DgSpace, RtSpace};

#[derive(Debug, Clone, Copy)]
pub struct ErrorReport {
    /// Flux error |u - u_h| in the mesh-dependent L2 norm.
    pub e_u: f64,
    /// Pressure error |p - p_h| in the broken-H1/jump norm.
    pub e_p: f64,
    pub h_grid: f64,
    pub level: usize,
}

/// Mesh-dependent L2-type norm of a discrete velocity field.
pub fn flux_norm_coeffs(rt: &RtSpace, coeffs: &[f64]) -> f64 {
    let mesh = &rt.mesh;
    let trule = triangle_rule(NORM_DEGREE).expect("static degree");
    let erule = edge_rule(NORM_DEGREE).expect("static degree");
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let local = rt.local_poly(t, coeffs);
        let verts = rt.triangle_verts(t);
        for (p, w) in trule.mapped(&verts, rt.triangle_area(t)) {
            let v = local.eval(p);
            total += w * (v[0] * v[0] + v[1] * v[1]);
        }
    }
    for e in 0..mesh.num_edges() {
        let adj = mesh.edge_adjacency[e];
        let n = mesh.edge_normal(e);
        let len = mesh.edge_length(e);
        let local = rt.local_poly(adj.from, coeffs);
        let mut edge = 0.0;
        for (tq, wq) in erule.points.iter().zip(&erule.weights) {
            let p = mesh.edge_point(e, *tq);
            let v = local.eval(p);
            let vn = v[0] * n[0] + v[1] * n[1];
            edge += wq * vn * vn;
        }
        // h_s * int_s (v.n)^2 ds with h_s = |s|
        total += len * len * edge;
    }
    total.sqrt()
}

/// Same norm for an analytic vector field.
pub fn flux_norm_field<F: Fn([f64; 2]) -> [f64; 2]>(mesh: &TriangleMesh, field: F) -> f64 {
    let trule = triangle_rule(NORM_DEGREE).expect("static degree");
    let erule = edge_rule(NORM_DEGREE).expect("static degree");
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let verts = mesh.triangle_vertices(t);
        for (p, w) in trule.mapped(&verts, mesh.signed_area(t)) {
            let v = field(p);
            total += w * (v[0] * v[0] + v[1] * v[1]);
        }
    }
    for e in 0..mesh.num_edges() {
        let n = mesh.edge_normal(e);
        let len = mesh.edge_length(e);
        let mut edge = 0.0;
        for (tq, wq) in erule.points.iter().zip(&erule.weights) {
            let v = field(mesh.edge_point(e, *tq));
            let vn = v[0] * n[0] + v[1] * n[1];
            edge += wq * vn * vn;
        }
        total += len * len * edge;
    }
    total.sqrt()
}

/// Broken-H1/jump norm of a discrete pressure; independent quadrature path
/// from the assembled stiffness matrix.
pub fn dg_norm_coeffs(dg: &DgSpace, coeffs: &[f64]) -> f64 {
    let mesh = &dg.mesh;
    let erule = edge_rule(NORM_DEGREE).expect("static degree");
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let g = dg.grad(coeffs, t);
        total += dg.triangle_area(t) * (g[0] * g[0] + g[1] * g[1]);
    }
    for e in 0..mesh.num_edges() {
        let adj = mesh.edge_adjacency[e];
        let mut edge = 0.0;
        for (tq, wq) in erule.points.iter().zip(&erule.weights) {
            let p = mesh.edge_point(e, *tq);
            let jump = match adj.to {
                Some(to) => dg.eval(coeffs, adj.from, p) - dg.eval(coeffs, to, p),
                None => dg.eval(coeffs, adj.from, p),
            };
            edge += wq * jump * jump;
        }
        // h_s^-1 int_s [q]^2 ds = plain parameter integral for h_s = |s|
        total += edge;
    }
    total.sqrt()
}

/// Discretization errors of a discrete pair against the exact solution.
/// Boundary jumps of the pressure error use the exact boundary value 0, so
/// [p - p_h] = -p_h n there.
pub fn error_norms(
    rt: &RtSpace,
    dg: &DgSpace,
    uh: &[f64],
    ph: &[f64],
    exact: &ExactSolution,
) -> ErrorReport {
    let mesh = &rt.mesh;
    let trule = triangle_rule(NORM_DEGREE).expect("static degree");
    let erule = edge_rule(NORM_DEGREE).expect("static degree");

    let mut eu2 = 0.0;
    let mut ep2 = 0.0;
    for t in 0..mesh.num_triangles() {
        let local = rt.local_poly(t, uh);
        let gh = dg.grad(ph, t);
        let verts = mesh.triangle_vertices(t);
        for (p, w) in trule.mapped(&verts, mesh.signed_area(t)) {
            let ue = (exact.u)(p);
            let uv = local.eval(p);
            eu2 += w * ((uv[0] - ue[0]).powi(2) + (uv[1] - ue[1]).powi(2));
            let ge = (exact.grad_p)(p);
            ep2 += w * ((gh[0] - ge[0]).powi(2) + (gh[1] - ge[1]).powi(2));
        }
    }
    for e in 0..mesh.num_edges() {
        let adj = mesh.edge_adjacency[e];
        let n = mesh.edge_normal(e);
        let len = mesh.edge_length(e);
        let local = rt.local_poly(adj.from, uh);
        let mut flux_edge = 0.0;
        let mut jump_edge = 0.0;
        for (tq, wq) in erule.points.iter().zip(&erule.weights) {
            let p = mesh.edge_point(e, *tq);
            let ue = (exact.u)(p);
            let uv = local.eval(p);
            let dn = (uv[0] - ue[0]) * n[0] + (uv[1] - ue[1]) * n[1];
            flux_edge += wq * dn * dn;
            // exact p is continuous (interior) and zero on the boundary
            let jump = match adj.to {
                Some(to) => dg.eval(ph, adj.from, p) - dg.eval(ph, to, p),
                None => dg.eval(ph, adj.from, p),
            };
            jump_edge += wq * jump * jump;
        }
        eu2 += len * len * flux_edge;
        ep2 += jump_edge;
    }

    ErrorReport {
        e_u: eu2.sqrt(),
        e_p: ep2.sqrt(),
        h_grid: mesh.h_grid,
        level: mesh.level,
    }
}

/// Constructive inf-sup witness: the velocity field whose normal traces are
/// -h_s^-1 [q].n_s and whose element mean values are the broken gradient of
/// q, so that b(v_q, q) equals the squared broken-H1/jump norm of q exactly.
pub fn infsup_witness(rt: &RtSpace, dg: &DgSpace, q: &[f64]) -> Vec<f64> {
    let mesh = &rt.mesh;
    let erule = edge_rule(8).expect("static degree");
    let mut coeffs = vec![0.0; rt.dim()];
    for e in 0..mesh.num_edges() {
        let adj = mesh.edge_adjacency[e];
        let inv_len = 1.0 / mesh.edge_length(e);
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        for (tq, wq) in erule.points.iter().zip(&erule.weights) {
            let p = mesh.edge_point(e, *tq);
            let jump_n = match adj.to {
                Some(to) => dg.eval(q, adj.from, p) - dg.eval(q, to, p),
                None => adj.from_sign * dg.eval(q, adj.from, p),
            };
            let g = -inv_len * jump_n;
            m0 += wq * g;
            m1 += wq * g * edge_legendre(1, *tq);
        }
        coeffs[2 * e] = m0;
        coeffs[2 * e + 1] = m1;
    }
    for t in 0..mesh.num_triangles() {
        let g = dg.grad(q, t);
        coeffs[rt.interior_dof(t, 0)] = g[0];
        coeffs[rt.interior_dof(t, 1)] = g[1];
    }
    coeffs
}
