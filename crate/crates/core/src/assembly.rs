//! Assembly of the saddle-point blocks, lumped inner products and the DG
//! stiffness matrix.
//!
//! Conventions: b carries the minus sign (b(v,q) = -int (div v) q), the load
//! carries the minus sign (F(q) = -int f q), and the advection/reaction block
//! enters the combined system with a minus sign,
//! K = [[A, B^T], [B, -C]].

use crate::error::{Error, Result};
use crate::problem::{ProblemKind, ProblemSpec, ScalarFn, VectorFn};
use crate::quadrature::{edge_rule, triangle_rule};
use crate::spaces::{BlockVector, DgSpace, RtSpace};
use crate::sparse::CsrMatrix;

/// Quadrature degree for bilinear-form assembly (exact for the polynomial
/// integrands of the constant-coefficient forms).
pub const ASSEMBLY_DEGREE: usize = 8;
/// Quadrature degree for load vectors and error norms.
pub const NORM_DEGREE: usize = 12;

/// Positive diagonals realizing the mesh-dependent inner products: (v,w)_k on
/// the velocity space and the lumped pressure product on the DG space. The
/// combined product is h^2 (v,w)_k + lumped(q,r).
#[derive(Debug, Clone)]
pub struct LumpedMass {
    pub mv: Vec<f64>,
    pub mq: Vec<f64>,
    pub h_grid: f64,
}

/// Matrix of the broken-gradient plus jump-penalty form
/// d(q,r) = sum_T int grad q . grad r + sum_edges |s|^-1 int [q].[r],
/// boundary edges included.
#[derive(Debug, Clone)]
pub struct DgStiffness {
    pub d_mat: CsrMatrix,
}

/// The saddle-point operator K = [[A, B^T],[B, -C]] acting on coefficient
/// pairs. For the Darcy kind C is absent and K is symmetric.
#[derive(Debug, Clone)]
pub struct SaddleMatrix {
    pub a_block: CsrMatrix,
    pub b_block: CsrMatrix,
    pub bt_block: CsrMatrix,
    pub c_block: Option<CsrMatrix>,
    pub ct_block: Option<CsrMatrix>,
    pub dim_v: usize,
    pub dim_q: usize,
}

impl SaddleMatrix {
    /// y = K x, with y in the dual representation.
    pub fn apply(&self, x: &BlockVector, y: &mut BlockVector) {
        self.apply_impl(x, y, false);
    }

    /// y = K^T x (only the advection block transposes).
    pub fn apply_transpose(&self, x: &BlockVector, y: &mut BlockVector) {
        self.apply_impl(x, y, true);
    }

    fn apply_impl(&self, x: &BlockVector, y: &mut BlockVector, transpose: bool) {
        debug_assert_eq!(x.v.len(), self.dim_v);
        debug_assert_eq!(x.q.len(), self.dim_q);
        self.a_block.matvec(&x.v, &mut y.v);
        self.bt_block.matvec_add(1.0, &x.q, &mut y.v);
        self.b_block.matvec(&x.v, &mut y.q);
        let c = if transpose { &self.ct_block } else { &self.c_block };
        if let Some(c) = c {
            c.matvec_add(-1.0, &x.q, &mut y.q);
        }
    }

    /// The bilinear pairing of x against the test pair y: y^T K x.
    pub fn pairing(&self, x: &BlockVector, y: &BlockVector) -> f64 {
        let mut kx = BlockVector::zeros(self.dim_v, self.dim_q, x.level);
        self.apply(x, &mut kx);
        dot(&kx.v, &y.v) + dot(&kx.q, &y.q)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim_v + self.dim_q;
        let mut k = nalgebra::DMatrix::zeros(n, n);
        k.view_mut((0, 0), (self.dim_v, self.dim_v))
            .copy_from(&self.a_block.to_dense());
        k.view_mut((0, self.dim_v), (self.dim_v, self.dim_q))
            .copy_from(&self.bt_block.to_dense());
        k.view_mut((self.dim_v, 0), (self.dim_q, self.dim_v))
            .copy_from(&self.b_block.to_dense());
        if let Some(c) = &self.c_block {
            let mut view = k.view_mut((self.dim_v, self.dim_v), (self.dim_q, self.dim_q));
            view -= c.to_dense();
        }
        k
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weighted velocity mass matrix: entry (i,j) = int (A^-1 phi_j) . phi_i.
pub fn assemble_a(rt: &RtSpace, a_inv: &dyn Fn([f64; 2]) -> [[f64; 2]; 2]) -> CsrMatrix {
    let rule = triangle_rule(ASSEMBLY_DEGREE).expect("static degree");
    let mesh = &rt.mesh;
    let mut triplets = Vec::with_capacity(64 * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let dofs = rt.local_dofs(t);
        let verts = rt.triangle_verts(t);
        let mut local = [[0.0f64; 8]; 8];
        for (p, w) in rule.mapped(&verts, rt.triangle_area(t)) {
            let (vals, _) = rt.basis_at(t, p);
            let m = a_inv(p);
            let mut av = [[0.0f64; 2]; 8];
            for j in 0..8 {
                av[j] = [
                    m[0][0] * vals[j][0] + m[0][1] * vals[j][1],
                    m[1][0] * vals[j][0] + m[1][1] * vals[j][1],
                ];
            }
            for i in 0..8 {
                for j in 0..8 {
                    local[i][j] += w * (av[j][0] * vals[i][0] + av[j][1] * vals[i][1]);
                }
            }
        }
        for i in 0..8 {
            for j in 0..8 {
                triplets.push((dofs[i], dofs[j], local[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(rt.dim(), rt.dim(), &triplets)
}

/// Divergence coupling: entry (i,j) = -int (div phi_j) psi_i.
pub fn assemble_b(rt: &RtSpace, dg: &DgSpace) -> CsrMatrix {
    let rule = triangle_rule(ASSEMBLY_DEGREE).expect("static degree");
    let mesh = &rt.mesh;
    let mut triplets = Vec::with_capacity(24 * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let dofs = rt.local_dofs(t);
        let verts = rt.triangle_verts(t);
        let mut local = [[0.0f64; 8]; 3];
        for (p, w) in rule.mapped(&verts, rt.triangle_area(t)) {
            let (_, divs) = rt.basis_at(t, p);
            let lambda = dg.barycentric(t, p);
            for i in 0..3 {
                for j in 0..8 {
                    local[i][j] -= w * divs[j] * lambda[i];
                }
            }
        }
        for i in 0..3 {
            for j in 0..8 {
                triplets.push((DgSpace::dof(t, i), dofs[j], local[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(dg.dim(), rt.dim(), &triplets)
}

/// Advection/reaction form: entry (i,j) = int (gamma psi_j + beta . grad psi_j) psi_i.
/// The gradient sits on the first argument of c(r,q).
pub fn assemble_c(dg: &DgSpace, beta: &VectorFn, gamma: &ScalarFn) -> CsrMatrix {
    let rule = triangle_rule(ASSEMBLY_DEGREE).expect("static degree");
    let mesh = &dg.mesh;
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let grads = *dg.basis_grads(t);
        let verts = mesh.triangle_vertices(t);
        let mut local = [[0.0f64; 3]; 3];
        for (p, w) in rule.mapped(&verts, dg.triangle_area(t)) {
            let lambda = dg.barycentric(t, p);
            let b = beta(p);
            let g = gamma(p);
            for j in 0..3 {
                let tj = g * lambda[j] + b[0] * grads[j][0] + b[1] * grads[j][1];
                for i in 0..3 {
                    local[i][j] += w * tj * lambda[i];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((DgSpace::dof(t, i), DgSpace::dof(t, j), local[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(dg.dim(), dg.dim(), &triplets)
}

/// Load vector on the pressure space: entry i = -int f psi_i. The velocity
/// block of the dual load is zero.
pub fn assemble_rhs(dg: &DgSpace, f: &ScalarFn) -> Vec<f64> {
    let rule = triangle_rule(NORM_DEGREE).expect("static degree");
    let mesh = &dg.mesh;
    let mut rhs = vec![0.0; dg.dim()];
    for t in 0..mesh.num_triangles() {
        let verts = mesh.triangle_vertices(t);
        for (p, w) in rule.mapped(&verts, dg.triangle_area(t)) {
            let lambda = dg.barycentric(t, p);
            let fp = f(p);
            for i in 0..3 {
                rhs[DgSpace::dof(t, i)] -= w * fp * lambda[i];
            }
        }
    }
    rhs
}

/// Diagonals of the consistent mass matrices (identity velocity coefficient).
/// Diagonal extraction rather than row sums: RT1 row sums can vanish or turn
/// negative, the diagonal is always positive.
pub fn lumped_masses(rt: &RtSpace, dg: &DgSpace) -> Result<LumpedMass> {
    let rule = triangle_rule(ASSEMBLY_DEGREE).expect("static degree");
    let mesh = &rt.mesh;
    let mut mv = vec![0.0; rt.dim()];
    for t in 0..mesh.num_triangles() {
        let dofs = rt.local_dofs(t);
        let verts = rt.triangle_verts(t);
        for (p, w) in rule.mapped(&verts, rt.triangle_area(t)) {
            let (vals, _) = rt.basis_at(t, p);
            for i in 0..8 {
                mv[dofs[i]] += w * (vals[i][0] * vals[i][0] + vals[i][1] * vals[i][1]);
            }
        }
    }
    // int_T psi_i^2 = |T|/6 for the P1 vertex basis
    let mut mq = vec![0.0; dg.dim()];
    for t in 0..mesh.num_triangles() {
        let a6 = dg.triangle_area(t) / 6.0;
        for i in 0..3 {
            mq[DgSpace::dof(t, i)] = a6;
        }
    }
    for (i, m) in mv.iter().enumerate() {
        if *m <= 0.0 {
            return Err(Error::Assembly(format!(
                "nonpositive velocity mass diagonal {m:e} at dof {i}"
            )));
        }
    }
    if mq.iter().any(|m| *m <= 0.0) {
        return Err(Error::Assembly("nonpositive pressure mass diagonal".into()));
    }
    Ok(LumpedMass {
        mv,
        mq,
        h_grid: mesh.h_grid,
    })
}

/// Broken-gradient plus jump-penalty matrix (SPD; boundary edges penalized,
/// so there is no constant kernel).
pub fn assemble_dg_stiffness(dg: &DgSpace) -> DgStiffness {
    let erule = edge_rule(ASSEMBLY_DEGREE).expect("static degree");
    let mesh = &dg.mesh;
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles() + 36 * mesh.num_edges());

    for t in 0..mesh.num_triangles() {
        let grads = dg.basis_grads(t);
        let area = dg.triangle_area(t);
        for i in 0..3 {
            for j in 0..3 {
                let v = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                triplets.push((DgSpace::dof(t, i), DgSpace::dof(t, j), v));
            }
        }
    }

    // Penalty weight 1/h_s with h_s = |s|, so the edge integral
    // h_s^-1 int_s [q].[r] ds reduces to a plain parameter integral.
    for e in 0..mesh.num_edges() {
        let adj = mesh.edge_adjacency[e];
        let mut local = [[0.0f64; 6]; 6];
        let ndofs = if adj.to.is_some() { 6 } else { 3 };
        for (tq, wq) in erule.points.iter().zip(&erule.weights) {
            let p = mesh.edge_point(e, *tq);
            let mut jumps = [0.0f64; 6];
            let lf = dg.barycentric(adj.from, p);
            jumps[..3].copy_from_slice(&lf);
            if let Some(to) = adj.to {
                let lt = dg.barycentric(to, p);
                for i in 0..3 {
                    jumps[3 + i] = -lt[i];
                }
            }
            for i in 0..ndofs {
                for j in 0..ndofs {
                    local[i][j] += wq * jumps[i] * jumps[j];
                }
            }
        }
        let mut dofs = [0usize; 6];
        for i in 0..3 {
            dofs[i] = DgSpace::dof(adj.from, i);
            if let Some(to) = adj.to {
                dofs[3 + i] = DgSpace::dof(to, i);
            }
        }
        for i in 0..ndofs {
            for j in 0..ndofs {
                triplets.push((dofs[i], dofs[j], local[i][j]));
            }
        }
    }

    DgStiffness {
        d_mat: CsrMatrix::from_triplets(dg.dim(), dg.dim(), &triplets),
    }
}

/// Assemble all blocks of K for the given problem.
pub fn saddle_matrix(problem: &ProblemSpec, rt: &RtSpace, dg: &DgSpace) -> SaddleMatrix {
    let a_inv = problem.a_inv.clone();
    let a_block = assemble_a(rt, &move |p| a_inv(p));
    let b_block = assemble_b(rt, dg);
    let bt_block = b_block.transpose();
    let (c_block, ct_block) = match problem.kind {
        ProblemKind::Darcy => (None, None),
        ProblemKind::General => {
            let c = assemble_c(dg, &problem.beta, &problem.gamma);
            let ct = c.transpose();
            (Some(c), Some(ct))
        }
    };
    SaddleMatrix {
        a_block,
        b_block,
        bt_block,
        c_block,
        ct_block,
        dim_v: rt.dim(),
        dim_q: dg.dim(),
    }
}
