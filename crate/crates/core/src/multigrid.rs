//! Block-preconditioned W-/V-cycle multigrid for the saddle-point systems.
//!
//! The system operator at level k is B = M^-1 K, where M is the block
//! diagonal h_k^2 Mv + Mq of lumped masses realizing the mesh-dependent inner
//! product. Richardson smoothing uses the block preconditioner
//! S(v,q) = (h_k^2 v, L q), where L is one symmetric V(4,4) multigrid cycle
//! for the broken-gradient/jump-penalty matrix with damped Jacobi smoothing.
//! Pre-smoothing applies S B (S B^t for the nonsymmetric problems),
//! post-smoothing the reversed product, with a damping factor calibrated per
//! level from a measured spectral radius so that delta * rho <= 1.

use crate::assembly::{
    assemble_a, assemble_dg_stiffness, assemble_rhs, lumped_masses, saddle_matrix, LumpedMass,
    SaddleMatrix,
};
use crate::error::{Error, Result};
use crate::mesh::{MeshHierarchy, TriangleMesh};
use crate::problem::{ProblemKind, ProblemSpec, ScalarFn};
use crate::spaces::{injection_matrix_dg, injection_matrix_rt, BlockVector, DgSpace, RtSpace};
use crate::sparse::CsrMatrix;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleKind {
    W,
    V,
}

impl CycleKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "w" | "W" => Ok(CycleKind::W),
            "v" | "V" => Ok(CycleKind::V),
            other => Err(Error::Config(format!("unknown cycle kind '{other}'"))),
        }
    }

    fn recursions(self) -> usize {
        match self {
            CycleKind::W => 2,
            CycleKind::V => 1,
        }
    }
}

/// Smoother variant: the symmetric product for Darcy, the transposed
/// products for the general problem B x = g and its adjoint B^t x = g.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmootherKind {
    Symmetric,
    General,
    GeneralAdjoint,
}

#[derive(Debug, Clone, Copy)]
pub struct InnerConfig {
    pub pre: usize,
    pub post: usize,
    pub jacobi_weight: f64,
    pub coarse_level: usize,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig {
            pre: 4,
            post: 4,
            jacobi_weight: 2.0 / 3.0,
            coarse_level: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PowerIterConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for PowerIterConfig {
    fn default() -> Self {
        PowerIterConfig {
            max_iters: 600,
            tol: 1e-4,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MgConfig {
    pub cycle: CycleKind,
    pub m1: usize,
    pub m2: usize,
    /// Safety factor: delta = theta / rho_est.
    pub theta: f64,
    pub inner: InnerConfig,
    pub coarse_level: usize,
    pub power_iter: PowerIterConfig,
    /// Scaling knobs for the velocity blocks (calibration experiments).
    pub v_mass_scale: f64,
    pub v_precond_scale: f64,
}

impl Default for MgConfig {
    fn default() -> Self {
        MgConfig {
            cycle: CycleKind::W,
            m1: 10,
            m2: 10,
            theta: 1.0,
            inner: InnerConfig::default(),
            coarse_level: 0,
            power_iter: PowerIterConfig::default(),
            v_mass_scale: 1.0,
            v_precond_scale: 1.0,
        }
    }
}

struct InnerLevel {
    mat: CsrMatrix,
    diag: Vec<f64>,
}

pub struct LevelData {
    pub mesh: Arc<TriangleMesh>,
    pub rt: RtSpace,
    pub dg: DgSpace,
    pub k_mat: SaddleMatrix,
    pub mass: LumpedMass,
    /// Consistent velocity mass matrix (identity coefficient), used for the
    /// L2 part of the combined norm.
    pub mv_consistent: CsrMatrix,
    pub d_mat: CsrMatrix,
    d_diag: Vec<f64>,
    /// Galerkin products P^T D P of this level's stiffness, one per coarser
    /// level down to the inner coarse level; they form the hierarchy of the
    /// inner pressure preconditioner.
    inner_chain: Vec<InnerLevel>,
    /// Factorization of the chain bottom.
    lu_inner: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// Injections from level k-1 (absent on the coarsest level).
    pub p_rt: Option<CsrMatrix>,
    pub p_dg: Option<CsrMatrix>,
    pub delta: f64,
    pub rho_est: f64,
    pub h: f64,
}

impl LevelData {
    pub fn dim_v(&self) -> usize {
        self.rt.dim()
    }

    pub fn dim_q(&self) -> usize {
        self.dg.dim()
    }
}

pub struct MgState {
    pub levels: Vec<LevelData>,
    pub kind: SmootherKind,
    pub config: MgConfig,
    lu_coarse_k: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothPhase {
    Pre,
    Post,
}

/// Assemble every level and calibrate the damping factors.
pub fn setup(hierarchy: &MeshHierarchy, problem: &ProblemSpec, config: MgConfig) -> Result<MgState> {
    if config.coarse_level >= hierarchy.levels.len() {
        return Err(Error::Config(format!(
            "coarse level {} outside hierarchy of {} levels",
            config.coarse_level,
            hierarchy.levels.len()
        )));
    }

    let ic = config.inner.coarse_level;
    let mut levels: Vec<LevelData> = Vec::with_capacity(hierarchy.levels.len());
    for (k, mesh) in hierarchy.levels.iter().enumerate() {
        let mesh = Arc::new(mesh.clone());
        let rt = RtSpace::new(mesh.clone())?;
        let dg = DgSpace::new(mesh.clone())?;
        let k_mat = saddle_matrix(problem, &rt, &dg);
        let mut mass = lumped_masses(&rt, &dg)?;
        for m in mass.mv.iter_mut() {
            *m *= config.v_mass_scale;
        }
        let mv_consistent = assemble_a(&rt, &|_| [[1.0, 0.0], [0.0, 1.0]]);
        let d_mat = assemble_dg_stiffness(&dg).d_mat;
        let d_diag = d_mat.diagonal();
        let (p_rt, p_dg) = if k > 0 {
            let prev: &LevelData = levels.last().unwrap();
            (
                Some(injection_matrix_rt(&prev.rt, &rt, &hierarchy.child_map[k - 1])?),
                Some(injection_matrix_dg(&prev.dg, &dg, &hierarchy.child_map[k - 1])?),
            )
        } else {
            (None, None)
        };

        // Galerkin hierarchy P^T D P ... for the inner V-cycle of this level
        let mut inner_chain: Vec<InnerLevel> = Vec::new();
        if k > ic {
            let mut cur = {
                let p = p_dg.as_ref().unwrap();
                p.transpose().matmul(&d_mat.matmul(p))
            };
            for j in (ic..k).rev() {
                let next = if j > ic {
                    let p = levels[j].p_dg.as_ref().unwrap();
                    Some(p.transpose().matmul(&cur.matmul(p)))
                } else {
                    None
                };
                let diag = cur.diagonal();
                inner_chain.push(InnerLevel { mat: cur, diag });
                match next {
                    Some(next) => cur = next,
                    None => break,
                }
            }
            inner_chain.reverse(); // position j - ic holds the level-j operator
        }
        let lu_inner = if k <= ic {
            d_mat.to_dense().lu()
        } else {
            inner_chain[0].mat.to_dense().lu()
        };

        levels.push(LevelData {
            h: mesh.h_grid,
            mesh,
            rt,
            dg,
            k_mat,
            mass,
            mv_consistent,
            d_mat,
            d_diag,
            inner_chain,
            lu_inner,
            p_rt,
            p_dg,
            delta: 0.0,
            rho_est: 0.0,
        });
    }

    let coarse = &levels[config.coarse_level];
    let lu_coarse_k = coarse.k_mat.to_dense().lu();

    let kind = match problem.kind {
        ProblemKind::Darcy => SmootherKind::Symmetric,
        ProblemKind::General => SmootherKind::General,
    };

    let mut state = MgState {
        levels,
        kind,
        config,
        lu_coarse_k,
    };

    for k in (config.coarse_level + 1)..state.levels.len() {
        let rho = state.estimate_smoother_radius(k)?;
        state.levels[k].rho_est = rho;
        state.levels[k].delta = config.theta / rho;
    }

    Ok(state)
}

impl MgState {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn zeros(&self, k: usize) -> BlockVector {
        BlockVector::zeros(self.levels[k].dim_v(), self.levels[k].dim_q(), k)
    }

    /// Dual load vector (0, -int f psi_i).
    pub fn load_vector(&self, k: usize, f: &ScalarFn) -> BlockVector {
        let lvl = &self.levels[k];
        BlockVector {
            v: vec![0.0; lvl.dim_v()],
            q: assemble_rhs(&lvl.dg, f),
            level: k,
        }
    }

    /// Mesh-dependent inner product [x, y]_k = h^2 (v,v)_k + lumped(q,q).
    pub fn mass_inner(&self, k: usize, x: &BlockVector, y: &BlockVector) -> f64 {
        let lvl = &self.levels[k];
        let h2 = lvl.h * lvl.h;
        let mut acc = 0.0;
        for i in 0..lvl.dim_v() {
            acc += h2 * lvl.mass.mv[i] * x.v[i] * y.v[i];
        }
        for i in 0..lvl.dim_q() {
            acc += lvl.mass.mq[i] * x.q[i] * y.q[i];
        }
        acc
    }

    fn apply_m(&self, k: usize, x: &BlockVector, out: &mut BlockVector) {
        let lvl = &self.levels[k];
        let h2 = lvl.h * lvl.h;
        for i in 0..lvl.dim_v() {
            out.v[i] = h2 * lvl.mass.mv[i] * x.v[i];
        }
        for i in 0..lvl.dim_q() {
            out.q[i] = lvl.mass.mq[i] * x.q[i];
        }
    }

    fn apply_m_inv_in_place(&self, k: usize, x: &mut BlockVector) {
        let lvl = &self.levels[k];
        let h2 = lvl.h * lvl.h;
        for i in 0..lvl.dim_v() {
            x.v[i] /= h2 * lvl.mass.mv[i];
        }
        for i in 0..lvl.dim_q() {
            x.q[i] /= lvl.mass.mq[i];
        }
    }

    /// The system operator B = M^-1 K (or its [.,.]-transpose M^-1 K^t).
    pub fn apply_system(&self, k: usize, x: &BlockVector, transpose: bool) -> BlockVector {
        let lvl = &self.levels[k];
        let mut y = self.zeros(k);
        if transpose {
            lvl.k_mat.apply_transpose(x, &mut y);
        } else {
            lvl.k_mat.apply(x, &mut y);
        }
        self.apply_m_inv_in_place(k, &mut y);
        y
    }

    /// One symmetric V-cycle for D u = d (d a dual vector on the pressure
    /// space); realizes the inner preconditioner L up to the lumped mass.
    /// Coarser levels of the cycle use the Galerkin products of this level's
    /// stiffness.
    pub fn pressure_precond(&self, k: usize, d: &[f64]) -> Vec<f64> {
        self.inner_cycle(k, k, d)
    }

    fn inner_cycle(&self, k_top: usize, j: usize, d: &[f64]) -> Vec<f64> {
        let ic = self.config.inner.coarse_level;
        if j == ic {
            let rhs = DVector::from_column_slice(d);
            let sol = self.levels[k_top]
                .lu_inner
                .solve(&rhs)
                .expect("inner coarse stiffness nonsingular");
            return sol.as_slice().to_vec();
        }
        let top = &self.levels[k_top];
        let (mat, diag) = if j == k_top {
            (&top.d_mat, &top.d_diag)
        } else {
            let lvl = &top.inner_chain[j - ic];
            (&lvl.mat, &lvl.diag)
        };
        let n = mat.nrows();
        let omega = self.config.inner.jacobi_weight;
        let mut u = vec![0.0; n];
        let mut r = vec![0.0; n];

        let jacobi = |u: &mut Vec<f64>, r: &mut Vec<f64>| {
            mat.matvec(u, r);
            for i in 0..n {
                u[i] += omega * (d[i] - r[i]) / diag[i];
            }
        };

        for _ in 0..self.config.inner.pre {
            jacobi(&mut u, &mut r);
        }

        mat.matvec(&u, &mut r);
        for i in 0..n {
            r[i] = d[i] - r[i];
        }
        let p_dg = self.levels[j].p_dg.as_ref().expect("transfer above coarse level");
        let mut rc = vec![0.0; p_dg.ncols()];
        p_dg.matvec_transpose(&r, &mut rc);
        let ec = self.inner_cycle(k_top, j - 1, &rc);
        let mut corr = vec![0.0; n];
        p_dg.matvec(&ec, &mut corr);
        for i in 0..n {
            u[i] += corr[i];
        }

        for _ in 0..self.config.inner.post {
            jacobi(&mut u, &mut r);
        }
        u
    }

    /// Block preconditioner S(v,q) = (h^2 v, L q).
    pub fn block_precond(&self, k: usize, x: &BlockVector) -> BlockVector {
        let lvl = &self.levels[k];
        let h2 = lvl.h * lvl.h * self.config.v_precond_scale;
        let mut dual_q = vec![0.0; lvl.dim_q()];
        for i in 0..lvl.dim_q() {
            dual_q[i] = lvl.mass.mq[i] * x.q[i];
        }
        BlockVector {
            v: x.v.iter().map(|v| h2 * v).collect(),
            q: self.pressure_precond(k, &dual_q),
            level: k,
        }
    }

    /// One damped Richardson step; the smoother product depends on the
    /// problem kind and the phase.
    pub fn smooth(&self, k: usize, x: &mut BlockVector, g: &BlockVector, phase: SmoothPhase) {
        let residual_transpose = self.kind == SmootherKind::GeneralAdjoint;
        let mut r = self.apply_system(k, x, residual_transpose);
        for (ri, gi) in r.v.iter_mut().zip(&g.v) {
            *ri = gi - *ri;
        }
        for (ri, gi) in r.q.iter_mut().zip(&g.q) {
            *ri = gi - *ri;
        }

        let dir = match (self.kind, phase) {
            (SmootherKind::Symmetric, SmoothPhase::Pre) => {
                self.block_precond(k, &self.apply_system(k, &r, false))
            }
            (SmootherKind::Symmetric, SmoothPhase::Post) => {
                self.apply_system(k, &self.block_precond(k, &r), false)
            }
            (SmootherKind::General, SmoothPhase::Pre) => {
                self.block_precond(k, &self.apply_system(k, &r, true))
            }
            (SmootherKind::General, SmoothPhase::Post) => {
                self.apply_system(k, &self.block_precond(k, &r), true)
            }
            (SmootherKind::GeneralAdjoint, SmoothPhase::Pre) => {
                self.block_precond(k, &self.apply_system(k, &r, false))
            }
            (SmootherKind::GeneralAdjoint, SmoothPhase::Post) => {
                self.apply_system(k, &self.block_precond(k, &r), false)
            }
        };
        x.axpy(self.levels[k].delta, &dir);
    }

    /// Fine-to-coarse transfer, the transpose of the injection with respect
    /// to the mesh-dependent inner products.
    pub fn restrict_primal(&self, k: usize, x: &BlockVector) -> BlockVector {
        let mut dual = self.zeros(k);
        self.apply_m(k, x, &mut dual);
        let mut coarse = self.restrict_dual(k, &dual);
        self.apply_m_inv_in_place(k - 1, &mut coarse);
        coarse
    }

    fn restrict_dual(&self, k: usize, dual: &BlockVector) -> BlockVector {
        let lvl = &self.levels[k];
        let p_rt = lvl.p_rt.as_ref().expect("transfer above coarse level");
        let p_dg = lvl.p_dg.as_ref().expect("transfer above coarse level");
        let mut out = self.zeros(k - 1);
        p_rt.matvec_transpose(&dual.v, &mut out.v);
        p_dg.matvec_transpose(&dual.q, &mut out.q);
        out
    }

    /// Coarse-to-fine injection.
    pub fn prolong(&self, k: usize, coarse: &BlockVector) -> BlockVector {
        let lvl = &self.levels[k];
        let p_rt = lvl.p_rt.as_ref().expect("transfer above coarse level");
        let p_dg = lvl.p_dg.as_ref().expect("transfer above coarse level");
        let mut out = self.zeros(k);
        p_rt.matvec(&coarse.v, &mut out.v);
        p_dg.matvec(&coarse.q, &mut out.q);
        out
    }

    fn coarse_solve(&self, g: &BlockVector) -> BlockVector {
        let k = self.config.coarse_level;
        let lvl = &self.levels[k];
        let mut mg = self.zeros(k);
        self.apply_m(k, g, &mut mg);
        let mut rhs = DVector::zeros(lvl.dim_v() + lvl.dim_q());
        rhs.as_mut_slice()[..lvl.dim_v()].copy_from_slice(&mg.v);
        rhs.as_mut_slice()[lvl.dim_v()..].copy_from_slice(&mg.q);
        let sol = self
            .lu_coarse_k
            .solve(&rhs)
            .expect("coarse saddle matrix nonsingular");
        BlockVector {
            v: sol.as_slice()[..lvl.dim_v()].to_vec(),
            q: sol.as_slice()[lvl.dim_v()..].to_vec(),
            level: k,
        }
    }

    /// One multigrid cycle for B x = g with the configured smoothing counts.
    pub fn cycle(&self, k: usize, g: &BlockVector, x0: BlockVector) -> BlockVector {
        self.cycle_with(k, g, x0, self.config.m1, self.config.m2)
    }

    pub fn cycle_with(
        &self,
        k: usize,
        g: &BlockVector,
        mut x: BlockVector,
        m1: usize,
        m2: usize,
    ) -> BlockVector {
        if k == self.config.coarse_level {
            return self.coarse_solve(g);
        }
        for _ in 0..m1 {
            self.smooth(k, &mut x, g, SmoothPhase::Pre);
        }

        // dual residual M g - K x (K^t for the adjoint problem)
        let lvl = &self.levels[k];
        let mut kx = self.zeros(k);
        if self.kind == SmootherKind::GeneralAdjoint {
            lvl.k_mat.apply_transpose(&x, &mut kx);
        } else {
            lvl.k_mat.apply(&x, &mut kx);
        }
        let mut rd = self.zeros(k);
        self.apply_m(k, g, &mut rd);
        for (r, t) in rd.v.iter_mut().zip(&kx.v) {
            *r -= t;
        }
        for (r, t) in rd.q.iter_mut().zip(&kx.q) {
            *r -= t;
        }
        let mut gc = self.restrict_dual(k, &rd);
        self.apply_m_inv_in_place(k - 1, &mut gc);

        let mut e = self.zeros(k - 1);
        for _ in 0..self.config.cycle.recursions() {
            e = self.cycle_with(k - 1, &gc, e, m1, m2);
        }
        let corr = self.prolong(k, &e);
        x.axpy(1.0, &corr);

        for _ in 0..m2 {
            self.smooth(k, &mut x, g, SmoothPhase::Post);
        }
        x
    }

    /// M^-1 weighted norm of a dual residual.
    fn dual_residual_norm(&self, k: usize, dual: &BlockVector) -> f64 {
        let lvl = &self.levels[k];
        let h2 = lvl.h * lvl.h;
        let mut acc = 0.0;
        for i in 0..lvl.dim_v() {
            acc += dual.v[i] * dual.v[i] / (h2 * lvl.mass.mv[i]);
        }
        for i in 0..lvl.dim_q() {
            acc += dual.q[i] * dual.q[i] / lvl.mass.mq[i];
        }
        acc.sqrt()
    }

    /// Iterate cycles from zero until the relative M^-1-weighted residual of
    /// the dual load drops below tol. Returns the solution and the residual
    /// history (one entry per cycle).
    pub fn solve(
        &self,
        k: usize,
        load: &BlockVector,
        tol: f64,
        max_cycles: usize,
    ) -> Result<(BlockVector, Vec<f64>)> {
        let load_norm = self.dual_residual_norm(k, load);
        if load_norm == 0.0 {
            return Ok((self.zeros(k), Vec::new()));
        }
        let mut g = load.clone();
        self.apply_m_inv_in_place(k, &mut g);

        let mut x = self.zeros(k);
        let mut history = Vec::new();
        for _ in 0..max_cycles {
            x = self.cycle(k, &g, x);
            let mut kx = self.zeros(k);
            if self.kind == SmootherKind::GeneralAdjoint {
                self.levels[k].k_mat.apply_transpose(&x, &mut kx);
            } else {
                self.levels[k].k_mat.apply(&x, &mut kx);
            }
            for (r, l) in kx.v.iter_mut().zip(&load.v) {
                *r = l - *r;
            }
            for (r, l) in kx.q.iter_mut().zip(&load.q) {
                *r = l - *r;
            }
            let res = self.dual_residual_norm(k, &kx) / load_norm;
            history.push(res);
            if res <= tol {
                return Ok((x, history));
            }
        }
        let last = *history.last().unwrap();
        Err(Error::NoConvergence {
            tol,
            cycles: history.len(),
            last,
            history,
        })
    }

    /// Combined norm ||v||_L2 + |q| used to measure error contraction.
    pub fn combined_norm(&self, k: usize, x: &BlockVector) -> f64 {
        let lvl = &self.levels[k];
        let mut mv = vec![0.0; lvl.dim_v()];
        lvl.mv_consistent.matvec(&x.v, &mut mv);
        let l2: f64 = mv.iter().zip(&x.v).map(|(a, b)| a * b).sum();
        let mut dq = vec![0.0; lvl.dim_q()];
        lvl.d_mat.matvec(&x.q, &mut dq);
        let ph: f64 = dq.iter().zip(&x.q).map(|(a, b)| a * b).sum();
        l2.max(0.0).sqrt() + ph.max(0.0).sqrt()
    }

    /// Spectral radius of the error propagation operator at level k with
    /// m1 = m2 = m smoothing steps: power iteration on e -> cycle(k, 0, e),
    /// with the contraction estimated as the geometric mean of the last 10
    /// norm ratios.
    pub fn contraction_number(&self, k: usize, m1: usize, m2: usize) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.power_iter.seed ^ (k as u64) << 8);
        let lvl = &self.levels[k];
        let mut x = BlockVector {
            v: (0..lvl.dim_v()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            q: (0..lvl.dim_q()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            level: k,
        };
        let n0 = self.combined_norm(k, &x);
        x.scale(1.0 / n0);
        let g = self.zeros(k);

        let mut ratios: Vec<f64> = Vec::new();
        let mut prev_est: Option<f64> = None;
        for _ in 0..self.config.power_iter.max_iters {
            let mut y = self.cycle_with(k, &g, x, m1, m2);
            let n = self.combined_norm(k, &y);
            if n == 0.0 {
                return Ok(0.0);
            }
            ratios.push(n);
            y.scale(1.0 / n);
            x = y;
            if ratios.len() >= 10 {
                let est = (ratios[ratios.len() - 10..]
                    .iter()
                    .map(|r| r.ln())
                    .sum::<f64>()
                    / 10.0)
                    .exp();
                if let Some(prev) = prev_est {
                    if (est - prev).abs() < 1e-4 {
                        return Ok(est);
                    }
                }
                prev_est = Some(est);
            }
        }
        let tail: Vec<String> = ratios
            .iter()
            .rev()
            .take(20)
            .rev()
            .map(|r| format!("{r:.6}"))
            .collect();
        Err(Error::SpectralEstimate(format!(
            "contraction estimate at level {k} (m1={m1}, m2={m2}) did not settle; last ratios [{}]",
            tail.join(", ")
        )))
    }

    /// Rayleigh-quotient power iteration for the spectral radius of the SPD
    /// smoothing operator (B S B, or the transposed variants) in [.,.]_k.
    fn estimate_smoother_radius(&self, k: usize) -> Result<f64> {
        let lvl = &self.levels[k];
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.power_iter.seed ^ (k as u64));
        let mut x = BlockVector {
            v: (0..lvl.dim_v()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            q: (0..lvl.dim_q()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            level: k,
        };
        let norm = self.mass_inner(k, &x, &x).sqrt();
        x.scale(1.0 / norm);

        let apply = |x: &BlockVector| -> BlockVector {
            match self.kind {
                SmootherKind::Symmetric => {
                    self.apply_system(k, &self.block_precond(k, &self.apply_system(k, x, false)), false)
                }
                SmootherKind::General => {
                    self.apply_system(k, &self.block_precond(k, &self.apply_system(k, x, false)), true)
                }
                SmootherKind::GeneralAdjoint => {
                    self.apply_system(k, &self.block_precond(k, &self.apply_system(k, x, true)), false)
                }
            }
        };

        let mut lambda_prev = 0.0;
        for iter in 0..self.config.power_iter.max_iters {
            let y = apply(&x);
            let lambda = self.mass_inner(k, &y, &x);
            let ynorm = self.mass_inner(k, &y, &y).sqrt();
            if ynorm == 0.0 {
                return Err(Error::SpectralEstimate(format!(
                    "power iteration collapsed at level {k}"
                )));
            }
            x = y;
            x.scale(1.0 / ynorm);
            if iter > 3 && (lambda - lambda_prev).abs() <= self.config.power_iter.tol * lambda {
                return Ok(lambda);
            }
            lambda_prev = lambda;
        }
        Err(Error::SpectralEstimate(format!(
            "spectral radius estimate at level {k} did not converge in {} iterations (last {lambda_prev:.6e})",
            self.config.power_iter.max_iters
        )))
    }

    /// Dense matrix of the inner pressure preconditioner as an operator on
    /// dual vectors (test oracle; level dimensions only).
    pub fn pressure_precond_dense(&self, k: usize) -> DMatrix<f64> {
        let n = self.levels[k].dim_q();
        let mut g = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.pressure_precond(k, &e);
            for i in 0..n {
                g[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_hierarchy, DomainTag};
    use crate::problem::ProblemSpec;

    fn darcy_state(domain: DomainTag, max_level: usize, config: MgConfig) -> MgState {
        let h = build_hierarchy(domain, max_level as i64).unwrap();
        let problem = ProblemSpec::darcy(domain);
        setup(&h, &problem, config).unwrap()
    }

    #[test]
    fn damping_by_construction() {
        let state = darcy_state(DomainTag::UnitSquare, 3, MgConfig::default());
        for k in 1..state.num_levels() {
            let lvl = &state.levels[k];
            assert!((lvl.delta * lvl.rho_est - 1.0).abs() < 1e-12, "theta = 1");
        }
        // rho ~ h^-2: the products rho * h^2 stay within a factor 4
        let products: Vec<f64> = (1..state.num_levels())
            .map(|k| state.levels[k].rho_est * state.levels[k].h * state.levels[k].h)
            .collect();
        let max = products.iter().cloned().fold(0.0f64, f64::max);
        let min = products.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min <= 4.0, "rho h^2 products {products:?}");
    }

    #[test]
    fn single_level_hierarchy_solves_directly() {
        let h = build_hierarchy(DomainTag::UnitSquare, 0).unwrap();
        let problem = ProblemSpec::darcy(DomainTag::UnitSquare);
        let state = setup(&h, &problem, MgConfig::default()).unwrap();
        let load = state.load_vector(0, &problem.f.clone());
        let (x, history) = state.solve(0, &load, 1e-12, 5).unwrap();
        assert_eq!(history.len(), 1);
        assert!(history[0] <= 1e-12);
        assert!(x.v.iter().any(|v| v.abs() > 0.0));
    }

    #[test]
    fn inner_preconditioner_symmetric_positive() {
        let state = darcy_state(DomainTag::UnitSquare, 2, MgConfig::default());
        let g = state.pressure_precond_dense(2);
        let asym = (&g - &g.transpose()).abs().max();
        assert!(asym <= 1e-10, "inner cycle symmetry {asym:e}");

        let zero = state.pressure_precond(2, &vec![0.0; state.levels[2].dim_q()]);
        assert!(zero.iter().all(|x| *x == 0.0));

        // dense spectral oracle: eigenvalues of G D in [0.3, 1.0]
        let d = state.levels[2].d_mat.to_dense();
        let eig = d.clone().symmetric_eigen();
        let mut d_half = DMatrix::zeros(d.nrows(), d.ncols());
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                let mut acc = 0.0;
                for l in 0..d.nrows() {
                    acc += eig.eigenvectors[(i, l)]
                        * eig.eigenvalues[l].sqrt()
                        * eig.eigenvectors[(j, l)];
                }
                d_half[(i, j)] = acc;
            }
        }
        let sym = &d_half * &g * &d_half;
        let vals = sym.symmetric_eigen().eigenvalues;
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = vals.iter().cloned().fold(0.0f64, f64::max);
        assert!(
            min >= 0.3 && max <= 1.0 + 1e-10,
            "inner preconditioner spectrum [{min}, {max}]"
        );
    }

    #[test]
    fn block_precond_linearity() {
        let state = darcy_state(DomainTag::UnitSquare, 2, MgConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lvl = &state.levels[2];
        let x = BlockVector {
            v: (0..lvl.dim_v()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            q: (0..lvl.dim_q()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            level: 2,
        };
        let y = BlockVector {
            v: (0..lvl.dim_v()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            q: (0..lvl.dim_q()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            level: 2,
        };
        let mut combo = x.clone();
        combo.scale(0.75);
        combo.axpy(-1.5, &y);
        let s_combo = state.block_precond(2, &combo);
        let mut expected = state.block_precond(2, &x);
        expected.scale(0.75);
        expected.axpy(-1.5, &state.block_precond(2, &y));
        for (a, b) in s_combo.v.iter().zip(&expected.v) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0));
        }
        for (a, b) in s_combo.q.iter().zip(&expected.q) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0));
        }

        let zero = state.block_precond(2, &state.zeros(2));
        assert!(zero.v.iter().chain(&zero.q).all(|x| *x == 0.0));
    }

    #[test]
    fn smoother_fixed_point_and_energy_decay() {
        let state = darcy_state(DomainTag::UnitSquare, 2, MgConfig::default());
        let problem = ProblemSpec::darcy(DomainTag::UnitSquare);
        let load = state.load_vector(2, &problem.f.clone());
        let lvl = &state.levels[2];

        // exact discrete solution via dense factorization
        let dense = lvl.k_mat.to_dense();
        let mut rhs = DVector::zeros(lvl.dim_v() + lvl.dim_q());
        rhs.as_mut_slice()[lvl.dim_v()..].copy_from_slice(&load.q);
        let sol = dense.lu().solve(&rhs).unwrap();
        let x_exact = BlockVector {
            v: sol.as_slice()[..lvl.dim_v()].to_vec(),
            q: sol.as_slice()[lvl.dim_v()..].to_vec(),
            level: 2,
        };
        let mut g = load.clone();
        state.apply_m_inv_in_place(2, &mut g);

        let mut x = x_exact.clone();
        state.smooth(2, &mut x, &g, SmoothPhase::Pre);
        state.smooth(2, &mut x, &g, SmoothPhase::Post);
        let mut diff = x.clone();
        diff.axpy(-1.0, &x_exact);
        let rel = state.combined_norm(2, &diff) / state.combined_norm(2, &x_exact);
        assert!(rel <= 1e-12, "smoother fixed point, drift {rel:e}");

        // post-smoothing error energy [B S B e, e] is non-increasing
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut e = BlockVector {
            v: (0..lvl.dim_v()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            q: (0..lvl.dim_q()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            level: 2,
        };
        let zero_g = state.zeros(2);
        let energy = |state: &MgState, e: &BlockVector| {
            let t = state.apply_system(
                2,
                &state.block_precond(2, &state.apply_system(2, e, false)),
                false,
            );
            state.mass_inner(2, &t, e)
        };
        let mut prev = energy(&state, &e);
        for _ in 0..10 {
            state.smooth(2, &mut e, &zero_g, SmoothPhase::Post);
            let cur = energy(&state, &e);
            assert!(cur <= prev * (1.0 + 1e-12), "energy grew {prev} -> {cur}");
            prev = cur;
        }
    }

    #[test]
    fn smoother_adjoint_relation() {
        // Symmetric kind: B(R x, w) = B(x, S w) with R the post- and S the
        // pre-smoothing error operator. Nonsymmetric kind: the partner of
        // the primal post-smoother is the adjoint problem's pre-smoother.
        for problem in [
            ProblemSpec::darcy(DomainTag::UnitSquare),
            ProblemSpec::convection_diffusion(DomainTag::UnitSquare),
        ] {
            let h = build_hierarchy(DomainTag::UnitSquare, 2).unwrap();
            let mut state = setup(&h, &problem, MgConfig::default()).unwrap();
            let zero_g = state.zeros(2);
            let primal_kind = state.kind;
            let partner_kind = match primal_kind {
                SmootherKind::Symmetric => SmootherKind::Symmetric,
                SmootherKind::General => SmootherKind::GeneralAdjoint,
                SmootherKind::GeneralAdjoint => SmootherKind::General,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(31);
            for _ in 0..10 {
                let dim_v = state.levels[2].dim_v();
                let dim_q = state.levels[2].dim_q();
                let x = BlockVector {
                    v: (0..dim_v).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    q: (0..dim_q).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    level: 2,
                };
                let w = BlockVector {
                    v: (0..dim_v).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    q: (0..dim_q).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    level: 2,
                };
                state.kind = primal_kind;
                let mut rx = x.clone();
                state.smooth(2, &mut rx, &zero_g, SmoothPhase::Post);
                state.kind = partner_kind;
                let mut sw = w.clone();
                state.smooth(2, &mut sw, &zero_g, SmoothPhase::Pre);
                state.kind = primal_kind;
                let lhs = state.levels[2].k_mat.pairing(&rx, &w);
                let rhs = state.levels[2].k_mat.pairing(&x, &sw);
                let scale = lhs.abs().max(rhs.abs()).max(1e-30);
                assert!(
                    (lhs - rhs).abs() / scale <= 1e-10,
                    "adjoint relation {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn transfer_duality() {
        let state = darcy_state(DomainTag::LShape, 3, MgConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for k in 1..=3usize {
            let fine = &state.levels[k];
            let coarse = &state.levels[k - 1];
            for _ in 0..10 {
                let x = BlockVector {
                    v: (0..fine.dim_v()).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    q: (0..fine.dim_q()).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    level: k,
                };
                let w = BlockVector {
                    v: (0..coarse.dim_v()).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    q: (0..coarse.dim_q()).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    level: k - 1,
                };
                let lhs = state.mass_inner(k - 1, &state.restrict_primal(k, &x), &w);
                let rhs = state.mass_inner(k, &x, &state.prolong(k, &w));
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0),
                    "duality {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn cycle_fixed_points() {
        let state = darcy_state(DomainTag::UnitSquare, 3, MgConfig::default());
        let problem = ProblemSpec::darcy(DomainTag::UnitSquare);

        // zero stays zero
        let g = state.zeros(3);
        let x = state.cycle(3, &g, state.zeros(3));
        assert!(state.combined_norm(3, &x) == 0.0);

        // the exact discrete solution is unchanged by one cycle
        let load = state.load_vector(3, &problem.f.clone());
        let lvl = &state.levels[3];
        let dense = lvl.k_mat.to_dense();
        let mut rhs = DVector::zeros(lvl.dim_v() + lvl.dim_q());
        rhs.as_mut_slice()[lvl.dim_v()..].copy_from_slice(&load.q);
        let sol = dense.lu().solve(&rhs).unwrap();
        let x_exact = BlockVector {
            v: sol.as_slice()[..lvl.dim_v()].to_vec(),
            q: sol.as_slice()[lvl.dim_v()..].to_vec(),
            level: 3,
        };
        let mut g = load.clone();
        state.apply_m_inv_in_place(3, &mut g);
        let x = state.cycle(3, &g, x_exact.clone());
        let mut diff = x;
        diff.axpy(-1.0, &x_exact);
        let rel = state.combined_norm(3, &diff) / state.combined_norm(3, &x_exact);
        assert!(rel <= 1e-11, "cycle fixed point, drift {rel:e}");
    }

    #[test]
    fn solve_matches_direct_factorization() {
        let mut config = MgConfig::default();
        config.m1 = 40;
        config.m2 = 40;
        for problem in [
            ProblemSpec::darcy(DomainTag::UnitSquare),
            ProblemSpec::convection_diffusion(DomainTag::UnitSquare),
        ] {
            let h = build_hierarchy(DomainTag::UnitSquare, 3).unwrap();
            let state = setup(&h, &problem, config).unwrap();
            let load = state.load_vector(3, &problem.f.clone());
            let (x, history) = state.solve(3, &load, 1e-12, 80).unwrap();
            assert!(history.last().unwrap() <= &1e-12);

            let lvl = &state.levels[3];
            let dense = lvl.k_mat.to_dense();
            let mut rhs = DVector::zeros(lvl.dim_v() + lvl.dim_q());
            rhs.as_mut_slice()[lvl.dim_v()..].copy_from_slice(&load.q);
            let sol = dense.lu().solve(&rhs).unwrap();
            let direct = BlockVector {
                v: sol.as_slice()[..lvl.dim_v()].to_vec(),
                q: sol.as_slice()[lvl.dim_v()..].to_vec(),
                level: 3,
            };
            let mut diff = x;
            diff.axpy(-1.0, &direct);
            let err = state.combined_norm(3, &diff);
            assert!(err <= 1e-8, "multigrid vs direct: {err:e}");
        }

        // zero load short-circuits
        let state = darcy_state(DomainTag::UnitSquare, 2, MgConfig::default());
        let (x, history) = state.solve(2, &state.zeros(2), 1e-10, 10).unwrap();
        assert!(history.is_empty());
        assert!(state.combined_norm(2, &x) == 0.0);
    }

    #[test]
    fn contraction_smoke() {
        let state = darcy_state(DomainTag::UnitSquare, 2, MgConfig::default());
        let rho = state.contraction_number(2, 10, 10).unwrap();
        assert!(rho > 0.0 && rho < 1.0, "contraction {rho}");
        let again = state.contraction_number(2, 10, 10).unwrap();
        assert_eq!(rho, again, "seeded estimate is deterministic");
    }
}
