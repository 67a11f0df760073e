//! Mixed finite element discretization of Darcy-type second-order elliptic
//! problems with order-1 Raviart-Thomas-Nedelec elements on 2D triangular
//! meshes, and block-preconditioned W-/V-cycle multigrid for the resulting
//! saddle-point systems.
//!
//! The crate covers the full pipeline: nested mesh hierarchies on the unit
//! square and the L-shaped domain, basis construction and assembly of the
//! saddle-point blocks, mesh-dependent norms and error evaluation against
//! manufactured solutions, the multigrid solver with its block-diagonal
//! preconditioner, and a batch harness that regenerates convergence-rate and
//! contraction-number tables.

pub mod assembly;
pub mod error;
pub mod mesh;
pub mod multigrid;
pub mod norms;
pub mod problem;
pub mod quadrature;
pub mod sparse;
pub mod spaces;

pub use error::{Error, Result};
