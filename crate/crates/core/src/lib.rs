//! Lagrange finite elements for convex variational problems on the unit
//! interval and unit square, together with the tooling needed to measure
//! and explain their a priori convergence rates.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`] builds simplicial meshes and their uniform refinements;
//! * [`felement`] provides reference bases, quadrature and global spaces;
//! * [`energy`] defines Lagrangians `L(Du, u, x)` and manufactured problems;
//! * [`assembly`] turns an energy into residuals, Hessians and norms;
//! * [`solver`] minimizes the discrete energy and transfers between levels;
//! * [`analysis`] runs convergence studies and structural diagnostics.

pub mod analysis;
pub mod assembly;
pub mod energy;
pub mod error;
pub mod felement;
pub mod field;
pub mod mesh;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use felement::{FEFunction, FESpace};
pub use mesh::Mesh;
