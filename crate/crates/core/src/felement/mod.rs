//! Reference Lagrange elements, quadrature, and global function spaces.

pub mod basis;
pub mod quadrature;
pub mod space;

pub use basis::{BasisTable, ReferenceBasis};
pub use quadrature::QuadRule;
pub use space::{
    check_inverse_estimate, default_quadrature_degree, interpolate, make_space, FEFunction, FESpace,
};

use crate::mesh::Point;

/// Lattice points `i/n` (barycentric) on the reference simplex.
pub fn reference_lattice(dim: usize, n: usize) -> Vec<Point> {
    let n_f = n as f64;
    if dim == 1 {
        (0..=n).map(|i| [i as f64 / n_f, 0.0]).collect()
    } else {
        let mut pts = Vec::with_capacity((n + 1) * (n + 2) / 2);
        for i in 0..=n {
            for j in 0..=n - i {
                pts.push([i as f64 / n_f, j as f64 / n_f]);
            }
        }
        pts
    }
}
