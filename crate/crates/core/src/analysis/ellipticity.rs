//! Extreme generalized eigenvalues of the second variation against the
//! H¹ Gram matrix, restricted to functions vanishing on the boundary.

use crate::assembly::{assemble_gram_h1, assemble_hessian};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::felement::FEFunction;
use crate::solver::linear_solve;
use crate::sparse::{dot, SparseOperator};

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticityEstimate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Description of the linearization point.
    pub state: String,
}

const RESIDUAL_TOL: f64 = 1e-8;
const MAX_ITERS: usize = 5_000;
const PRECONDITIONER_TOL: f64 = 1e-6;

#[derive(Clone, Copy, PartialEq)]
enum End {
    Lowest,
    Highest,
}

struct Pencil {
    a: SparseOperator,
    g: SparseOperator,
    interior: Vec<usize>,
    ndofs: usize,
}

fn pencil(model: &dyn EnergyModel, v: &FEFunction) -> Result<Pencil> {
    let space = v.space();
    if space.num_interior_dofs() == 0 {
        return Err(Error::Precondition("space has no interior degrees of freedom".into()));
    }
    let a = assemble_hessian(model, v)?;
    let mut g = assemble_gram_h1(space);
    g.mask_symmetric(space.boundary_mask());
    let interior = (0..space.ndofs()).filter(|&i| !space.is_boundary(i)).collect();
    Ok(Pencil { a, g, interior, ndofs: space.ndofs() })
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues and the eigenvectors as columns.
fn symmetric_eigen(mut m: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        let diag: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in m.iter_mut() {
                    let (mkp, mkq) = (row[p], row[q]);
                    row[p] = c * mkp - s * mkq;
                    row[q] = s * mkp + c * mkq;
                }
                let (row_p, row_q) = (m[p].clone(), m[q].clone());
                for (k, (mpk, mqk)) in row_p.into_iter().zip(row_q).enumerate() {
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i][i]).collect(), v)
}

impl Pencil {
    fn start(&self, end: End) -> Vec<f64> {
        let mut x = vec![0.0; self.ndofs];
        for (k, &i) in self.interior.iter().enumerate() {
            x[i] = match end {
                End::Lowest => 1.0,
                End::Highest if k % 2 == 0 => 1.0,
                End::Highest => -1.0,
            };
        }
        x
    }

    /// Single-vector LOBPCG on `A x = lambda G x`, preconditioned with an
    /// inexact `G^{-1}`. Stops once the residual in the `G^{-1}` norm falls
    /// below `RESIDUAL_TOL * |lambda|`.
    fn extreme(&self, end: End) -> Result<f64> {
        let mut x = self.start(end);
        let mut p: Option<Vec<f64>> = None;
        let gx = self.g.apply(&x);
        let scale = dot(&x, &gx).sqrt();
        x.iter_mut().for_each(|v| *v /= scale);
        for _ in 0..MAX_ITERS {
            let ax = self.a.apply(&x);
            let gx = self.g.apply(&x);
            let lambda = dot(&x, &ax);
            let r: Vec<f64> = ax.iter().zip(&gx).map(|(a, g)| a - lambda * g).collect();
            let w = linear_solve(&self.g, &r, PRECONDITIONER_TOL)?;
            let res = dot(&r, &w).max(0.0).sqrt();
            if res <= RESIDUAL_TOL * lambda.abs().max(f64::MIN_POSITIVE) {
                return Ok(lambda);
            }

            // G-orthonormal basis of span{x, w, p}, x first.
            let mut basis = vec![x.clone()];
            let mut gbasis = vec![gx];
            for mut cand in std::iter::once(w).chain(p.take()) {
                let before = dot(&cand, &self.g.apply(&cand)).sqrt();
                for _ in 0..2 {
                    for (b, gb) in basis.iter().zip(&gbasis) {
                        let c = dot(&cand, gb);
                        cand.iter_mut().zip(b).for_each(|(v, b)| *v -= c * b);
                    }
                }
                let gc = self.g.apply(&cand);
                let norm = dot(&cand, &gc).max(0.0).sqrt();
                if norm > 1e-10 * before {
                    cand.iter_mut().for_each(|v| *v /= norm);
                    basis.push(cand);
                    gbasis.push(gc.into_iter().map(|v| v / norm).collect());
                }
            }

            let abasis: Vec<Vec<f64>> = basis.iter().map(|b| self.a.apply(b)).collect();
            let k = basis.len();
            let small: Vec<Vec<f64>> = (0..k)
                .map(|i| (0..k).map(|j| 0.5 * (dot(&basis[i], &abasis[j]) + dot(&basis[j], &abasis[i]))).collect())
                .collect();
            let (values, vectors) = symmetric_eigen(small);
            let pick = (0..k)
                .min_by(|&i, &j| match end {
                    End::Lowest => values[i].total_cmp(&values[j]),
                    End::Highest => values[j].total_cmp(&values[i]),
                })
                .expect("non-empty basis");
            let y: Vec<f64> = vectors.iter().map(|row| row[pick]).collect();
            let mut next_p = vec![0.0; self.ndofs];
            for (j, b) in basis.iter().enumerate().skip(1) {
                next_p.iter_mut().zip(b).for_each(|(v, b)| *v += y[j] * b);
            }
            x = next_p.iter().zip(&basis[0]).map(|(p, b)| p + y[0] * b).collect();
            let gx = self.g.apply(&x);
            let scale = dot(&x, &gx).sqrt();
            x.iter_mut().for_each(|v| *v /= scale);
            p = (k > 1).then_some(next_p);
        }
        Err(Error::EigenIteration { iterations: MAX_ITERS })
    }

    fn lambda_max(&self) -> Result<f64> {
        self.extreme(End::Highest)
    }

    fn lambda_min(&self) -> Result<f64> {
        self.extreme(End::Lowest)
    }
}

/// Smallest `lambda` with `d²J(v) x = lambda G x` for interior vectors `x`,
/// where `G` is the full H¹ Gram matrix.
pub fn lambda_min(model: &dyn EnergyModel, v: &FEFunction) -> Result<f64> {
    pencil(model, v)?.lambda_min()
}

/// Largest generalized eigenvalue of the same pencil as [`lambda_min`].
pub fn lambda_max(model: &dyn EnergyModel, v: &FEFunction) -> Result<f64> {
    pencil(model, v)?.lambda_max()
}

pub fn estimate_ellipticity(model: &dyn EnergyModel, v: &FEFunction) -> Result<EllipticityEstimate> {
    let p = pencil(model, v)?;
    let space = v.space();
    Ok(EllipticityEstimate {
        lambda_min: p.lambda_min()?,
        lambda_max: p.lambda_max()?,
        state: format!("discrete state on level {} with {} dofs", space.mesh().level(), space.ndofs()),
    })
}
