//! Dual problem for L² error analysis: the adjoint solve, the duality
//! identity it satisfies, and the H² size of its solution.

use crate::assembly::{assemble_gram_l2, assemble_hessian, norms, second_variation, Target};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::felement::FEFunction;
use crate::field::ScalarField;
use crate::solver::{embed, linear_solve};

/// Solves `d²J(u_ref)(W, V) = -(V, rhs)_{L²}` for all `V` vanishing on the
/// boundary, with `W` vanishing on the boundary.
pub fn solve_adjoint(model: &dyn EnergyModel, u_ref: &FEFunction, rhs: &FEFunction, linear_tol: f64) -> Result<FEFunction> {
    let space = u_ref.space();
    if space.order() < 2 {
        return Err(Error::Precondition("adjoint space must have order >= 2".into()));
    }
    if !rhs.space().same_layout(space) {
        return Err(Error::SpaceMismatch("adjoint right-hand side must live on the reference space".into()));
    }
    let hessian = assemble_hessian(model, u_ref)?;
    let mut b: Vec<f64> = assemble_gram_l2(space).apply(rhs.coeffs()).into_iter().map(|v| -v).collect();
    space.mask(&mut b);
    FEFunction::from_coeffs(space, linear_solve(&hessian, &b, linear_tol)?)
}

/// `(‖W‖_{L²} + |W|_{H¹} + |W|_{H², broken}) / ‖rhs‖_{L²}`.
pub fn h2_regularity_ratio(w: &FEFunction, rhs: &FEFunction) -> Result<f64> {
    let denom = norms(Target::Zero, rhs, 2.0, false)?.l2;
    if denom == 0.0 {
        return Err(Error::Precondition("right-hand side vanishes".into()));
    }
    let n = norms(Target::Zero, w, 2.0, true)?;
    Ok((n.l2 + n.h1_semi + n.broken_h2.unwrap_or(0.0)) / denom)
}

#[derive(Debug, Clone)]
pub struct DualityCheck {
    /// `‖u - u_h‖²_{L²}` against the exact solution.
    pub error_l2_squared: f64,
    /// `d²J(u_ref)(W, e)` with `e = u_h - u_ref` on the reference space.
    pub pairing: f64,
    /// `|error_l2_squared + pairing| / error_l2_squared`.
    pub relative_residual: f64,
    pub h2_ratio: f64,
    pub adjoint: FEFunction,
}

/// Evaluates the duality identity `‖u - u_h‖² + d²J(u)(W, u_h - u) = 0`
/// with `u` replaced by a finer reference solution inside the second
/// variation and the adjoint problem.
pub fn duality_check(
    model: &dyn EnergyModel,
    u_h: &FEFunction,
    u_ref: &FEFunction,
    exact: &dyn ScalarField,
    linear_tol: f64,
) -> Result<DualityCheck> {
    let e = embed(u_h, u_ref.space())?.sub(u_ref)?;
    let w = solve_adjoint(model, u_ref, &e, linear_tol)?;
    let pairing = second_variation(model, u_ref, &w, &e)?;
    let err = norms(Target::Exact(exact), u_h, 2.0, false)?.l2;
    let error_l2_squared = err * err;
    if error_l2_squared == 0.0 {
        return Err(Error::Precondition("discrete solution coincides with the exact one".into()));
    }
    Ok(DualityCheck {
        error_l2_squared,
        pairing,
        relative_residual: (error_l2_squared + pairing).abs() / error_l2_squared,
        h2_ratio: h2_regularity_ratio(&w, &e)?,
        adjoint: w,
    })
}
