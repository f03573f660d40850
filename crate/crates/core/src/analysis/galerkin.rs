//! Defect of the nonlinear Galerkin orthogonality between nested levels.

use crate::assembly::apply_second_variation;
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::felement::quadrature::gauss_legendre;
use crate::felement::FEFunction;
use crate::solver::prolongation_matrix;

/// Default number of Gauss points for the path integral.
pub const DEFAULT_T_POINTS: usize = 10;

/// Largest magnitude over interior coarse basis functions `V` of
/// `int_0^1 d²J(G(t))(V, P u_h - u_fine) dt`, where
/// `G(t) = (1 - t) u_fine + t P u_h` and `P` embeds the coarse space into
/// the fine one. The path integral uses a `t_points`-point Gauss rule and
/// the fine space's element quadrature.
pub fn galerkin_defect(model: &dyn EnergyModel, u_fine: &FEFunction, u_h: &FEFunction, t_points: usize) -> Result<f64> {
    if t_points == 0 {
        return Err(Error::Precondition("the path integral needs at least one Gauss point".into()));
    }
    let coarse = u_h.space();
    let fine = u_fine.space();
    match fine.mesh().generations_below(coarse.mesh()) {
        Some(g) if g >= 1 => {}
        _ => return Err(Error::SpaceMismatch("galerkin defect needs a strictly finer nested level".into())),
    }
    let p = prolongation_matrix(coarse, fine)?;
    let pu = FEFunction::from_coeffs(fine, p.apply(u_h.coeffs()))?;
    let diff = pu.sub(u_fine)?;

    let (ts, ws) = gauss_legendre(t_points);
    let mut r = vec![0.0; fine.ndofs()];
    for (&t, &w) in ts.iter().zip(&ws) {
        let gamma = u_fine.scaled(1.0 - t).add_scaled(t, &pu)?;
        let part = apply_second_variation(model, &gamma, &diff)?;
        for (ri, pi) in r.iter_mut().zip(part) {
            *ri += w * pi;
        }
    }
    let coarse_defect = p.apply_transpose(&r);
    Ok((0..coarse.ndofs())
        .filter(|&i| !coarse.is_boundary(i))
        .map(|i| coarse_defect[i].abs())
        .fold(0.0, f64::max))
}
