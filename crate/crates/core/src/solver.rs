//! Linear solves, damped Newton minimization of the discrete energy, and
//! transfer of discrete functions between nested spaces.

use std::sync::Arc;

use crate::assembly::{assemble_hessian, assemble_residual, energy};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::felement::{interpolate, FEFunction, FESpace};
use crate::field::ScalarField;
use crate::sparse::{dot, norm2, norm_inf, SparseOperator};

/// Solves `A x = b` by conjugate gradients with Jacobi preconditioning,
/// stopping once the relative residual `|r| / |b|` drops below `tol`.
pub fn linear_solve(a: &SparseOperator, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::SpaceMismatch(format!("right-hand side of length {} for a {n}x{n} operator", b.len())));
    }
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iters = 10 * n + 100;
    for _ in 0..max_iters {
        a.apply_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Err(Error::NotPositiveDefinite { curvature });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolve { iterations: max_iters, residual: norm2(&r) / bnorm })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Damping {
    None,
    /// Backtracking until `J(u + s d) <= J(u) + c1 s dJ(u)(d)`.
    Armijo { c1: f64, backtrack: f64 },
}

#[derive(Clone)]
pub enum InitialGuess {
    /// Zero interior coefficients with the boundary values imposed.
    ZeroInterior,
    /// Nodal interpolant of a given field.
    Interpolant(Arc<dyn ScalarField>),
    /// A solution from a coarser nested space, embedded into the target.
    Prolonged(FEFunction),
}

impl std::fmt::Debug for InitialGuess {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialGuess::ZeroInterior => f.write_str("ZeroInterior"),
            InitialGuess::Interpolant(_) => f.write_str("Interpolant"),
            InitialGuess::Prolonged(g) => write!(f, "Prolonged(level {})", g.space().mesh().level()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub max_iters: usize,
    /// Stopping threshold on the sup-norm of the masked residual.
    pub residual_tol: f64,
    /// Relative residual target of the inner CG solves.
    pub linear_tol: f64,
    pub damping: Damping,
    pub initial_guess: InitialGuess,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iters: 50,
            residual_tol: 1e-12,
            linear_tol: 1e-14,
            damping: Damping::Armijo { c1: 1e-4, backtrack: 0.5 },
            initial_guess: InitialGuess::ZeroInterior,
        }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) || !(self.linear_tol > 0.0) {
            return Err(Error::Precondition("tolerances must be positive".into()));
        }
        if let Damping::Armijo { c1, backtrack } = self.damping {
            if !(c1 > 0.0 && c1 < 1.0) || !(backtrack > 0.0 && backtrack < 1.0) {
                return Err(Error::Precondition(format!(
                    "Armijo parameters must lie in (0, 1): c1 = {c1}, backtrack = {backtrack}"
                )));
            }
        }
        Ok(())
    }
}

/// One entry per iterate: residual sup-norm, energy, and the step length
/// that produced it (zero for the initial guess).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveLog {
    pub iterations: Vec<(f64, f64, f64)>,
    pub converged: bool,
}

impl SolveLog {
    /// Number of Newton updates performed.
    pub fn newton_steps(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }

    pub fn final_residual(&self) -> f64 {
        self.iterations.last().map_or(f64::INFINITY, |it| it.0)
    }
}

fn initial_iterate(space: &Arc<FESpace>, guess: &InitialGuess) -> Result<FEFunction> {
    let mut u = match guess {
        InitialGuess::ZeroInterior => FEFunction::zeros(space),
        InitialGuess::Interpolant(g) => interpolate(space, |x| g.value(x))?,
        InitialGuess::Prolonged(coarse) => embed(coarse, space)?,
    };
    u.impose_boundary_values();
    Ok(u)
}

const MIN_STEP: f64 = 1e-12;

/// Minimizes the discrete energy over the affine space of functions with
/// the space's boundary values by Newton's method on the first-order
/// condition.
pub fn minimize(model: &dyn EnergyModel, space: &Arc<FESpace>, opts: &NewtonOptions) -> Result<(FEFunction, SolveLog)> {
    opts.validate()?;
    let mut u = initial_iterate(space, &opts.initial_guess)?;
    let mut log = SolveLog::default();
    let mut r = assemble_residual(model, &u)?;
    let mut rn = norm_inf(&r);
    let mut j = energy(model, &u)?;
    log.iterations.push((rn, j, 0.0));
    log::debug!("newton start: residual {rn:e}, energy {j:e}");

    loop {
        if rn <= opts.residual_tol {
            log.converged = true;
            return Ok((u, log));
        }
        if log.newton_steps() >= opts.max_iters {
            return Err(Error::NewtonDivergence { iterations: log.newton_steps(), residual: rn });
        }
        let hessian = assemble_hessian(model, &u)?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let d = FEFunction::from_coeffs(space, linear_solve(&hessian, &rhs, opts.linear_tol)?)?;

        let (step, next, next_r, next_j) = match opts.damping {
            Damping::None => {
                let next = u.add_scaled(1.0, &d)?;
                let next_r = assemble_residual(model, &next)?;
                let next_j = energy(model, &next)?;
                (1.0, next, next_r, next_j)
            }
            Damping::Armijo { c1, backtrack } => {
                let slope = dot(&r, d.coeffs());
                let mut s = 1.0;
                loop {
                    if s < MIN_STEP {
                        return Err(Error::LineSearch { residual: rn });
                    }
                    let trial = u.add_scaled(s, &d)?;
                    if let Ok(tj) = energy(model, &trial) {
                        let sufficient = tj <= j + c1 * s * slope;
                        let stalled = (tj - j).abs() <= 1e-14 * (1.0 + j.abs());
                        if sufficient || stalled {
                            if let Ok(tr) = assemble_residual(model, &trial) {
                                if sufficient || norm_inf(&tr) < rn {
                                    break (s, trial, tr, tj);
                                }
                            }
                        }
                    }
                    s *= backtrack;
                }
            }
        };
        u = next;
        r = next_r;
        rn = norm_inf(&r);
        j = next_j;
        log.iterations.push((rn, j, step));
        log::debug!("newton step {}: length {step}, residual {rn:e}, energy {j:e}", log.newton_steps());
    }
}

/// Sparse prolongation operator from a coarse space into a nested fine
/// space: row `i` holds the coarse basis functions evaluated at fine dof `i`.
#[derive(Debug, Clone)]
pub struct Prolongation {
    rows: Vec<Vec<(usize, f64)>>,
    ncoarse: usize,
}

impl Prolongation {
    pub fn fine_dim(&self) -> usize {
        self.rows.len()
    }

    pub fn coarse_dim(&self) -> usize {
        self.ncoarse
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn apply(&self, coarse: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(j, v)| v * coarse[j]).sum()).collect()
    }

    pub fn apply_transpose(&self, fine: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncoarse];
        for (row, &f) in self.rows.iter().zip(fine) {
            for &(j, v) in row {
                out[j] += v * f;
            }
        }
        out
    }
}

/// Builds the prolongation from `coarse` into `fine`. The fine mesh must
/// descend from the coarse mesh by uniform refinement and the fine order
/// must be at least the coarse order.
pub fn prolongation_matrix(coarse: &Arc<FESpace>, fine: &Arc<FESpace>) -> Result<Prolongation> {
    let generations = fine
        .mesh()
        .generations_below(coarse.mesh())
        .ok_or_else(|| Error::SpaceMismatch("fine mesh does not descend from the coarse mesh".into()))?;
    if fine.order() < coarse.order() {
        return Err(Error::SpaceMismatch(format!(
            "cannot embed order {} into order {}",
            coarse.order(),
            fine.order()
        )));
    }
    let mut rows: Vec<Option<Vec<(usize, f64)>>> = vec![None; fine.ndofs()];
    for e in 0..fine.mesh().num_elements() {
        let (_, ce) = fine
            .mesh()
            .ancestor(e, generations)
            .ok_or_else(|| Error::SpaceMismatch("missing parent element".into()))?;
        let map = coarse.element_map(ce);
        let cdofs = coarse.element_dofs(ce);
        for &d in fine.element_dofs(e) {
            if rows[d].is_some() {
                continue;
            }
            let xi = map.to_reference(fine.dof_coords()[d]);
            let (vals, _, _) = coarse.basis().eval(xi);
            let row = cdofs
                .iter()
                .zip(vals)
                .filter(|(_, v)| v.abs() > 1e-14)
                .map(|(&j, v)| (j, v))
                .collect();
            rows[d] = Some(row);
        }
    }
    Ok(Prolongation { rows: rows.into_iter().map(Option::unwrap_or_default).collect(), ncoarse: coarse.ndofs() })
}

/// Exact representation of `f` on a space over `refine(mesh)` of the same order.
pub fn prolong(f: &FEFunction, fine: &Arc<FESpace>) -> Result<FEFunction> {
    let coarse = f.space();
    if fine.order() != coarse.order() || fine.mesh().generations_below(coarse.mesh()) != Some(1) {
        return Err(Error::SpaceMismatch("prolong expects the next level with the same order".into()));
    }
    embed(f, fine)
}

/// Exact representation of `f` on any nested space of equal or higher order.
pub fn embed(f: &FEFunction, fine: &Arc<FESpace>) -> Result<FEFunction> {
    let p = prolongation_matrix(f.space(), fine)?;
    FEFunction::from_coeffs(fine, p.apply(f.coeffs()))
}
