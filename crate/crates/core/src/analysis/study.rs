//! Convergence studies on manufactured problems over nested uniform
//! refinements, with optional per-level diagnostics and pass/fail checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use super::adjoint::duality_check;
use super::ellipticity::{lambda_max, lambda_min};
use super::galerkin::{galerkin_defect, DEFAULT_T_POINTS};
use super::pq::estimate_pq_constant;
use super::rates::{estimate_rate, RateEstimate};
use crate::assembly::{norms, Target};
use crate::energy::{classify, Classification, ManufacturedProblem};
use crate::error::{Error, Result};
use crate::felement::{check_inverse_estimate, make_space, FEFunction, FESpace};
use crate::mesh::Mesh;
use crate::solver::{embed, minimize, InitialGuess, NewtonOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Diagnostic {
    Galerkin,
    Adjoint,
    Pq,
    Ellipticity,
    InverseEstimate,
}

impl Diagnostic {
    pub const ALL: [Diagnostic; 5] =
        [Diagnostic::Galerkin, Diagnostic::Adjoint, Diagnostic::Pq, Diagnostic::Ellipticity, Diagnostic::InverseEstimate];

    pub fn name(&self) -> &'static str {
        match self {
            Diagnostic::Galerkin => "galerkin",
            Diagnostic::Adjoint => "adjoint",
            Diagnostic::Pq => "pq",
            Diagnostic::Ellipticity => "ellipticity",
            Diagnostic::InverseEstimate => "inverse_estimate",
        }
    }

    pub fn from_name(name: &str) -> Option<Diagnostic> {
        Diagnostic::ALL.into_iter().find(|d| d.name() == name)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct StudyOptions {
    /// Cells per side of the coarsest mesh.
    pub coarse_cells: usize,
    pub levels: usize,
    pub newton: NewtonOptions,
    /// Start each level from the previous level's solution.
    pub continuation: bool,
    pub diagnostics: BTreeSet<Diagnostic>,
    pub seed: u64,
    /// Gauss points for the path integral of the Galerkin defect.
    pub t_points: usize,
    pub pq_samples: usize,
    pub pq_norm_pair: (u32, f64),
    pub inverse_trials: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            coarse_cells: 8,
            levels: 4,
            newton: NewtonOptions::default(),
            continuation: true,
            diagnostics: BTreeSet::new(),
            seed: 0,
            t_points: DEFAULT_T_POINTS,
            pq_samples: 10,
            pq_norm_pair: (1, 2.0),
            inverse_trials: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    pub err_l2: f64,
    pub err_h1: f64,
    pub newton_iters: usize,
    pub final_residual: f64,
    pub lambda_min: f64,
    /// `‖u_h‖_{W^{1,inf}}`, monitored for stability.
    pub uh_w1inf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticValue {
    pub level: usize,
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub problem: String,
    pub dim: usize,
    pub order: usize,
    pub classification: Classification,
    pub newton_tol: f64,
    pub linear_tol: f64,
    pub levels: Vec<LevelResult>,
    pub diagnostics: Vec<DiagnosticValue>,
    pub rate_l2: RateEstimate,
    pub rate_h1: RateEstimate,
    pub checks: Vec<Check>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn diagnostic(&self, name: &str) -> Vec<f64> {
        self.diagnostics.iter().filter(|d| d.name == name).map(|d| d.value).collect()
    }
}

/// `(max - min) / min` of a non-empty list.
pub fn relative_variation(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / lo
}

/// Lazily built hierarchy of meshes and discrete solutions.
struct Hierarchy<'a> {
    problem: &'a ManufacturedProblem,
    opts: &'a StudyOptions,
    meshes: Vec<Arc<Mesh>>,
    solutions: BTreeMap<(usize, usize), (FEFunction, usize, f64)>,
}

impl<'a> Hierarchy<'a> {
    fn new(problem: &'a ManufacturedProblem, opts: &'a StudyOptions) -> Result<Self> {
        let coarse = Arc::new(Mesh::build_unit_mesh(problem.dim, opts.coarse_cells)?);
        Ok(Hierarchy { problem, opts, meshes: vec![coarse], solutions: BTreeMap::new() })
    }

    fn mesh(&mut self, level: usize) -> Arc<Mesh> {
        while self.meshes.len() <= level {
            let next = Arc::new(self.meshes.last().expect("coarse mesh").refine());
            self.meshes.push(next);
        }
        Arc::clone(&self.meshes[level])
    }

    fn space(&mut self, level: usize, order: usize) -> Result<Arc<FESpace>> {
        let problem = self.problem;
        make_space(self.mesh(level), order, |x| problem.boundary_value(x))
    }

    fn newton(&self, guess: Option<&FEFunction>) -> NewtonOptions {
        let mut opts = self.opts.newton.clone();
        if let Some(g) = guess {
            opts.initial_guess = InitialGuess::Prolonged(g.clone());
        }
        opts
    }

    /// Discrete minimizer on `level` with the given order, plus Newton
    /// iteration count and final residual.
    fn solve(&mut self, level: usize, order: usize) -> Result<(FEFunction, usize, f64)> {
        if let Some(hit) = self.solutions.get(&(level, order)) {
            return Ok(hit.clone());
        }
        let space = self.space(level, order)?;
        let guess = if self.opts.continuation && level > 0 {
            self.solutions.get(&(level - 1, order)).map(|s| s.0.clone())
        } else {
            None
        };
        let (u, log) = minimize(self.problem.model.as_ref(), &space, &self.newton(guess.as_ref()))?;
        let entry = (u, log.newton_steps(), log.final_residual());
        self.solutions.insert((level, order), entry.clone());
        Ok(entry)
    }
}

fn check_window(name: &'static str, rate: &RateEstimate, lo: f64, hi: f64, r2_min: f64) -> Check {
    let passed = rate.slope >= lo && rate.slope <= hi && rate.r_squared >= r2_min;
    Check {
        name,
        passed,
        detail: format!(
            "slope {:.4} (expected [{lo:.2}, {hi:.2}]), r^2 {:.6} (expected >= {r2_min})",
            rate.slope, rate.r_squared
        ),
    }
}

fn check_variation(name: &'static str, values: &[f64], limit: f64) -> Check {
    if values.len() < 2 {
        return Check { name, passed: true, detail: "fewer than two levels".into() };
    }
    let v = relative_variation(values);
    Check { name, passed: v < limit, detail: format!("relative variation {v:.4} (limit {limit})") }
}

/// Runs the study and evaluates all checks. Solver failures abort the
/// study; a non-positive smallest eigenvalue of the Hessian at a computed
/// solution aborts with [`Error::NotCoercive`].
pub fn convergence_study(problem: &ManufacturedProblem, order: usize, opts: &StudyOptions) -> Result<ConvergenceReport> {
    if opts.levels < 3 {
        return Err(Error::Precondition(format!("a study needs at least 3 levels, got {}", opts.levels)));
    }
    if opts.coarse_cells == 0 {
        return Err(Error::Precondition("coarse_cells must be positive".into()));
    }
    opts.newton.validate()?;
    let model = problem.model.as_ref();
    let classification = classify(model);
    let mut hier = Hierarchy::new(problem, opts)?;
    let mut levels = Vec::with_capacity(opts.levels);
    let mut diags = Vec::new();
    let tol_sum = opts.newton.residual_tol + opts.newton.linear_tol;

    for level in 0..opts.levels {
        let (u, iters, residual) = hier.solve(level, order)?;
        let space = Arc::clone(u.space());
        let err = norms(Target::Exact(problem.exact.as_ref()), &u, 2.0, false)?;
        let uh = norms(Target::Zero, &u, f64::INFINITY, false)?;
        let lmin = lambda_min(model, &u)?;
        log::info!(
            "{} d={} m={order} level {level}: dofs {}, L2 error {:e}, H1 error {:e}, newton {iters}, lambda_min {lmin:e}",
            problem.name,
            problem.dim,
            space.ndofs(),
            err.l2,
            err.h1()
        );
        if !(lmin > 0.0) {
            return Err(Error::NotCoercive { level, lambda_min: lmin });
        }
        levels.push(LevelResult {
            level,
            h: space.mesh().width(),
            dofs: space.ndofs(),
            err_l2: err.l2,
            err_h1: err.h1(),
            newton_iters: iters,
            final_residual: residual,
            lambda_min: lmin,
            uh_w1inf: uh.w1inf,
        });

        for diag in &opts.diagnostics {
            let mut push = |name, value| diags.push(DiagnosticValue { level, name, value });
            match diag {
                Diagnostic::Galerkin => {
                    let coarse = space.with_refined_quadrature(1);
                    let guess = u.on_space(&coarse)?;
                    let (uc, _) = minimize(model, &coarse, &hier.newton(Some(&guess)))?;
                    let (uf, _, _) = hier.solve(level + 1, order)?;
                    push("galerkin", galerkin_defect(model, &uf, &uc, opts.t_points)?);
                }
                Diagnostic::Adjoint => {
                    let (u_ref, _, _) = hier.solve(level + 2, order.max(2))?;
                    let dc = duality_check(model, &u, &u_ref, problem.exact.as_ref(), opts.newton.linear_tol)?;
                    push("adjoint_identity", dc.relative_residual);
                    push("h2_ratio", dc.h2_ratio);
                }
                Diagnostic::Pq => {
                    let upq = if order >= 2 {
                        u.clone()
                    } else {
                        let p2 = make_space(Arc::clone(space.mesh()), 2, |x| problem.boundary_value(x))?;
                        embed(&u, &p2)?
                    };
                    let est = estimate_pq_constant(model, &upq, opts.pq_norm_pair, opts.pq_samples, opts.seed)?;
                    push("pq", est.max_ratio);
                    push("pq_rough", est.rough_max);
                }
                Diagnostic::Ellipticity => {
                    push("lambda_min", lmin);
                    push("lambda_max", lambda_max(model, &u)?);
                }
                Diagnostic::InverseEstimate => {
                    push("inverse_ratio", check_inverse_estimate(&space, opts.inverse_trials, opts.seed)?);
                }
            }
        }
    }

    let rate_l2 = estimate_rate(&levels.iter().map(|l| (l.h, l.err_l2)).collect::<Vec<_>>())?;
    let rate_h1 = estimate_rate(&levels.iter().map(|l| (l.h, l.err_h1)).collect::<Vec<_>>())?;
    let m = order as f64;
    let mut checks = vec![
        check_window("h1_rate", &rate_h1, m - 0.15, m + 0.25, 0.995),
        check_window("l2_rate", &rate_l2, m + 0.75, m + 1.3, 0.99),
    ];
    let values = |name: &str| diags.iter().filter(|d| d.name == name).map(|d| d.value).collect::<Vec<f64>>();

    for diag in &opts.diagnostics {
        match diag {
            Diagnostic::Galerkin => {
                let v = values("galerkin");
                let limit = 100.0 * tol_sum;
                let worst = v.iter().copied().fold(0.0, f64::max);
                checks.push(Check {
                    name: "galerkin",
                    passed: worst <= limit,
                    detail: format!("max defect {worst:e} (limit {limit:e})"),
                });
            }
            Diagnostic::Adjoint => {
                let v = values("adjoint_identity");
                let worst = v.iter().copied().fold(0.0, f64::max);
                checks.push(Check {
                    name: "adjoint_identity",
                    passed: worst < 0.05,
                    detail: format!("max relative residual {worst:e} (limit 0.05)"),
                });
                checks.push(check_variation("h2_ratio", &values("h2_ratio"), 0.15));
            }
            Diagnostic::Pq => {
                let v = values("pq");
                checks.push(match classification {
                    Classification::Linear => {
                        let worst = v.iter().copied().fold(0.0, f64::max);
                        Check { name: "pq", passed: worst < 1e-13, detail: format!("max ratio {worst:e} (limit 1e-13)") }
                    }
                    Classification::Semilinear => {
                        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = v.iter().copied().fold(0.0, f64::max);
                        let growth = hi / lo;
                        Check { name: "pq", passed: lo > 0.0 && growth < 2.0, detail: format!("max/min {growth:.4} (limit 2)") }
                    }
                    Classification::Quasilinear => {
                        let hi = v.iter().copied().fold(0.0, f64::max);
                        Check { name: "pq", passed: true, detail: format!("reported only, max ratio {hi:e}") }
                    }
                });
            }
            Diagnostic::Ellipticity => {
                let lo = levels.iter().map(|l| l.lambda_min).fold(f64::INFINITY, f64::min);
                checks.push(Check {
                    name: "lambda_min",
                    passed: lo > 0.0,
                    detail: format!("smallest lambda_min {lo:e}"),
                });
                checks.push(check_variation("lambda_max", &values("lambda_max"), 0.10));
            }
            Diagnostic::InverseEstimate => {
                checks.push(check_variation("inverse_estimate", &values("inverse_ratio"), 0.10));
            }
        }
    }

    Ok(ConvergenceReport {
        problem: problem.name.clone(),
        dim: problem.dim,
        order,
        classification,
        newton_tol: opts.newton.residual_tol,
        linear_tol: opts.newton.linear_tol,
        levels,
        diagnostics: diags,
        rate_l2,
        rate_h1,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::Problem;

    #[test]
    fn diagnostic_names_round_trip() {
        for d in Diagnostic::ALL {
            assert_eq!(Diagnostic::from_name(d.name()), Some(d));
        }
        assert_eq!(Diagnostic::from_name("nope"), None);
    }

    #[test]
    fn variation() {
        assert!((relative_variation(&[1.0, 1.1, 1.05]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn linear_p1_study_rates() {
        let p = Problem::Linear.manufactured(1).unwrap();
        let opts = StudyOptions { levels: 4, ..Default::default() };
        let r = convergence_study(&p, 1, &opts).unwrap();
        assert_eq!(r.levels.len(), 4);
        assert!(r.rate_h1.slope > 0.9 && r.rate_h1.slope < 1.1, "{:?}", r.rate_h1);
        assert!(r.rate_l2.slope > 1.9 && r.rate_l2.slope < 2.1, "{:?}", r.rate_l2);
        assert!(r.passed(), "{:?}", r.checks);
    }

    #[test]
    fn quartic_p1_with_diagnostics() {
        let p = Problem::Quartic.manufactured(1).unwrap();
        let opts = StudyOptions {
            levels: 3,
            diagnostics: Diagnostic::ALL.into_iter().collect(),
            ..Default::default()
        };
        let r = convergence_study(&p, 1, &opts).unwrap();
        for c in &r.checks {
            assert!(c.passed, "{c:?}");
        }
        for name in ["galerkin", "adjoint_identity", "h2_ratio", "pq", "lambda_min", "lambda_max", "inverse_ratio"] {
            assert_eq!(r.diagnostic(name).len(), 3, "{name}");
        }
    }

    #[test]
    fn too_few_levels_rejected() {
        let p = Problem::Linear.manufactured(1).unwrap();
        let opts = StudyOptions { levels: 2, ..Default::default() };
        assert!(matches!(convergence_study(&p, 1, &opts), Err(Error::Precondition(_))));
    }
}
