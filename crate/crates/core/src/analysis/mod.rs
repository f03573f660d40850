//! Error analysis: ellipticity, Galerkin orthogonality defects, the dual
//! problem, third-variation bounds, rate fits and full convergence studies.

pub mod adjoint;
pub mod ellipticity;
pub mod galerkin;
pub mod pq;
pub mod rates;
pub mod study;

pub use adjoint::{duality_check, h2_regularity_ratio, solve_adjoint, DualityCheck};
pub use ellipticity::{estimate_ellipticity, lambda_max, lambda_min, EllipticityEstimate};
pub use galerkin::{galerkin_defect, DEFAULT_T_POINTS};
pub use pq::{estimate_pq_constant, PQEstimate};
pub use rates::{estimate_rate, least_squares_slope, RateEstimate};
pub use study::{
    convergence_study, relative_variation, Check, ConvergenceReport, Diagnostic, DiagnosticValue, LevelResult,
    StudyOptions,
};
