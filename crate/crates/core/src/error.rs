use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported spatial dimension {0} (expected 1 or 2)")]
    InvalidDimension(usize),

    #[error("unsupported polynomial order {0} (expected 1, 2 or 3)")]
    InvalidOrder(usize),

    #[error("degenerate element {element}: determinant {det:e}")]
    DegenerateElement { element: usize, det: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("non-finite value {what} at {location:?}")]
    NonFinite { what: &'static str, location: [f64; 2] },

    #[error("function spaces do not match: {0}")]
    SpaceMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("operator is not positive definite on the constrained subspace (curvature {curvature:e})")]
    NotPositiveDefinite { curvature: f64 },

    #[error("line search failed: step length underflow at residual {residual:e}")]
    LineSearch { residual: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    EigenIteration { iterations: usize },

    #[error("second variation not coercive at level {level}: lambda_min = {lambda_min:e}")]
    NotCoercive { level: usize, lambda_min: f64 },

    #[error("mesh dump parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
