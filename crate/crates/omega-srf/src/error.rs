use thiserror::Error;

/// Errors raised by grid construction, pointwise linear algebra and the
/// geometric operators.
#[derive(Debug, Error)]
pub enum SrfError {
    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("matrix not positive definite at point {point} (min eigenvalue {min_eig:e})")]
    NotPositive { point: usize, min_eig: f64 },

    #[error("matrix not symmetric at point {point} (defect {defect:e})")]
    Asymmetric { point: usize, defect: f64 },

    #[error("singular matrix at point {point}")]
    Singular { point: usize },

    #[error("polarization eigengap {gap:e} at point {point} is below threshold {threshold:e}")]
    Eigengap { point: usize, gap: f64, threshold: f64 },

    #[error("flow lost positivity at t = {t} (min eigenvalue {min_eig:e})")]
    PositivityLoss { t: f64, min_eig: f64 },

    #[error("step ratio dt*max|H|^2/h^2 = {ratio:.3} exceeds guard {limit}; try dt <= {advisory_dt:e}")]
    Cfl { ratio: f64, limit: f64, advisory_dt: f64 },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SrfError>;
