use thiserror::Error;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("time {t} lies outside the domain [{t0}, {t1}]")]
    OutsideDomain { t: f64, t0: f64, t1: f64 },

    #[error(
        "decay rate {lambda} < 0: error bounds for this problem class are only proven for nonnegative decay rates"
    )]
    NegativeDecay { lambda: f64 },

    #[error("matrix is numerically singular (pivot {pivot:e} below threshold {threshold:e})")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("jet order {requested} exceeds the supported maximum {max}")]
    UnsupportedOrder { requested: usize, max: usize },

    #[error("second-order reparametrization needs an initial derivative")]
    MissingInitialDerivative,

    #[error("relative error bound is undefined for a zero initial condition")]
    ZeroInitialCondition,

    #[error("adaptive quadrature on [{a}, {b}] did not converge within {budget} function evaluations")]
    QuadratureFailure { a: f64, b: f64, budget: usize },

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalogEntry(String),

    #[error("unknown case `{0}`")]
    UnknownCase(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CertifyError> = std::result::Result<T, E>;
