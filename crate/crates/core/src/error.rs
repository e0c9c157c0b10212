use thiserror::Error;

/// Errors raised by the laboratory's operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible geometry: eps = {eps} must be below the admissible radius r = {r}")]
    InfeasibleGeometry { eps: f64, r: f64 },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("arity error: expected {expected} fields, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("characteristic runaway: step cap of {cap} exceeded")]
    Runaway { cap: usize },

    #[error("ill-posed family at node {node}: |det| = {det:e} is below {threshold:e}")]
    IllPosedFamily {
        node: usize,
        det: f64,
        threshold: f64,
    },

    #[error("degenerate initial datum at node {node}: |a| = {value:e} is below {threshold:e}")]
    DegenerateInitialDatum {
        node: usize,
        value: f64,
        threshold: f64,
    },

    #[error("admissibility error: {0}")]
    Admissibility(String),

    #[error("insufficient range: d spans {decades:.3} decades, at least one is required")]
    InsufficientRange { decades: f64 },

    #[error("unsupported case: {0}")]
    UnsupportedCase(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("verification failure: {0}")]
    VerificationFailure(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
