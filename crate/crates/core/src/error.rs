use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid instance: {}", .0.join("; "))]
    InvalidInstance(Vec<String>),

    #[error("invalid regularizer: {0}")]
    InvalidRegularizer(String),

    #[error("invalid function class: {0}")]
    InvalidClass(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no data")]
    NoData,

    #[error("empty hypothesis class")]
    EmptyClass,

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("dual bracket not found (state {state})")]
    DualBracket { state: usize },

    #[error("f not strictly convex on range (state {state})")]
    NotStrictlyConvex { state: usize },

    #[error("class not covered by reference policy at ({state},{action})")]
    NotCovered { state: usize, action: usize },

    #[error("support violation at ({state},{action})")]
    SupportViolation { state: usize, action: usize },

    #[error("degenerate rate fit (exact optimum reached)")]
    DegenerateRateFit,

    #[error("rate fit needs at least 3 distinct sample sizes, got {0}")]
    TooFewSampleSizes(usize),

    #[error("code too small: {kept} codewords available, need {needed}")]
    CodeTooSmall { kept: usize, needed: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
