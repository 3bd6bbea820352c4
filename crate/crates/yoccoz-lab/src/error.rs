use thiserror::Error;

/// Errors shared across the whole laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("invalid gauge: {0}")]
    GaugeInvalid(String),
    #[error("root bracket failure: {0}")]
    RootBracketFailure(String),
    #[error("tuning cannot lock combinatorics at depth {depth}: {msg}")]
    TuneDepthUnreachable { depth: usize, msg: String },
    #[error("degenerate cell: {0}")]
    DegenerateCell(String),
    #[error("cell index mismatch: {0}")]
    IndexMismatch(String),
    #[error("point outside domain: {0}")]
    OutsideDomain(String),
    #[error("Mobius pole too close: denominator {0}")]
    PoleProximity(f64),
    #[error("subdivision count {0} too small for the Mobius interpolation")]
    SmallK(usize),
    #[error("node list mismatch: {0}")]
    NodeMismatch(String),
    #[error("sample point too close to a seam")]
    SeamProximity,
    #[error("finite-difference step underflow")]
    StepUnderflow,
    #[error("resolution insufficient: {0}")]
    ResolutionInsufficient(String),
    #[error("insufficient tail data: {0}")]
    InsufficientTail(String),
    #[error("sampling budget too small: {0}")]
    BudgetTooSmall(String),
    #[error("manifest invalid: {0}")]
    ManifestInvalid(String),
    #[error("stage {stage} failed: {source}")]
    StageFailure {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
