use thiserror::Error;

/// Errors shared across the crate.
///
/// Geometry and alphabet mismatches are reported with enough context to
/// identify the offending call site; construction-time failures carry the
/// counts needed to diagnose parameter choices.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: u32, right: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("box not contained in support: {0}")]
    NotContained(String),

    #[error("empty support")]
    EmptySupport,

    #[error("empty intersection: {0}")]
    EmptyIntersection(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("candidate budget exhausted: {accepted} of {target} distinct patterns after {draws} draws")]
    BudgetExhausted {
        accepted: usize,
        target: usize,
        draws: usize,
    },

    #[error("admissibility unsatisfiable: zero acceptances in {draws} draws ({detail})")]
    Unsatisfiable { draws: usize, detail: String },

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("assignment domain mismatch: {0}")]
    AssignmentDomainMismatch(String),

    #[error("no feasible template: {0}")]
    NoFeasibleTemplate(String),

    #[error("preserve box straddles sub-block boundaries: {0}")]
    PreserveStraddlesBlocks(String),

    #[error("window too large for built stage: {0}")]
    WindowTooLarge(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
