//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CfError {
    #[error("size error: {0}")]
    Size(String),
    #[error("channel mismatch: {0} vs {1}")]
    ChannelMismatch(usize, usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("regularization delta must be >= 0, got {0}")]
    NegativeDelta(f64),
    #[error("cross-power matrix is singular at frequency bin {0}; use a nonzero delta (OTSDF)")]
    SingularCrossPower(usize),
    #[error("constraint matrix is rank deficient")]
    RankDeficientConstraints,
    #[error("training matrix is rank deficient")]
    RankDeficientTraining,
    #[error("problem size {0} exceeds dense solver cap {1}; use the proximal solver")]
    SizeCapExceeded(usize, usize),
    #[error("both a positive and a negative class are required")]
    DegenerateLabels,
    #[error("gradient is zero; already stationary")]
    ZeroGradient,
    #[error("correlation plane is identically zero")]
    ZeroPlane,
    #[error("score populations must be non-empty")]
    EmptyScores,
    #[error("eye reference points coincide")]
    DegenerateEyes,
    #[error("missing template for class {0}")]
    MissingTemplate(usize),
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CfError>;
