use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {index} has norm below epsilon and cannot be normalized")]
    DegenerateRow { index: usize },

    #[error("embedding width mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("malformed matrix: {0}")]
    Shape(String),

    #[error("temperature must be positive, got {0}")]
    NonPositiveTau(f64),

    #[error("invalid word spans: {0}")]
    BadSpans(String),

    #[error("source count mismatch: text-vision has {tv}, vision-vision has {vv}")]
    SourceCountMismatch { tv: usize, vv: usize },

    #[error("source index {index} out of range for {len} sources")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("exhaustive search over {subsets} subsets exceeds the oracle guard")]
    InstanceTooLarge { subsets: u128 },

    #[error("budget {budget} exceeds token count {tokens}")]
    BudgetExceedsTokens { budget: usize, tokens: usize },

    #[error("baseline performance must be positive")]
    ZeroBaseline,

    #[error("full-set objective is not monotone in temperature on [{lo}, {hi}]")]
    NonMonotone { lo: f64, hi: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    BadVersion(u32),

    #[error("file truncated while reading {0}")]
    TruncatedFile(&'static str),

    #[error("invariant violation: {detail}")]
    InvariantViolation { detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invariant(detail: impl Into<String>) -> Self {
        Error::InvariantViolation {
            detail: detail.into(),
        }
    }
}
