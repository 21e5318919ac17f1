use thiserror::Error;

pub type Result<T, E = ScfaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ScfaError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("partition sizes differ: {left:?} vs {right:?}")]
    PartitionMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("matrix is not uniform-block: deviation {deviation:e} in block ({row}, {col})")]
    StructureViolation {
        deviation: f64,
        row: usize,
        col: usize,
    },

    #[error("coordinate matrix B is not symmetric")]
    NotSymmetric,

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("sample too small: n = {n}, need n > {required}")]
    SampleTooSmall { n: usize, required: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("community {community} has {size} variables, need more than 2")]
    CommunityTooSmall { community: String, size: usize },

    #[error("error variance for community {community} is {value}, must be positive")]
    NonPositiveVariance { community: usize, value: f64 },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("ragged rows: line {line} has {found} fields, expected {expected}")]
    RaggedRows {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("non-numeric cell at line {line}, column {column}: {value:?}")]
    NonNumericCell {
        line: u64,
        column: usize,
        value: String,
    },

    #[error("membership names unknown variable {0:?}")]
    UnknownVariable(String),

    #[error("variable {0:?} has no community assignment")]
    MissingVariable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl ScfaError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ScfaError::SingularMatrix(_) | ScfaError::Consistency(_) | ScfaError::NotSymmetric
        )
    }
}
