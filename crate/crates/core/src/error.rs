use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains a single class; both labels 0 and 1 are required")]
    SingleClassDataset,
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index {index} out of range (valid range {min}..={max})")]
    IndexOutOfRange {
        index: usize,
        min: usize,
        max: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("leaf {leaf} of tree {tree} receives no instances from the dataset")]
    DegenerateLeaf { tree: usize, leaf: usize },
    #[error("level {level} references column {column} but its input has {width} columns")]
    LevelWidthMismatch {
        level: usize,
        column: usize,
        width: usize,
    },
    #[error("level {0} has no preceding level to explain against")]
    NotACascadeLevel(usize),

    #[error("feature pool too small: {0}")]
    InsufficientFeatures(String),

    #[error("both classes must be present")]
    SingleClass,
    #[error("scored set is empty")]
    EmptySet,

    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric cell at row {row}, column `{col}`")]
    NonNumericCell { row: usize, col: String },
    #[error("label at row {row} is not 0 or 1")]
    NonBinaryLabel { row: usize },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("model invariant violated: {0}")]
    InvariantViolation(String),
    #[error("expected a `{expected}` model, found `{found}`")]
    KindMismatch { expected: String, found: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
