use thiserror::Error;

/// Errors across loading, kernel construction, clustering, and training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {message}")]
    Csv { path: String, message: String },

    #[error("non-numeric cell in {path} row {row} column {column}: {value:?}")]
    NonNumericCell {
        path: String,
        row: usize,
        column: usize,
        value: String,
    },

    #[error("row count mismatch across views: {0:?}")]
    RowCountMismatch(Vec<usize>),

    #[error("duplicate sample id {0:?}")]
    DuplicateSampleId(String),

    #[error("sample id order mismatch at row {row}: {left:?} vs {right:?}")]
    SampleIdMismatch {
        row: usize,
        left: String,
        right: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("degenerate kernel width: all points coincide")]
    DegenerateWidth,

    #[error("gram matrix is not symmetric positive semi-definite: {0}")]
    NotPositiveSemiDefinite(String),

    #[error("invalid memberships: {0}")]
    InvalidMemberships(String),

    #[error("kernel k-means collapsed to an empty cluster after all restarts")]
    EmptyClusterCollapse,

    #[error("degenerate kernel weights: u vanished on every coordinate")]
    DegenerateWeights,

    #[error("symmetric positive-definite factorisation failed at pivot {0}")]
    FactorisationFailure(usize),

    #[error("model archive version mismatch: found {found:?}, expected {expected:?}")]
    VersionMismatch { found: String, expected: String },

    #[error("model archive parse error on {path}: {message}")]
    Archive { path: String, message: String },

    #[error("model is not trained: {0}")]
    NotTrained(String),

    #[error("evaluation set needs both classes: {0}")]
    SingleClass(String),

    #[error("missing instrument tags on non-target samples")]
    MissingInstrumentTags,

    #[error("empty grid: {0}")]
    EmptyGrid(String),

    #[error("every grid cell failed; first error: {0}")]
    AllCellsFailed(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable tag for CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv { .. } => "csv",
            Error::NonNumericCell { .. } => "non-numeric-cell",
            Error::RowCountMismatch(_) => "row-count-mismatch",
            Error::DuplicateSampleId(_) => "duplicate-sample-id",
            Error::SampleIdMismatch { .. } => "sample-id-mismatch",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::InvalidParam(_) => "invalid-parameter",
            Error::DegenerateWidth => "degenerate-width",
            Error::NotPositiveSemiDefinite(_) => "not-psd",
            Error::InvalidMemberships(_) => "invalid-memberships",
            Error::EmptyClusterCollapse => "empty-cluster-collapse",
            Error::DegenerateWeights => "degenerate-weights",
            Error::FactorisationFailure(_) => "factorisation-failure",
            Error::VersionMismatch { .. } => "version-mismatch",
            Error::Archive { .. } => "archive",
            Error::NotTrained(_) => "not-trained",
            Error::SingleClass(_) => "single-class",
            Error::MissingInstrumentTags => "missing-instrument-tags",
            Error::EmptyGrid(_) => "empty-grid",
            Error::AllCellsFailed(_) => "all-cells-failed",
            Error::Internal(_) => "internal",
        }
    }
}
