use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // ingest
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("non-numeric count {value:?} in column {column:?} at record {record}")]
    NonNumericCount {
        record: u64,
        column: String,
        value: String,
    },
    #[error("duplicate timestamp {timestamp} for segment {segment:?}")]
    DuplicateTimestamp { segment: String, timestamp: String },
    #[error("series {series:?} has {count} missing samples")]
    MissingSamples { series: String, count: usize },
    #[error("unknown weather description {0:?}")]
    UnknownDescription(String),
    #[error("series windows do not overlap")]
    NoOverlap,
    #[error("gap of {length} samples at position {position} in series {series:?}")]
    GapTooLarge {
        series: String,
        position: usize,
        length: usize,
    },
    #[error("unstable system: companion spectral radius {spectral_radius}")]
    UnstableSystem { spectral_radius: f64 },

    // clustering
    #[error("empty series")]
    EmptySeries,
    #[error("warping band {window} cannot connect lengths {len_a} and {len_b}")]
    BandInfeasible {
        len_a: usize,
        len_b: usize,
        window: usize,
    },
    #[error("k = {k} is not valid for {n} series")]
    TooFewSeries { k: usize, n: usize },
    #[error("Calinski-Harabasz undefined for k = {k} with {n} series")]
    DegenerateK { k: usize, n: usize },

    // features / regression
    #[error("series of length {length} too short for {required} lags")]
    SeriesTooShort { length: usize, required: usize },
    #[error("zero-variance column {0:?}")]
    ZeroVarianceColumn(String),
    #[error("rank deficient design; dependent columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("linear solve failed: {0}")]
    SolveFailed(String),
    #[error("no convergence after {max_iter} iterations (KKT violation {violation:e})")]
    NoConvergence { max_iter: usize, violation: f64 },
    #[error("degenerate correlation: {0}")]
    DegenerateCorrelation(String),

    // neural
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    // eval
    #[error("observed signal has zero norm")]
    ZeroSignal,
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    // text formats
    #[error("parse error in {what} at line {line}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSeries(_) => "InvalidSeries",
            Error::InvalidSplit(_) => "InvalidSplit",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::NonNumericCount { .. } => "NonNumericCount",
            Error::DuplicateTimestamp { .. } => "DuplicateTimestamp",
            Error::MissingSamples { .. } => "MissingSamples",
            Error::UnknownDescription(_) => "UnknownDescription",
            Error::NoOverlap => "NoOverlap",
            Error::GapTooLarge { .. } => "GapTooLarge",
            Error::UnstableSystem { .. } => "UnstableSystem",
            Error::EmptySeries => "EmptySeries",
            Error::BandInfeasible { .. } => "BandInfeasible",
            Error::TooFewSeries { .. } => "TooFewSeries",
            Error::DegenerateK { .. } => "DegenerateK",
            Error::SeriesTooShort { .. } => "SeriesTooShort",
            Error::ZeroVarianceColumn(_) => "ZeroVarianceColumn",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::SolveFailed(_) => "SolveFailed",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::DegenerateCorrelation(_) => "DegenerateCorrelation",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NonFiniteGradient => "NonFiniteGradient",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::ZeroSignal => "ZeroSignal",
            Error::LayoutMismatch(_) => "LayoutMismatch",
            Error::Parse { .. } => "Parse",
            Error::Csv(_) => "Csv",
            Error::Io(_) => "Io",
        }
    }
}
