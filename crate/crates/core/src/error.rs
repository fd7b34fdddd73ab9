use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("duplicate id: {0}")]
    DuplicateId(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unknown event kind `{0}`")]
    UnknownEventKind(String),

    #[error("unknown sensor `{0}`")]
    UnknownSensor(String),

    #[error("window [{start}, {end}] around t_e = {t_e} exceeds series span [{span_start}, {span_end}]")]
    WindowOutOfBounds {
        t_e: f64,
        start: f64,
        end: f64,
        span_start: f64,
        span_end: f64,
    },

    #[error("cannot partition {count} events into groups of {min}..={max}")]
    InfeasiblePartition { count: usize, min: usize, max: usize },

    #[error("event group rejected: {kept} events left, at least {min} required")]
    GroupRejected { kept: usize, min: usize },

    #[error("block {block} too short: {len} samples, at least {required} required")]
    BlockTooShort {
        block: usize,
        len: usize,
        required: usize,
    },

    #[error("symbol sequences are not aligned: {0}")]
    Misaligned(String),

    #[error("no admissible symbol triples")]
    NoAdmissibleTriples,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("single-class data: {0}")]
    SingleClass(String),

    #[error("fold too small: {0}")]
    FoldTooSmall(String),

    #[error("invalid fold plan: {0}")]
    InvalidFolds(String),

    #[error("missing sensor {sensor} for player {player_id} in match {match_id}")]
    MissingSensor {
        sensor: String,
        player_id: String,
        match_id: String,
    },

    #[error("unrecognized dataset layout under {path}: {found}")]
    UnrecognizedLayout { path: PathBuf, found: String },

    #[error("unsupported model version {0}")]
    UnsupportedModelVersion(u32),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(name: &'static str, message: impl ToString) -> Self {
        Error::InvalidParameter {
            name,
            message: message.to_string(),
        }
    }

    /// Wraps the error with a human-readable location, e.g. `player p1 / match m3`.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::MissingFile(_) => "missing_file",
            Error::DuplicateId(_) => "duplicate_id",
            Error::Io { .. } => "io",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::DegenerateSeries(_) => "degenerate_series",
            Error::EmptyInput(_) => "empty_input",
            Error::UnknownEventKind(_) => "unknown_event_kind",
            Error::UnknownSensor(_) => "unknown_sensor",
            Error::WindowOutOfBounds { .. } => "window_out_of_bounds",
            Error::InfeasiblePartition { .. } => "infeasible_partition",
            Error::GroupRejected { .. } => "group_rejected",
            Error::BlockTooShort { .. } => "block_too_short",
            Error::Misaligned(_) => "misaligned",
            Error::NoAdmissibleTriples => "no_admissible_triples",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::SingleClass(_) => "single_class",
            Error::FoldTooSmall(_) => "fold_too_small",
            Error::InvalidFolds(_) => "invalid_folds",
            Error::MissingSensor { .. } => "missing_sensor",
            Error::UnrecognizedLayout { .. } => "unrecognized_layout",
            Error::UnsupportedModelVersion(_) => "unsupported_model_version",
            Error::Context { source, .. } => source.kind(),
        }
    }
}
