use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate rating vector")]
    DegenerateRatings,

    #[error("invalid color distribution: {0}")]
    InvalidDistribution(String),

    #[error("unknown color {0:?}")]
    UnknownColor(String),

    #[error("object {0:?} unusable: every annotation was removed or skipped")]
    ObjectUnusable(String),

    #[error("unknown object id {0:?}")]
    UnknownObject(String),

    #[error("object {object:?} is missing a {what}")]
    MissingField { object: String, what: &'static str },

    #[error("need at least {needed} distinct profiles, got {got}")]
    TooFewProfiles { needed: usize, got: usize },

    #[error("ambiguous extremes: centroids tie on their leading component")]
    AmbiguousExtremes,

    #[error("cluster labeling is only defined for k = 3, got k = {0}")]
    UnsupportedK(usize),

    #[error("group {group} has {available} objects, fewer than the {needed} needed for a split")]
    SplitTooSmall {
        group: String,
        available: usize,
        needed: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite score for object {object:?}, template {template:?}")]
    NonFiniteScore { object: String, template: String },

    #[error("every template has an undefined Kendall correlation for object {0:?}")]
    AllCorrelationsUndefined(String),

    #[error("missing predictions for objects: {}", .0.join(", "))]
    CoverageGap(Vec<String>),

    #[error("incomplete prediction set: object {object:?}, template {template:?} has {found} of 11 colors")]
    IncompletePrediction {
        object: String,
        template: String,
        found: usize,
    },

    #[error("duplicate entry: {0}")]
    Duplicate(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training and evaluation objects overlap: {}", .0.join(", "))]
    SplitOverlap(Vec<String>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("template {id:?}: {reason}")]
    Template { id: String, reason: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by malformed or unreadable input rather than
    /// by input that parses but violates a contract.
    pub fn is_input_format(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Io(_) | Error::UnknownColor(_) | Error::DimensionMismatch { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
