use thiserror::Error;

/// Errors surfaced by dataset construction, parsers, models and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset has no relationships")]
    EmptyDataset,

    #[error("datasets do not share a feature space")]
    SpaceMismatch,

    #[error("profile of user {user} carries a non-binary weight {weight}")]
    NotBinary { user: String, weight: f64 },

    #[error("negative weight {weight} for user {user}, feature {feature}")]
    NegativeWeight {
        user: String,
        feature: String,
        weight: f64,
    },

    #[error("p must differ from 1/2")]
    DegenerateP,

    #[error("p must lie in (0, 1], got {0}")]
    BadP(f64),

    #[error("K must lie in [1, {n}], got {k}")]
    BadK { k: usize, n: usize },

    #[error("norm exponent must be >= 1, got {0}")]
    BadNorm(f64),

    #[error("xi must lie in (0, 1), got {0}")]
    BadXi(f64),

    #[error("expected distances are equal; the condition does not apply")]
    EqualMeans,

    #[error("combined feature vector of user {0} has zero magnitude")]
    ZeroVector(String),

    #[error("interval bounds are degenerate: a={a}, b={b}")]
    DegenerateBounds { a: f64, b: f64 },

    #[error("no users overlap between the training and target datasets")]
    EmptyOverlap,

    #[error("training dataset has no usable profiles")]
    EmptyTraining,

    #[error("user {0} is not present in the dataset")]
    UnknownUser(String),

    #[error("could not reach the requested pairwise separation after {attempts} attempts")]
    InfeasibleSeparation { attempts: usize },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {count} malformed line(s), first at line {first_line}: {first_reason}")]
    Parse {
        path: String,
        count: usize,
        first_line: usize,
        first_reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
