use std::path::PathBuf;

use crate::solver::ResidualStats;

/// One problem found while validating an experiment configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConfigIssue {
    /// 1-based line in the configuration text, when it can be located.
    pub line: Option<usize>,
    /// Dotted key path, e.g. `model.ends[0].warp.slope`.
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("unknown end E{}", .0 + 1)]
    UnknownEnd(usize),

    #[error("radius {radius} outside the domain of end E{}", .end + 1)]
    OutOfDomain { end: usize, radius: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("divergent tail integral: {0}")]
    DivergentTail(String),

    #[error("diagnostics: {0}")]
    Diagnostics(String),

    #[error("quadrature did not reach tolerance on [{a}, {b}] (estimated error {error:e})")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("solver stalled: {reason} (after {} outer iterations)", .stats.iterations)]
    SolverStall { reason: String, stats: Box<ResidualStats> },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("invalid surface: {0}")]
    InvalidSurface(String),

    #[error("level {level} outside field range ({min}, {max}]")]
    LevelOutOfRange { level: f64, min: f64, max: f64 },

    #[error("empty level set at level {0}")]
    EmptyLevelSet(f64),

    #[error("level set at {level} has {components} components")]
    MultiComponent { level: f64, components: usize },

    #[error("extrapolation unreliable: {0}")]
    ExtrapolationUnreliable(String),

    #[error("invalid configuration ({} issue(s))", .0.len())]
    InvalidConfig(Vec<ConfigIssue>),

    #[error("I/O error at {}: {source}", .path.display())]
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

pub type Result<T> = std::result::Result<T, Error>;
