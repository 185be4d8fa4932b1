use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid index: {0}")]
    InvalidIndex(String),

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty population: the tile mask carries no residents")]
    EmptyPopulation,

    #[error("degenerate perturbation: every age-group probability was clamped to zero")]
    DegeneratePerturbation,

    #[error("degenerate group {0}: fewer than two members but nonzero intra-group contact demand")]
    DegenerateGroup(usize),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("mean friendship degree mu={mu} is infeasible, maximum is mu_max={mu_max}")]
    Infeasible { mu: f64, mu_max: f64 },

    #[error("edge probability {probability} exceeds 1 for pair ({u}, {v})")]
    ProbabilityOverflow { u: u32, v: u32, probability: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code contract of the CLI: 2 configuration, 3 feasibility, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible { .. } | Error::ProbabilityOverflow { .. } => 3,
            Error::Io { .. } | Error::Json { .. } | Error::Parse { .. } => 4,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
