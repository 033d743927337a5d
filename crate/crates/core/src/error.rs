use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("block `{id}`: {reason}")]
    InvalidBlock { id: String, reason: String },

    #[error("blocks `{a}` and `{b}` interpenetrate by {depth:.4}")]
    Interpenetration { a: String, b: String, depth: f64 },

    #[error("support graph contains a cycle through {ids:?}")]
    SupportCycle { ids: Vec<String> },

    #[error("block `{id}` is neither on the ground nor supported by another block")]
    Unsupported { id: String },

    #[error("could not place {count} blocks in a {w}x{h} workspace")]
    Capacity { count: usize, w: f64, h: f64 },

    #[error("color multisets differ: {0}")]
    Infeasible(String),

    #[error("planning error: {0}")]
    Planning(String),

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    #[error("simulation diverged at step {step}")]
    Simulation { step: usize },

    #[error("perturbation over-constrained: no feasible sample after {attempts} attempts")]
    OverConstrained { attempts: usize },

    #[error("simulation trial {index}: {source}")]
    RiskTrial {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular design matrix: {0}")]
    SingularFit(String),

    #[error("sigma {sigma}: {source}")]
    Sigma {
        sigma: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("trial `{id}`: {source}")]
    Trial {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than internal failures.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { .. }
            | Error::Parse(_)
            | Error::Csv(_)
            | Error::Validation(_)
            | Error::InvalidBlock { .. }
            | Error::Interpenetration { .. }
            | Error::SupportCycle { .. }
            | Error::Unsupported { .. }
            | Error::Capacity { .. }
            | Error::Infeasible(_)
            | Error::UnsupportedInput(_)
            | Error::EmptyDataset(_) => true,
            Error::RiskTrial { source, .. }
            | Error::Sigma { source, .. }
            | Error::Trial { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
