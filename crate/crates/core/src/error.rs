use std::io;

use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or unknown configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input text that could not be parsed.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// Well-formed input that violates a data contract.
    #[error("validation error: {0}")]
    Validation(String),

    /// Two vehicles overlap; the car-following state is corrupt.
    #[error(
        "simulation integrity error: vehicle {follower} overlaps leader {leader} (gap {gap:.3} m)"
    )]
    Overlap {
        follower: String,
        leader: String,
        gap: f64,
    },

    #[error("lookup error: {0}")]
    Lookup(String),

    /// A demand cannot be met because the link is in outage.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Error with simulation context (tick and vehicle) attached.
    #[error("tick {t}, vehicle {vehicle}: {source}")]
    AtTick {
        t: u32,
        vehicle: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// The innermost error, skipping tick context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTick { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
