//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated its stated domain (out of range, non-finite,
    /// mismatched shape, ...).
    #[error("input domain: {0}")]
    InputDomain(String),

    /// A generated genome has no usable input-to-output route.
    #[error("degenerate genome: {0}")]
    DegenerateGenome(String),

    /// A colony failed to produce a usable genome after the retry cap.
    #[error("colony {colony_id} produced {attempts} degenerate genomes in a row; configuration unusable")]
    ColonyExhausted { colony_id: usize, attempts: usize },

    /// Message-passing protocol violation or unexpected channel shutdown.
    #[error("protocol: {0}")]
    Protocol(String),

    /// One or more configuration violations, collected before any work runs.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    /// Data ingestion failure (missing file, bad cell, unknown column, ...).
    #[error("data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
