use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown UPOS tag `{0}`")]
    UnknownTag(String),

    #[error("empty treebank")]
    EmptyTreebank,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("position (sentence {sentence}, token {token}) is outside the treebank")]
    PositionOutOfRange { sentence: usize, token: usize },

    #[error("embedding line {line}: {message}")]
    Embedding { line: usize, message: String },

    #[error("data has rank {rank}, below the requested {requested} components; reduce the output dimension")]
    RankDeficient { rank: usize, requested: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("tag conditioning: {0}")]
    Conditioning(String),

    #[error("probe error: {0}")]
    Probe(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
