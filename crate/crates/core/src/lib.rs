//! Training and analysis toolkit for UPOS taggers and biaffine dependency
//! parsers: encoder probing, tagging error analysis and tag-masked parser
//! training.

pub mod analysis;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod masking;
pub mod model;
pub mod nn;
pub mod parallel;
pub mod probe;
pub mod synthetic;
pub mod tags;
pub mod treebank;
pub mod vocab;

pub use error::{Error, Result};
