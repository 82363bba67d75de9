//! Minimal dense autodiff: parameter storage, a recording tape with the
//! handful of operations the encoder and heads need, and Adam.

mod lstm;
pub mod optim;
pub mod params;
pub mod tape;

pub use optim::{Adam, AdamConfig};
pub use params::{Gradients, Matrix, Param, ParamGroup, ParamId, ParamStore};
pub use tape::{softmax, NodeId, Tape};

pub(crate) use lstm::forget_bias_mut;
