//! Recurrent path encoder, path scoring and the compositional path-query
//! scorers.
//!
//! A path `e_s -r1-> e1 -r2-> ... -rk-> e_t` is encoded as
//!
//! ```text
//! h_0 = 0
//! h_t = f(W_hh·h_{t-1} + W_ih·y(r_t) [+ W_eh·y(e_t)])
//! ```
//!
//! where `e_t` is the entity reached by step `t` (the last step consumes the
//! target entity, the source is never consumed). The path score against a
//! query relation `q` is `h_k · y_q`.

mod config;
mod encode;
mod params;
mod query;

pub use config::{Activation, EntityMode, ModelConfig, ModelShape, Sharing};
pub use encode::{
    backward, backward_final, encode_path, encode_relations, entity_vector, score_path,
    PathEncoding,
};
pub use params::{ModelParams, QueryId, RecurrentBlock};
pub use query::{pathquery_backward, pathquery_score, PathQueryVariant};

use alloc::string::String;

use crate::numcore::NumError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("{kind} id {id} out of range ({len} known)")]
    UnknownId {
        kind: &'static str,
        id: u32,
        len: usize,
    },
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("model has no {0} table")]
    MissingTable(&'static str),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("empty path")]
    EmptyPath,
    #[error(transparent)]
    Num(#[from] NumError),
}
