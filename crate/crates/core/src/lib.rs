//! Recurrent path reasoning over knowledge graphs.
//!
//! Entity pairs are connected by multi-hop relation paths. Each path is
//! composed by a recurrent encoder into a vector, scored against a query
//! relation, and the per-path scores are pooled into a single probability
//! that the pair participates in that relation.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, checkpoints
//! and the command-line driver live in the `chainkb` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod eval;
pub mod kgraph;
pub mod numcore;
pub mod pathmodel;
pub mod pathquery;
pub mod pooling;
pub mod synthkg;
pub mod training;

pub use kgraph::{EntityId, KnowledgeGraph, Path, RelationId, Triple, TypeId};
pub use numcore::{DenseMatrix, DenseVector};
pub use pathmodel::{ModelConfig, ModelParams, QueryId};
pub use pooling::PoolingKind;
