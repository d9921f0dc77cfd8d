//! Knowledge-graph storage, ingestion, inverse-relation augmentation and
//! path extraction.
//!
//! Every relation `r` is interned together with its inverse `_inv:r`; the
//! two ids differ only in their lowest bit, so `(s, r, t)` is stored along
//! with `(t, _inv:r, s)`.

mod graph;
mod paths;
mod text;
mod vocab;

pub use graph::{GraphBuilder, KnowledgeGraph, LoadReport, TypeLoadReport, MAX_TYPES_PER_ENTITY};
pub use paths::{enumerate_paths, enumerate_paths_excluding, sample_paths, sample_paths_excluding, WalkConfig, DEFAULT_EXPANSION_CAP};
pub use text::{truncate_textual_relation, TEXT_RELATION_PREFIX};
pub use vocab::Vocab;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Name prefix reserved for synthesized inverse relations.
pub const INVERSE_PREFIX: &str = "_inv:";

/// Longest path the model is built for.
pub const MAX_PATH_LEN: usize = 7;

macro_rules! id_type {
    ($name:ident) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(EntityId);
id_type!(RelationId);
id_type!(TypeId);

impl RelationId {
    pub fn inverse(self) -> RelationId {
        RelationId(self.0 ^ 1)
    }

    pub fn is_inverse(self) -> bool {
        self.0 & 1 == 1
    }

    /// The forward relation of the pair this id belongs to.
    pub fn base(self) -> RelationId {
        RelationId(self.0 & !1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub source: EntityId,
    pub relation: RelationId,
    pub target: EntityId,
}

impl Triple {
    pub fn new(source: EntityId, relation: RelationId, target: EntityId) -> Self {
        Self {
            source,
            relation,
            target,
        }
    }

    pub fn inverse(self) -> Triple {
        Triple::new(self.target, self.relation.inverse(), self.source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Step {
    pub relation: RelationId,
    pub entity: EntityId,
}

/// `source -r1-> e1 -r2-> ... -rk-> target`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    pub source: EntityId,
    pub steps: Vec<Step>,
}

impl Path {
    pub fn new(source: EntityId, steps: Vec<Step>) -> Self {
        Self { source, steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn target(&self) -> EntityId {
        self.steps.last().map_or(self.source, |s| s.entity)
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        self.steps.iter().map(|s| s.relation)
    }

    /// Checks length bounds, edge membership and the declared endpoint.
    pub fn validate(
        &self,
        kg: &KnowledgeGraph,
        target: EntityId,
        max_len: usize,
    ) -> Result<(), KgError> {
        if self.steps.is_empty() || self.steps.len() > max_len {
            return Err(KgError::InvalidPath(alloc::format!(
                "length {} outside 1..={max_len}",
                self.steps.len()
            )));
        }
        let mut at = self.source;
        for (i, step) in self.steps.iter().enumerate() {
            if !kg.contains(Triple::new(at, step.relation, step.entity)) {
                return Err(KgError::InvalidPath(alloc::format!("step {i} is not an edge")));
            }
            at = step.entity;
        }
        if at != target {
            return Err(KgError::InvalidPath(String::from("path does not end at target")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KgError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("id {id} out of range for {kind}")]
    BadId { kind: &'static str, id: u32 },
    #[error("path enumeration exceeded {cap} expansions; use random-walk sampling instead")]
    ExpansionCap { cap: usize },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("empty textual relation")]
    EmptyPhrase,
    #[error("max path length {0} outside 1..=7")]
    MaxLen(usize),
}
