//! Binary model checkpoints.
//!
//! All integers are little-endian.
//!
//! ```text
//! offset  size     field
//! 0       8        magic  b"CHAINKB\0"
//! 8       4        u32    format version (1)
//! 12      4        u32    header length H
//! 16      H        UTF-8 JSON header (model config, table shape, pooling,
//!                  vocabularies, query relations)
//! 16+H    4        u32    tensor count N
//! then N times:
//!         4        u32    name length L
//!         L        UTF-8 tensor name
//!         8        u64    rows
//!         8        u64    cols
//!         8·r·c    f64    row-major values
//! ```
//!
//! Tensors appear in the order of `ModelParams::matrices`. Values are copied
//! bit for bit, so save → load → save reproduces the same bytes.

use serde::{Deserialize, Serialize};

use chainkb_core::pathmodel::{ModelConfig, ModelError, ModelShape};
use chainkb_core::{KnowledgeGraph, ModelParams, PoolingKind, RelationId};

pub const MAGIC: &[u8; 8] = b"CHAINKB\0";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a chainkb checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after the last tensor")]
    Trailing(usize),
    #[error("bad checkpoint header: {0}")]
    Header(String),
    #[error("tensor {index}: expected `{expected}` {er}×{ec}, found `{found}` {fr}×{fc}")]
    Tensor {
        index: usize,
        expected: String,
        er: usize,
        ec: usize,
        found: String,
        fr: u64,
        fc: u64,
    },
    #[error("expected {expected} tensors, found {found}")]
    TensorCount { expected: usize, found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("checkpoint does not match the graph: {0}")]
    GraphMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    pub shape: ModelShape,
    /// Pooling the model was trained with; absent for path-query models.
    pub pooling: Option<PoolingKind>,
    pub query_relations: Vec<String>,
    pub relations: Vec<String>,
    pub types: Vec<String>,
    pub entities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(
        kg: &KnowledgeGraph,
        query_relations: &[RelationId],
        pooling: Option<PoolingKind>,
        params: ModelParams,
    ) -> Self {
        let header = CheckpointHeader {
            model: params.config,
            shape: params.shape,
            pooling,
            query_relations: query_relations
                .iter()
                .map(|&r| kg.relation_name(r).to_string())
                .collect(),
            relations: kg.relations().names().to_vec(),
            types: kg.types().names().to_vec(),
            entities: kg.entities().names().to_vec(),
        };
        Self { header, params }
    }

    /// Checks that `kg` has the vocabularies the model was trained on and
    /// returns the query relation ids.
    pub fn bind(&self, kg: &KnowledgeGraph) -> Result<Vec<RelationId>, CheckpointError> {
        let h = &self.header;
        let same = |what: &str, ours: &[String], theirs: &[String]| {
            if ours == theirs {
                Ok(())
            } else {
                Err(CheckpointError::GraphMismatch(format!(
                    "{what} vocabulary differs ({} in checkpoint, {} in graph)",
                    ours.len(),
                    theirs.len()
                )))
            }
        };
        same("relation", &h.relations, kg.relations().names())?;
        same("entity", &h.entities, kg.entities().names())?;
        if h.model.entity_mode.uses_types() {
            same("type", &h.types, kg.types().names())?;
        }
        h.query_relations
            .iter()
            .map(|name| {
                kg.relation_id(name).ok_or_else(|| {
                    CheckpointError::GraphMismatch(format!("unknown query relation `{name}`"))
                })
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serialises");
        let tensors = self.params.matrices();
        let mut out = Vec::with_capacity(
            32 + header.len() + self.params.num_parameters() * 8 + tensors.len() * 64,
        );
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, m) in tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let hlen = r.u32()? as usize;
        let header: CheckpointHeader = serde_json::from_slice(r.take(hlen)?)
            .map_err(|e| CheckpointError::Header(e.to_string()))?;
        if header.query_relations.len() != header.shape.query_relations {
            return Err(CheckpointError::Header(
                "query relation list disagrees with the table shape".into(),
            ));
        }
        let mut params = ModelParams::zeros(header.model, header.shape)?;
        let count = r.u32()? as usize;
        let mut tensors = params.matrices_mut();
        if count != tensors.len() {
            return Err(CheckpointError::TensorCount {
                expected: tensors.len(),
                found: count,
            });
        }
        for (index, (expected, m)) in tensors.iter_mut().enumerate() {
            let len = r.u32()? as usize;
            let name = String::from_utf8_lossy(r.take(len)?).into_owned();
            let rows = r.u64()?;
            let cols = r.u64()?;
            if name != *expected || rows != m.rows() as u64 || cols != m.cols() as u64 {
                return Err(CheckpointError::Tensor {
                    index,
                    expected: expected.clone(),
                    er: m.rows(),
                    ec: m.cols(),
                    found: name,
                    fr: rows,
                    fc: cols,
                });
            }
            for v in m.as_mut_slice() {
                *v = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
            }
        }
        drop(tensors);
        if r.pos != bytes.len() {
            return Err(CheckpointError::Trailing(bytes.len() - r.pos));
        }
        Ok(Self { header, params })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(CheckpointError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
