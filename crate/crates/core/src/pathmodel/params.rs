use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, ModelShape, Sharing};
use crate::numcore::{math, DenseMatrix, Parameters, Rng, TensorRef};

/// Index into the list of query relations a model is trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QueryId(pub u32);

impl QueryId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Recurrence parameters plus the relation table they read from.
///
/// Matrices are stored output-major: `w_ih` is `h × d`, so `w_ih · y_r`
/// is a plain row-major product.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentBlock {
    pub relation_emb: DenseMatrix,
    pub w_hh: DenseMatrix,
    pub w_ih: DenseMatrix,
    pub w_eh: Option<DenseMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub shape: ModelShape,
    /// One block when shared, one per query relation otherwise.
    pub blocks: Vec<RecurrentBlock>,
    /// Query relation vectors, `query_relations × h`.
    pub query_emb: DenseMatrix,
    /// `types × m`; present whenever entities are modelled.
    pub type_emb: Option<DenseMatrix>,
    /// `entities × m`; present for the learned-entity modes.
    pub entity_emb: Option<DenseMatrix>,
}

fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    let a = math::sqrt(6.0 / (rows + cols).max(1) as f64);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-a..=a))
}

impl ModelParams {
    /// All-zero parameters with the right shapes (used for gradients and
    /// as a loading target).
    pub fn zeros(config: ModelConfig, shape: ModelShape) -> Result<Self, ModelError> {
        Self::build(config, shape, &mut |r, c| DenseMatrix::zeros(r, c))
    }

    /// Uniform Glorot initialisation, drawn table by table in a fixed order.
    pub fn init(config: ModelConfig, shape: ModelShape, rng: &mut Rng) -> Result<Self, ModelError> {
        Self::build(config, shape, &mut |r, c| glorot(r, c, rng))
    }

    fn build(
        config: ModelConfig,
        shape: ModelShape,
        make: &mut dyn FnMut(usize, usize) -> DenseMatrix,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let n_blocks = match config.sharing {
            Sharing::Shared => 1,
            Sharing::PerRelation => shape.query_relations.max(1),
        };
        let ModelConfig { d, h, m, .. } = config;
        let mut blocks = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            let relation_emb = make(shape.relations, d);
            let w_hh = make(h, h);
            let w_ih = make(h, d);
            let w_eh = (!config.entity_mode.is_none()).then(|| make(h, m));
            blocks.push(RecurrentBlock {
                relation_emb,
                w_hh,
                w_ih,
                w_eh,
            });
        }
        let query_emb = make(shape.query_relations, h);
        let type_emb = (!config.entity_mode.is_none()).then(|| make(shape.types, m));
        let entity_emb = config
            .entity_mode
            .uses_learned_entities()
            .then(|| make(shape.entities, m));
        Ok(Self {
            config,
            shape,
            blocks,
            query_emb,
            type_emb,
            entity_emb,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill_zero();
        z
    }

    pub fn fill_zero(&mut self) {
        for (_, m) in self.matrices_mut() {
            m.fill(0.0);
        }
    }

    /// Block used when answering `query`.
    pub fn block_index(&self, query: QueryId) -> Result<usize, ModelError> {
        if query.index() >= self.shape.query_relations {
            return Err(ModelError::UnknownId {
                kind: "query relation",
                id: query.0,
                len: self.shape.query_relations,
            });
        }
        Ok(match self.config.sharing {
            Sharing::Shared => 0,
            Sharing::PerRelation => query.index(),
        })
    }

    pub fn query_vector(&self, query: QueryId) -> Result<&[f64], ModelError> {
        self.block_index(query)?;
        Ok(self.query_emb.row(query.index()))
    }

    /// Every parameter matrix with a stable name, in serialisation order.
    pub fn matrices(&self) -> Vec<(String, &DenseMatrix)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.relation_emb"), &b.relation_emb));
            out.push((format!("block{i}.w_hh"), &b.w_hh));
            out.push((format!("block{i}.w_ih"), &b.w_ih));
            if let Some(w) = &b.w_eh {
                out.push((format!("block{i}.w_eh"), w));
            }
        }
        out.push((String::from("query_emb"), &self.query_emb));
        if let Some(t) = &self.type_emb {
            out.push((String::from("type_emb"), t));
        }
        if let Some(e) = &self.entity_emb {
            out.push((String::from("entity_emb"), e));
        }
        out
    }

    pub fn matrices_mut(&mut self) -> Vec<(String, &mut DenseMatrix)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.push((format!("block{i}.relation_emb"), &mut b.relation_emb));
            out.push((format!("block{i}.w_hh"), &mut b.w_hh));
            out.push((format!("block{i}.w_ih"), &mut b.w_ih));
            if let Some(w) = &mut b.w_eh {
                out.push((format!("block{i}.w_eh"), w));
            }
        }
        out.push((String::from("query_emb"), &mut self.query_emb));
        if let Some(t) = &mut self.type_emb {
            out.push((String::from("type_emb"), t));
        }
        if let Some(e) = &mut self.entity_emb {
            out.push((String::from("entity_emb"), e));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().iter().all(|(_, m)| m.is_finite())
    }

    /// `self += alpha · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, alpha: f64) {
        let theirs = other.matrices();
        for ((_, mine), (_, t)) in self.matrices_mut().into_iter().zip(theirs) {
            for (a, b) in mine.as_mut_slice().iter_mut().zip(t.as_slice()) {
                *a += alpha * b;
            }
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.matrices().iter().map(|(_, m)| m.as_slice().len()).sum()
    }
}

impl Parameters for ModelParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        self.matrices()
            .into_iter()
            .map(|(name, m)| TensorRef {
                name,
                data: m.as_slice(),
            })
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.matrices_mut()
            .into_iter()
            .map(|(_, m)| m.as_mut_slice())
            .collect()
    }
}
