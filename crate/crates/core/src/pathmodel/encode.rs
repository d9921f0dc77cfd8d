use alloc::vec;
use alloc::vec::Vec;

use super::{ModelError, ModelParams, QueryId};
use crate::kgraph::{EntityId, KnowledgeGraph, Path, RelationId};
use crate::numcore::{dot, DenseVector};

#[derive(Debug, Clone, PartialEq)]
struct StepCache {
    relation: RelationId,
    entity: Option<EntityId>,
    entity_vec: Option<Vec<f64>>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
}

/// Forward pass over one path, with everything the backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEncoding {
    block: usize,
    steps: Vec<StepCache>,
}

impl PathEncoding {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The path vector, i.e. the last hidden state.
    pub fn final_state(&self) -> &[f64] {
        &self.steps.last().expect("encodings are never empty").hidden
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.steps[t].hidden
    }

    pub fn pre_activation(&self, t: usize) -> &[f64] {
        &self.steps[t].pre
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// Smallest |pre-activation| across all steps.
    pub fn kink_margin(&self) -> f64 {
        self.steps
            .iter()
            .flat_map(|s| s.pre.iter())
            .fold(f64::INFINITY, |m, &x| m.min(x.abs()))
    }

    /// Folds the sign pattern of every pre-activation into `acc`.
    pub fn fold_signs(&self, mut acc: u64) -> u64 {
        for s in &self.steps {
            for &x in &s.pre {
                acc = acc.rotate_left(1) ^ ((x > 0.0) as u64) ^ 0x9e37_79b9;
                acc = acc.wrapping_mul(0x0100_0000_01b3);
            }
        }
        acc
    }
}

fn check_relation(params: &ModelParams, r: RelationId) -> Result<(), ModelError> {
    if r.index() >= params.shape.relations {
        return Err(ModelError::UnknownId {
            kind: "relation",
            id: r.0,
            len: params.shape.relations,
        });
    }
    Ok(())
}

fn entity_vector_into(
    kg: &KnowledgeGraph,
    params: &ModelParams,
    entity: EntityId,
    out: &mut [f64],
) -> Result<(), ModelError> {
    out.iter_mut().for_each(|x| *x = 0.0);
    let mode = params.config.entity_mode;
    if entity.index() >= kg.num_entities() {
        return Err(ModelError::UnknownId {
            kind: "entity",
            id: entity.0,
            len: kg.num_entities(),
        });
    }
    if mode.uses_learned_entities() {
        let table = params.entity_emb.as_ref().ok_or(ModelError::MissingTable("entity"))?;
        if entity.index() >= table.rows() {
            return Err(ModelError::UnknownId {
                kind: "entity",
                id: entity.0,
                len: table.rows(),
            });
        }
        for (o, &x) in out.iter_mut().zip(table.row(entity.index())) {
            *o += x;
        }
    }
    if mode.uses_types() {
        let table = params.type_emb.as_ref().ok_or(ModelError::MissingTable("type"))?;
        for &t in kg.entity_types(entity) {
            if t.index() >= table.rows() {
                return Err(ModelError::UnknownId {
                    kind: "type",
                    id: t.0,
                    len: table.rows(),
                });
            }
            for (o, &x) in out.iter_mut().zip(table.row(t.index())) {
                *o += x;
            }
        }
    }
    Ok(())
}

/// Representation of an entity: its learned row, the sum of its type rows,
/// or both added together. Untyped entities get the zero vector.
pub fn entity_vector(
    kg: &KnowledgeGraph,
    params: &ModelParams,
    entity: EntityId,
) -> Result<DenseVector, ModelError> {
    if params.config.entity_mode.is_none() {
        return Err(ModelError::Config(alloc::string::String::from(
            "entity vectors need an entity mode",
        )));
    }
    let mut out = DenseVector::zeros(params.config.m);
    entity_vector_into(kg, params, entity, out.as_mut_slice())?;
    Ok(out)
}

fn run(
    params: &ModelParams,
    block: usize,
    kg: Option<&KnowledgeGraph>,
    steps: impl Iterator<Item = (RelationId, Option<EntityId>)>,
) -> Result<PathEncoding, ModelError> {
    let cfg = params.config;
    let b = &params.blocks[block];
    let use_entities = kg.is_some() && !cfg.entity_mode.is_none();
    let mut prev = vec![0.0; cfg.h];
    let mut tmp = vec![0.0; cfg.h];
    let mut cache = Vec::new();
    for (relation, entity) in steps {
        check_relation(params, relation)?;
        let mut pre = vec![0.0; cfg.h];
        b.w_hh.matvec_into(&prev, &mut pre);
        b.w_ih.matvec_into(b.relation_emb.row(relation.index()), &mut tmp);
        for (p, &x) in pre.iter_mut().zip(&tmp) {
            *p += x;
        }
        let mut entity_vec = None;
        if use_entities {
            let (kg, e) = (kg.unwrap(), entity.ok_or(ModelError::EmptyPath)?);
            let w_eh = b.w_eh.as_ref().ok_or(ModelError::MissingTable("W_eh"))?;
            let mut y = vec![0.0; cfg.m];
            entity_vector_into(kg, params, e, &mut y)?;
            w_eh.matvec_into(&y, &mut tmp);
            for (p, &x) in pre.iter_mut().zip(&tmp) {
                *p += x;
            }
            entity_vec = Some(y);
        }
        let hidden: Vec<f64> = pre.iter().map(|&x| cfg.activation.apply(x)).collect();
        prev.copy_from_slice(&hidden);
        cache.push(StepCache {
            relation,
            entity: if use_entities { entity } else { None },
            entity_vec,
            pre,
            hidden,
        });
    }
    if cache.is_empty() {
        return Err(ModelError::EmptyPath);
    }
    Ok(PathEncoding {
        block,
        steps: cache,
    })
}

/// Encodes `path` with the block that answers `query`.
pub fn encode_path(
    params: &ModelParams,
    kg: &KnowledgeGraph,
    path: &Path,
    query: QueryId,
) -> Result<PathEncoding, ModelError> {
    let block = params.block_index(query)?;
    run(
        params,
        block,
        Some(kg),
        path.steps.iter().map(|s| (s.relation, Some(s.entity))),
    )
}

/// Encodes a bare relation sequence with block `block`; no entity input.
pub fn encode_relations(
    params: &ModelParams,
    block: usize,
    relations: &[RelationId],
) -> Result<PathEncoding, ModelError> {
    if block >= params.blocks.len() {
        return Err(ModelError::UnknownId {
            kind: "block",
            id: block as u32,
            len: params.blocks.len(),
        });
    }
    run(params, block, None, relations.iter().map(|&r| (r, None)))
}

pub fn score_path(
    params: &ModelParams,
    encoding: &PathEncoding,
    query: QueryId,
) -> Result<f64, ModelError> {
    let q = params.query_vector(query)?;
    Ok(dot(encoding.final_state(), q))
}

/// Back-propagates through time. `d_states[t]` is the loss gradient
/// arriving directly at hidden state `t`; gradients are added into `grads`.
pub fn backward(
    params: &ModelParams,
    kg: Option<&KnowledgeGraph>,
    encoding: &PathEncoding,
    d_states: &[Vec<f64>],
    grads: &mut ModelParams,
) -> Result<(), ModelError> {
    let cfg = params.config;
    let k = encoding.steps.len();
    if d_states.len() != k {
        return Err(ModelError::Dimension(alloc::format!(
            "{} state gradients for a {k}-step path",
            d_states.len()
        )));
    }
    let b = &params.blocks[encoding.block];
    let mut carry = vec![0.0; cfg.h];
    let mut d_pre = vec![0.0; cfg.h];
    let zeros = vec![0.0; cfg.h];
    for t in (0..k).rev() {
        let step = &encoding.steps[t];
        for i in 0..cfg.h {
            let dh = carry[i] + d_states[t][i];
            d_pre[i] = dh * cfg.activation.derivative(step.pre[i], step.hidden[i]);
        }
        let prev = if t == 0 {
            &zeros
        } else {
            &encoding.steps[t - 1].hidden
        };
        let g = &mut grads.blocks[encoding.block];
        g.w_hh.add_outer(&d_pre, prev);
        g.w_ih.add_outer(&d_pre, b.relation_emb.row(step.relation.index()));
        b.w_ih
            .matvec_transpose_acc(&d_pre, g.relation_emb.row_mut(step.relation.index()));

        if let (Some(y), Some(e)) = (&step.entity_vec, step.entity) {
            let w_eh = b.w_eh.as_ref().ok_or(ModelError::MissingTable("W_eh"))?;
            g.w_eh
                .as_mut()
                .ok_or(ModelError::MissingTable("W_eh"))?
                .add_outer(&d_pre, y);
            let mut dy = vec![0.0; cfg.m];
            w_eh.matvec_transpose_acc(&d_pre, &mut dy);
            if cfg.entity_mode.uses_learned_entities() {
                let table = grads.entity_emb.as_mut().ok_or(ModelError::MissingTable("entity"))?;
                for (o, &x) in table.row_mut(e.index()).iter_mut().zip(&dy) {
                    *o += x;
                }
            }
            if cfg.entity_mode.uses_types() {
                let kg = kg.ok_or(ModelError::MissingTable("type"))?;
                let table = grads.type_emb.as_mut().ok_or(ModelError::MissingTable("type"))?;
                for &ty in kg.entity_types(e) {
                    for (o, &x) in table.row_mut(ty.index()).iter_mut().zip(&dy) {
                        *o += x;
                    }
                }
            }
        }

        carry.iter_mut().for_each(|x| *x = 0.0);
        b.w_hh.matvec_transpose_acc(&d_pre, &mut carry);
    }
    Ok(())
}

/// Backward pass when only the path vector receives gradient.
pub fn backward_final(
    params: &ModelParams,
    kg: &KnowledgeGraph,
    encoding: &PathEncoding,
    d_final: &[f64],
    grads: &mut ModelParams,
) -> Result<(), ModelError> {
    let h = params.config.h;
    let mut d_states = vec![vec![0.0; h]; encoding.len()];
    d_states
        .last_mut()
        .expect("encodings are never empty")
        .copy_from_slice(d_final);
    backward(params, Some(kg), encoding, &d_states, grads)
}
