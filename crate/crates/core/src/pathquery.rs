//! Path queries: given a source entity and a relation sequence, rank every
//! entity as the possible end of that sequence.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::eval::{mean_quantile, QuantileQuery};
use crate::kgraph::{EntityId, KnowledgeGraph, RelationId, MAX_PATH_LEN};
use crate::numcore::{derive_rng, math, sigmoid, AdamConfig, AdamState, NumError, Rng};
use crate::pathmodel::{
    pathquery_backward, pathquery_score, ModelConfig, ModelParams, ModelShape, PathQueryVariant,
};
use crate::training::TrainError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathQuery {
    pub source: EntityId,
    pub relations: Vec<RelationId>,
    pub target: EntityId,
}

/// Every entity reachable from `source` by following `relations` in order.
pub fn answers(kg: &KnowledgeGraph, source: EntityId, relations: &[RelationId]) -> BTreeSet<EntityId> {
    let mut frontier = BTreeSet::new();
    frontier.insert(source);
    for &r in relations {
        let mut next = BTreeSet::new();
        for &e in &frontier {
            next.extend(kg.edges(e).iter().filter(|s| s.relation == r).map(|s| s.entity));
        }
        frontier = next;
    }
    frontier
}

/// One query per edge of the graph, inverse edges included.
pub fn edge_queries(kg: &KnowledgeGraph) -> Vec<PathQuery> {
    kg.triples()
        .map(|t| PathQuery {
            source: t.source,
            relations: alloc::vec![t.relation],
            target: t.target,
        })
        .collect()
}

/// `n` distinct queries made by random walks whose length is drawn from
/// `min_len..=max_len`. Gives up after `50 · n` walks.
pub fn sample_queries(
    kg: &KnowledgeGraph,
    n: usize,
    min_len: usize,
    max_len: usize,
    rng: &mut Rng,
) -> Vec<PathQuery> {
    let mut out = BTreeSet::new();
    let mut ordered = Vec::new();
    if kg.num_entities() == 0 || min_len == 0 || min_len > max_len || max_len > MAX_PATH_LEN {
        return ordered;
    }
    for _ in 0..50 * n {
        if ordered.len() == n {
            break;
        }
        let len = rng.gen_range(min_len..=max_len);
        let source = EntityId(rng.gen_range(0..kg.num_entities() as u32));
        let mut at = source;
        let mut relations = Vec::with_capacity(len);
        for _ in 0..len {
            let edges = kg.edges(at);
            if edges.is_empty() {
                break;
            }
            let step = edges[rng.gen_range(0..edges.len())];
            relations.push(step.relation);
            at = step.entity;
        }
        if relations.len() < len {
            continue;
        }
        let q = PathQuery {
            source,
            relations,
            target: at,
        };
        if out.insert(q.clone()) {
            ordered.push(q);
        }
    }
    ordered
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathQueryConfig {
    pub variant: PathQueryVariant,
    /// Shared size of entity, relation and hidden vectors.
    pub dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for PathQueryConfig {
    fn default() -> Self {
        Self {
            variant: PathQueryVariant::RnnDiag,
            dim: 100,
            epochs: 20,
            batch_size: 32,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

/// Randomly initialised path-query model for `kg`.
pub fn init_model(kg: &KnowledgeGraph, dim: usize, rng: &mut Rng) -> Result<ModelParams, TrainError> {
    let shape = ModelShape {
        relations: kg.num_relations(),
        query_relations: 0,
        types: 0,
        entities: kg.num_entities(),
    };
    Ok(ModelParams::init(ModelConfig::path_query(dim), shape, rng)?)
}

/// `−log σ(score(s, π, t) − score(s, π, t⁻))`; with `grads`, adds
/// `scale · ∂loss/∂θ` into it.
pub fn ranking_loss(
    params: &ModelParams,
    query: &PathQuery,
    negative: EntityId,
    variant: PathQueryVariant,
    scale: f64,
    grads: Option<&mut ModelParams>,
) -> Result<f64, TrainError> {
    let pos = pathquery_score(params, query.source, &query.relations, query.target, variant)?;
    let neg = pathquery_score(params, query.source, &query.relations, negative, variant)?;
    let margin = pos - neg;
    let loss = if margin > 0.0 {
        math::ln_1p(math::exp(-margin))
    } else {
        -margin + math::ln_1p(math::exp(margin))
    };
    if let Some(g) = grads {
        let up = -scale * (1.0 - sigmoid(margin));
        let (s, rels) = (query.source, &query.relations);
        pathquery_backward(params, s, rels, query.target, variant, up, g)?;
        pathquery_backward(params, s, rels, negative, variant, -up, g)?;
    }
    Ok(loss)
}

#[derive(Debug, Clone)]
pub struct PathQueryOutcome {
    pub params: ModelParams,
    pub trace: Vec<f64>,
}

/// Adam on the ranking loss, one uniformly drawn wrong answer per query
/// and step.
pub fn train_pathquery(
    kg: &KnowledgeGraph,
    queries: &[PathQuery],
    init: ModelParams,
    config: &PathQueryConfig,
) -> Result<PathQueryOutcome, TrainError> {
    if queries.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if config.batch_size == 0 {
        return Err(TrainError::Config("batch_size must be at least 1"));
    }
    let mut wrong: BTreeMap<(EntityId, &[RelationId]), Vec<EntityId>> = BTreeMap::new();
    for q in queries {
        wrong.entry((q.source, &q.relations)).or_insert_with(|| {
            let right = answers(kg, q.source, &q.relations);
            (0..kg.num_entities() as u32)
                .map(EntityId)
                .filter(|e| !right.contains(e))
                .collect()
        });
    }

    let mut params = init;
    let mut grads = params.zeros_like();
    let mut state = AdamState::new(config.adam, &params);
    let mut trace = Vec::new();
    let mut order: Vec<usize> = (0..queries.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng = derive_rng(config.seed, "pathquery", epoch as u64);
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grads.fill_zero();
            let scale = 1.0 / batch.len() as f64;
            let mut total = 0.0;
            for &i in batch {
                let q = &queries[i];
                let pool = &wrong[&(q.source, q.relations.as_slice())];
                if pool.is_empty() {
                    continue;
                }
                let neg = pool[rng.gen_range(0..pool.len())];
                total += ranking_loss(&params, q, neg, config.variant, scale, Some(&mut grads))?;
            }
            let step = trace.len();
            let mean = total * scale;
            if !mean.is_finite() {
                return Err(TrainError::NonFinite {
                    step,
                    last_good: alloc::boxed::Box::new(params.clone()),
                });
            }
            match state.step(&mut params, &grads) {
                Ok(()) => {}
                Err(NumError::NonFinite(_)) => {
                    return Err(TrainError::NonFinite {
                        step,
                        last_good: alloc::boxed::Box::new(params.clone()),
                    })
                }
                Err(e) => return Err(e.into()),
            }
            trace.push(mean);
        }
    }
    Ok(PathQueryOutcome { params, trace })
}

/// Mean quantile of the true target among every entity that is not an
/// answer of the query.
pub fn evaluate_mq(
    params: &ModelParams,
    kg: &KnowledgeGraph,
    queries: &[PathQuery],
    variant: PathQueryVariant,
) -> Result<Option<f64>, TrainError> {
    let mut qs = Vec::with_capacity(queries.len());
    for q in queries {
        let right = answers(kg, q.source, &q.relations);
        let correct = pathquery_score(params, q.source, &q.relations, q.target, variant)?;
        let mut incorrect = Vec::new();
        for e in (0..kg.num_entities() as u32).map(EntityId) {
            if !right.contains(&e) {
                incorrect.push(pathquery_score(params, q.source, &q.relations, e, variant)?);
            }
        }
        qs.push(QuantileQuery { correct, incorrect });
    }
    Ok(mean_quantile(&qs))
}
