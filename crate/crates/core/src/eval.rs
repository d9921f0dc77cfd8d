//! Ranking metrics and the harness that ranks candidate pairs with a
//! trained model.
//!
//! Lists are ordered by descending score; equal scores are ordered by
//! ascending candidate id. In the mean quantile a tie with the correct
//! answer does not count as ranked below it.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::kgraph::{EntityId, KnowledgeGraph, RelationId};
use crate::pathmodel::{ModelParams, QueryId};
use crate::pooling::PoolingKind;
use crate::training::{score_pair, LabeledTriple, PathStore, TrainError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedItem {
    pub candidate: u64,
    pub score: f64,
    pub relevant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query: u32,
    items: Vec<RankedItem>,
}

impl RankedList {
    /// Sorts `items` into rank order. NaN scores are treated as −∞.
    pub fn new(query: u32, mut items: Vec<RankedItem>) -> Self {
        for it in &mut items {
            if it.score.is_nan() {
                it.score = f64::NEG_INFINITY;
            }
        }
        items.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.candidate.cmp(&b.candidate))
        });
        Self { query, items }
    }

    pub fn items(&self) -> &[RankedItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn relevant_count(&self) -> usize {
        self.items.iter().filter(|i| i.relevant).count()
    }
}

/// Mean of precision@k over the ranks k of the relevant items; `None`
/// when nothing is relevant.
pub fn average_precision(list: &RankedList) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, item) in list.items.iter().enumerate() {
        if item.relevant {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// Mean AP over the lists where AP is defined.
pub fn mean_average_precision(lists: &[RankedList]) -> Option<f64> {
    let aps: Vec<f64> = lists.iter().filter_map(average_precision).collect();
    (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileQuery {
    pub correct: f64,
    pub incorrect: Vec<f64>,
}

/// Fraction of incorrect candidates scored strictly below the correct one,
/// averaged over queries that have incorrect candidates.
pub fn mean_quantile(queries: &[QuantileQuery]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for q in queries {
        if q.incorrect.is_empty() {
            continue;
        }
        let below = q.incorrect.iter().filter(|&&s| s < q.correct).count();
        sum += below as f64 / q.incorrect.len() as f64;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Candidate id of a pair: `source · |entities| + target`.
pub fn pair_id(kg: &KnowledgeGraph, source: EntityId, target: EntityId) -> u64 {
    source.0 as u64 * kg.num_entities() as u64 + target.0 as u64
}

/// Ranks `(source, target, relevant)` pairs for `query` by pooled score.
/// Pairs without paths score −∞.
pub fn rank_pairs(
    params: &ModelParams,
    kg: &KnowledgeGraph,
    query: QueryId,
    pairs: &[(EntityId, EntityId, bool)],
    store: &mut PathStore,
    pooling: PoolingKind,
) -> Result<RankedList, TrainError> {
    let mut items = Vec::with_capacity(pairs.len());
    for &(s, t, relevant) in pairs {
        let paths = store.paths(kg, s, t)?;
        let score = if paths.is_empty() {
            f64::NEG_INFINITY
        } else {
            score_pair(params, kg, paths, query, pooling)?.pooled
        };
        items.push(RankedItem {
            candidate: pair_id(kg, s, t),
            score,
            relevant,
        });
    }
    Ok(RankedList::new(query.0, items))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationReport {
    pub relation: RelationId,
    pub ap: Option<f64>,
    pub positives: usize,
    pub candidates: usize,
    pub pathless: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub relations: Vec<RelationReport>,
    pub map: Option<f64>,
}

/// One ranked list per query relation over the labeled triples of that
/// relation, and MAP across relations.
pub fn evaluate(
    params: &ModelParams,
    kg: &KnowledgeGraph,
    query_relations: &[RelationId],
    labeled: &[LabeledTriple],
    store: &mut PathStore,
    pooling: PoolingKind,
) -> Result<EvalReport, TrainError> {
    let mut grouped: BTreeMap<RelationId, Vec<(EntityId, EntityId, bool)>> = BTreeMap::new();
    for lt in labeled {
        if !query_relations.contains(&lt.triple.relation) {
            return Err(TrainError::NotAQuery(lt.triple.relation));
        }
        grouped.entry(lt.triple.relation).or_default().push((
            lt.triple.source,
            lt.triple.target,
            lt.label.is_positive(),
        ));
    }
    let mut relations = Vec::new();
    let mut lists = Vec::new();
    for (q, &r) in query_relations.iter().enumerate() {
        let Some(pairs) = grouped.get(&r) else {
            continue;
        };
        let list = rank_pairs(params, kg, QueryId(q as u32), pairs, store, pooling)?;
        relations.push(RelationReport {
            relation: r,
            ap: average_precision(&list),
            positives: list.relevant_count(),
            candidates: list.len(),
            pathless: list
                .items()
                .iter()
                .filter(|i| i.score == f64::NEG_INFINITY)
                .count(),
        });
        lists.push(list);
    }
    Ok(EvalReport {
        map: mean_average_precision(&lists),
        relations,
    })
}
