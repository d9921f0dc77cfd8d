use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::kgraph::{
    sample_paths_excluding, EntityId, KgError, KnowledgeGraph, Path, RelationId, Triple, TypeId,
    WalkConfig,
};
use crate::numcore::{derive_rng, math, Rng};
use crate::pathmodel::QueryId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub label: Label,
}

impl LabeledTriple {
    pub fn new(triple: Triple, label: Label) -> Self {
        Self { triple, label }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainInstance {
    pub source: EntityId,
    pub target: EntityId,
    pub relation: RelationId,
    pub query: QueryId,
    pub label: Label,
    /// A positive and the negatives drawn for it share a group.
    pub group: usize,
    pub paths: Vec<Path>,
}

/// Path sets per entity pair, sampled on first request.
///
/// Direct edges between the pair whose relation is one of `blocked` are
/// never walked, so a pair's own label cannot leak into its paths. Each
/// pair has its own random stream, so the result does not depend on the
/// order in which pairs are requested.
#[derive(Debug, Clone)]
pub struct PathStore {
    walk: WalkConfig,
    seed: u64,
    blocked: Vec<RelationId>,
    cache: BTreeMap<(EntityId, EntityId), Vec<Path>>,
}

impl PathStore {
    pub fn new(walk: WalkConfig, seed: u64, blocked: Vec<RelationId>) -> Self {
        Self {
            walk,
            seed,
            blocked,
            cache: BTreeMap::new(),
        }
    }

    pub fn walk_config(&self) -> WalkConfig {
        self.walk
    }

    pub fn blocked(&self) -> &[RelationId] {
        &self.blocked
    }

    /// Registers precomputed paths for a pair, replacing anything cached.
    pub fn insert(&mut self, source: EntityId, target: EntityId, paths: Vec<Path>) {
        self.cache.insert((source, target), paths);
    }

    pub fn get(&self, source: EntityId, target: EntityId) -> Option<&[Path]> {
        self.cache.get(&(source, target)).map(Vec::as_slice)
    }

    pub fn paths(
        &mut self,
        kg: &KnowledgeGraph,
        source: EntityId,
        target: EntityId,
    ) -> Result<&[Path], KgError> {
        if !self.cache.contains_key(&(source, target)) {
            let item = ((source.0 as u64) << 32) | target.0 as u64;
            let mut rng = derive_rng(self.seed, "paths", item);
            let paths =
                sample_paths_excluding(kg, source, target, self.walk, &self.blocked, &mut rng)?;
            self.cache.insert((source, target), paths);
        }
        Ok(&self.cache[&(source, target)])
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((EntityId, EntityId), &[Path])> + '_ {
        self.cache.iter().map(|(&k, v)| (k, v.as_slice()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub negatives_per_positive: usize,
    /// Draws per negative slot before the slot is given up.
    pub max_attempts: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            negatives_per_positive: 4,
            max_attempts: 32,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub positives: usize,
    pub negatives: usize,
    pub pathless_positives: usize,
    pub pathless_negatives: usize,
    /// Negative slots for which no usable corruption was found.
    pub dropped_negative_slots: usize,
    /// Query relations left without a single positive instance.
    pub relations_without_positives: Vec<RelationId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub query_relations: Vec<RelationId>,
    pub instances: Vec<TrainInstance>,
    pub stats: DatasetStats,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn query_id(&self, relation: RelationId) -> Option<QueryId> {
        self.query_relations
            .iter()
            .position(|&r| r == relation)
            .map(|i| QueryId(i as u32))
    }
}

fn query_map(
    kg: &KnowledgeGraph,
    query_relations: &[RelationId],
) -> Result<BTreeMap<RelationId, QueryId>, TrainError> {
    let mut map = BTreeMap::new();
    for (i, &r) in query_relations.iter().enumerate() {
        if r.index() >= kg.num_relations() || r.is_inverse() {
            return Err(KgError::BadId {
                kind: "query relation",
                id: r.0,
            }
            .into());
        }
        if map.insert(r, QueryId(i as u32)).is_some() {
            return Err(TrainError::Config("duplicate query relation"));
        }
    }
    Ok(map)
}

/// Positives are the observed triples of every query relation plus the
/// positive `extra` triples. Each positive with at least one path gets up to
/// `negatives_per_positive` negatives made by replacing its target with an
/// entity sharing a type with it (any entity when the target is untyped),
/// other than the source, such that the corrupted triple is unobserved and
/// its pair has a path.
/// Negative `extra` triples are added as they are.
pub fn build_dataset(
    kg: &KnowledgeGraph,
    query_relations: &[RelationId],
    extra: &[LabeledTriple],
    config: DatasetConfig,
    store: &mut PathStore,
    rng: &mut Rng,
) -> Result<Dataset, TrainError> {
    if config.negatives_per_positive == 0 {
        return Err(TrainError::Config("negatives_per_positive must be at least 1"));
    }
    let queries = query_map(kg, query_relations)?;
    let mut positives: BTreeSet<Triple> = kg
        .forward_triples()
        .filter(|t| queries.contains_key(&t.relation))
        .collect();
    let mut extra_negatives = BTreeSet::new();
    for lt in extra {
        if !queries.contains_key(&lt.triple.relation) {
            return Err(TrainError::NotAQuery(lt.triple.relation));
        }
        match lt.label {
            Label::Positive => {
                positives.insert(lt.triple);
            }
            Label::Negative => {
                extra_negatives.insert(lt.triple);
            }
        }
    }

    let mut by_type: BTreeMap<TypeId, Vec<EntityId>> = BTreeMap::new();
    for e in 0..kg.num_entities() as u32 {
        for &t in kg.entity_types(EntityId(e)) {
            by_type.entry(t).or_default().push(EntityId(e));
        }
    }
    let all: Vec<EntityId> = (0..kg.num_entities() as u32).map(EntityId).collect();

    let mut stats = DatasetStats::default();
    let mut per_relation: BTreeMap<RelationId, usize> = BTreeMap::new();
    let mut instances = Vec::new();
    let mut group = 0;
    for &pos in &positives {
        let query = queries[&pos.relation];
        let paths = store.paths(kg, pos.source, pos.target)?.to_vec();
        if paths.is_empty() {
            stats.pathless_positives += 1;
            continue;
        }
        instances.push(TrainInstance {
            source: pos.source,
            target: pos.target,
            relation: pos.relation,
            query,
            label: Label::Positive,
            group,
            paths,
        });
        stats.positives += 1;
        *per_relation.entry(pos.relation).or_default() += 1;

        let mut pool: BTreeSet<EntityId> = BTreeSet::new();
        for t in kg.entity_types(pos.target) {
            pool.extend(by_type[t].iter().copied());
        }
        pool.remove(&pos.target);
        pool.remove(&pos.source);
        let pool: Vec<EntityId> = if pool.is_empty() {
            all.iter()
                .copied()
                .filter(|&e| e != pos.target && e != pos.source)
                .collect()
        } else {
            pool.into_iter().collect()
        };

        let mut used = BTreeSet::new();
        for _ in 0..config.negatives_per_positive {
            let mut chosen = None;
            for _ in 0..config.max_attempts {
                if pool.is_empty() {
                    break;
                }
                let c = pool[rng.gen_range(0..pool.len())];
                let corrupted = Triple::new(pos.source, pos.relation, c);
                if used.contains(&c) || kg.contains(corrupted) || positives.contains(&corrupted)
                {
                    continue;
                }
                let paths = store.paths(kg, pos.source, c)?;
                if paths.is_empty() {
                    continue;
                }
                chosen = Some((c, paths.to_vec()));
                break;
            }
            match chosen {
                Some((c, paths)) => {
                    used.insert(c);
                    instances.push(TrainInstance {
                        source: pos.source,
                        target: c,
                        relation: pos.relation,
                        query,
                        label: Label::Negative,
                        group,
                        paths,
                    });
                    stats.negatives += 1;
                }
                None => stats.dropped_negative_slots += 1,
            }
        }
        group += 1;
    }

    for &neg in &extra_negatives {
        let paths = store.paths(kg, neg.source, neg.target)?.to_vec();
        if paths.is_empty() {
            stats.pathless_negatives += 1;
            continue;
        }
        instances.push(TrainInstance {
            source: neg.source,
            target: neg.target,
            relation: neg.relation,
            query: queries[&neg.relation],
            label: Label::Negative,
            group,
            paths,
        });
        stats.negatives += 1;
        group += 1;
    }

    stats.relations_without_positives = query_relations
        .iter()
        .copied()
        .filter(|r| !per_relation.contains_key(r))
        .collect();
    Ok(Dataset {
        query_relations: query_relations.to_vec(),
        instances,
        stats,
    })
}

/// Keeps a `fraction` of the groups of every query relation (at least one
/// each), with all of their instances.
pub fn subsample(dataset: &Dataset, fraction: f64, rng: &mut Rng) -> Dataset {
    let mut groups: BTreeMap<QueryId, BTreeSet<usize>> = BTreeMap::new();
    for inst in &dataset.instances {
        groups.entry(inst.query).or_default().insert(inst.group);
    }
    let mut kept = BTreeSet::new();
    for ids in groups.values() {
        let mut ids: Vec<usize> = ids.iter().copied().collect();
        ids.shuffle(rng);
        let n = (math::ceil(fraction * ids.len() as f64) as usize).clamp(1, ids.len());
        kept.extend(ids.into_iter().take(n));
    }
    let instances: Vec<TrainInstance> = dataset
        .instances
        .iter()
        .filter(|i| kept.contains(&i.group))
        .cloned()
        .collect();
    let mut stats = dataset.stats.clone();
    stats.positives = instances.iter().filter(|i| i.label.is_positive()).count();
    stats.negatives = instances.len() - stats.positives;
    Dataset {
        query_relations: dataset.query_relations.clone(),
        instances,
        stats,
    }
}
