use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{EntityId, KgError, KnowledgeGraph, Path, RelationId, Step, MAX_PATH_LEN};
use crate::numcore::Rng;

pub const DEFAULT_EXPANSION_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct WalkConfig {
    pub max_len: usize,
    pub walks: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            max_len: MAX_PATH_LEN,
            walks: 200,
        }
    }
}

/// Direct edges between `source` and `target` (either direction) whose
/// relation belongs to `blocked` are not traversed.
struct EdgeFilter<'a> {
    source: EntityId,
    target: EntityId,
    blocked: &'a [RelationId],
}

impl EdgeFilter<'_> {
    fn allows(&self, from: EntityId, step: &Step) -> bool {
        if self.blocked.is_empty() {
            return true;
        }
        let direct = (from == self.source && step.entity == self.target)
            || (from == self.target && step.entity == self.source);
        !(direct && self.blocked.iter().any(|b| b.base() == step.relation.base()))
    }
}

fn check_ids(kg: &KnowledgeGraph, ids: [EntityId; 2]) -> Result<(), KgError> {
    for id in ids {
        if id.index() >= kg.num_entities() {
            return Err(KgError::BadId {
                kind: "entity",
                id: id.0,
            });
        }
    }
    Ok(())
}

/// Bounded forward random walks from `source`; each walk that reaches
/// `target` within `max_len` edges yields the path walked so far. Walks
/// that never arrive are discarded. The result is deduplicated and sorted.
pub fn sample_paths(
    kg: &KnowledgeGraph,
    source: EntityId,
    target: EntityId,
    config: WalkConfig,
    rng: &mut Rng,
) -> Result<Vec<Path>, KgError> {
    sample_paths_excluding(kg, source, target, config, &[], rng)
}

pub fn sample_paths_excluding(
    kg: &KnowledgeGraph,
    source: EntityId,
    target: EntityId,
    config: WalkConfig,
    blocked: &[RelationId],
    rng: &mut Rng,
) -> Result<Vec<Path>, KgError> {
    if config.max_len == 0 || config.max_len > MAX_PATH_LEN {
        return Err(KgError::MaxLen(config.max_len));
    }
    check_ids(kg, [source, target])?;
    let filter = EdgeFilter {
        source,
        target,
        blocked,
    };
    let mut found = BTreeSet::new();
    let mut allowed: Vec<Step> = Vec::new();
    let mut steps: Vec<Step> = Vec::with_capacity(config.max_len);
    for _ in 0..config.walks {
        steps.clear();
        let mut at = source;
        for _ in 0..config.max_len {
            allowed.clear();
            allowed.extend(kg.edges(at).iter().filter(|s| filter.allows(at, s)));
            if allowed.is_empty() {
                break;
            }
            let step = allowed[rng.gen_range(0..allowed.len())];
            steps.push(step);
            at = step.entity;
            if at == target {
                found.insert(Path::new(source, steps.clone()));
                break;
            }
        }
    }
    Ok(found.into_iter().collect())
}

/// Every edge sequence of length `1..=max_len` from `source` that reaches
/// `target` for the first time at its last step. This is exactly the set of
/// paths random walks can produce, so it contains every sampled path.
pub fn enumerate_paths(
    kg: &KnowledgeGraph,
    source: EntityId,
    target: EntityId,
    max_len: usize,
    cap: usize,
) -> Result<Vec<Path>, KgError> {
    enumerate_paths_excluding(kg, source, target, max_len, cap, &[])
}

pub fn enumerate_paths_excluding(
    kg: &KnowledgeGraph,
    source: EntityId,
    target: EntityId,
    max_len: usize,
    cap: usize,
    blocked: &[RelationId],
) -> Result<Vec<Path>, KgError> {
    check_ids(kg, [source, target])?;
    let mut out = BTreeSet::new();
    if max_len == 0 {
        return Ok(Vec::new());
    }
    let filter = EdgeFilter {
        source,
        target,
        blocked,
    };
    let mut expansions = 0usize;
    let mut steps = Vec::with_capacity(max_len);
    dfs(
        kg, &filter, source, target, max_len, cap, &mut expansions, &mut steps, &mut out,
    )?;
    Ok(out.into_iter().collect())
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    kg: &KnowledgeGraph,
    filter: &EdgeFilter<'_>,
    at: EntityId,
    target: EntityId,
    max_len: usize,
    cap: usize,
    expansions: &mut usize,
    steps: &mut Vec<Step>,
    out: &mut BTreeSet<Path>,
) -> Result<(), KgError> {
    for step in kg.edges(at) {
        if !filter.allows(at, step) {
            continue;
        }
        *expansions += 1;
        if *expansions > cap {
            return Err(KgError::ExpansionCap { cap });
        }
        steps.push(*step);
        if step.entity == target {
            out.insert(Path::new(filter.source, steps.clone()));
        } else if steps.len() < max_len {
            dfs(kg, filter, step.entity, target, max_len, cap, expansions, steps, out)?;
        }
        steps.pop();
    }
    Ok(())
}
