//! Synthetic knowledge graphs with planted Horn rules.
//!
//! Body relations are scattered at random between typed entities. Each rule
//! `head(x, y) ← b1(x, z1) ∧ b2(z1, z2) ∧ … ∧ bk(z_{k−1}, y)` then
//! materialises its head on every pair joined by a body chain, provided the
//! conditioning holds; a type-conditional rule requires the first
//! intermediate entity `z1` to carry a given type. Each chained pair has its
//! head presence flipped with the rule's noise rate. Head pairs are split
//! into train, dev and test; only train heads enter the returned graph.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::kgraph::{
    EntityId, GraphBuilder, KnowledgeGraph, RelationId, Triple, INVERSE_PREFIX, MAX_PATH_LEN,
};
use crate::numcore::{derive_rng, math, Rng};
use crate::training::{Label, LabeledTriple};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Conditioning {
    Universal,
    /// The first intermediate entity of the chain must carry this type.
    TypeConditional { required_type: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRule {
    pub head: String,
    /// Relation names; an `_inv:` prefix traverses the relation backwards.
    pub body: Vec<String>,
    pub conditioning: Conditioning,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_entities: usize,
    pub n_types: usize,
    pub max_types_per_entity: usize,
    /// Body relations are named `rel0`, `rel1`, ….
    pub n_body_relations: usize,
    pub edges_per_relation: usize,
    pub rules: Vec<PlantedRule>,
    /// Train, dev and test fractions of the head pairs.
    pub split: [f64; 3],
    /// Random corrupted negatives per held-out positive.
    pub negatives_per_positive: usize,
    /// Also label chained pairs whose head is absent as negatives.
    pub near_miss_negatives: bool,
    /// Held-out negatives are reachable from their source within this many
    /// hops of the training graph.
    pub max_hops: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_entities: 200,
            n_types: 8,
            max_types_per_entity: 3,
            n_body_relations: 6,
            edges_per_relation: 200,
            rules: vec![
                PlantedRule {
                    head: String::from("head0"),
                    body: vec![String::from("rel0"), String::from("rel1")],
                    conditioning: Conditioning::Universal,
                    noise: 0.05,
                },
                PlantedRule {
                    head: String::from("head1"),
                    body: vec![String::from("rel2"), String::from("rel3")],
                    conditioning: Conditioning::TypeConditional {
                        required_type: String::from("type0"),
                    },
                    noise: 0.05,
                },
            ],
            split: [0.7, 0.1, 0.2],
            negatives_per_positive: 4,
            near_miss_negatives: false,
            max_hops: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
    #[error("rule for `{head}` produced no head triples")]
    Unsatisfiable { head: String },
}

#[derive(Debug, Clone)]
pub struct SynthData {
    /// Body edges, train-split heads and entity types.
    pub kg: KnowledgeGraph,
    /// Head relations in rule order.
    pub heads: Vec<RelationId>,
    pub train: Vec<LabeledTriple>,
    pub dev: Vec<LabeledTriple>,
    pub test: Vec<LabeledTriple>,
}

pub fn entity_name(i: usize) -> String {
    format!("e{i:03}")
}

pub fn type_name(i: usize) -> String {
    format!("type{i}")
}

pub fn body_relation_name(i: usize) -> String {
    format!("rel{i}")
}

/// Parsed body step: relation index and direction.
#[derive(Debug, Clone, Copy)]
struct BodyStep {
    relation: usize,
    inverse: bool,
}

struct Checked {
    bodies: Vec<Vec<BodyStep>>,
    required: Vec<Option<usize>>,
}

fn invalid(msg: String) -> SynthError {
    SynthError::Invalid(msg)
}

fn check(spec: &SynthSpec) -> Result<Checked, SynthError> {
    if spec.n_entities < 20 {
        return Err(invalid(format!("n_entities must be at least 20, got {}", spec.n_entities)));
    }
    if spec.n_types == 0 || spec.max_types_per_entity == 0 {
        return Err(invalid(String::from("n_types and max_types_per_entity must be positive")));
    }
    if spec.n_body_relations == 0 {
        return Err(invalid(String::from("n_body_relations must be positive")));
    }
    if spec.rules.is_empty() {
        return Err(invalid(String::from("at least one rule is required")));
    }
    if spec.split.iter().any(|f| !(0.0..=1.0).contains(f))
        || (spec.split.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(invalid(String::from("split fractions must be in [0, 1] and sum to 1")));
    }
    if spec.max_hops == 0 || spec.max_hops > MAX_PATH_LEN {
        return Err(invalid(format!("max_hops must be in 1..={MAX_PATH_LEN}")));
    }
    let body_names: Vec<String> = (0..spec.n_body_relations).map(body_relation_name).collect();
    let mut heads = BTreeSet::new();
    let mut bodies = Vec::new();
    let mut required = Vec::new();
    for rule in &spec.rules {
        if body_names.contains(&rule.head) || rule.head.starts_with(INVERSE_PREFIX) {
            return Err(invalid(format!("head `{}` clashes with a body relation", rule.head)));
        }
        if !heads.insert(rule.head.clone()) {
            return Err(invalid(format!("head `{}` appears in two rules", rule.head)));
        }
        if rule.body.is_empty() || rule.body.len() > 4 {
            return Err(invalid(format!("body of `{}` must have 1 to 4 relations", rule.head)));
        }
        if !(0.0..1.0).contains(&rule.noise) {
            return Err(invalid(format!("noise of `{}` must be in [0, 1)", rule.head)));
        }
        let mut steps = Vec::new();
        for name in &rule.body {
            let (base, inverse) = match name.strip_prefix(INVERSE_PREFIX) {
                Some(b) => (b, true),
                None => (name.as_str(), false),
            };
            let relation = body_names.iter().position(|n| n == base).ok_or_else(|| {
                invalid(format!("body relation `{name}` of `{}` is not a body relation", rule.head))
            })?;
            steps.push(BodyStep { relation, inverse });
        }
        bodies.push(steps);
        required.push(match &rule.conditioning {
            Conditioning::Universal => None,
            Conditioning::TypeConditional { required_type } => {
                if rule.body.len() < 2 {
                    return Err(invalid(format!(
                        "type-conditional rule `{}` needs an intermediate entity",
                        rule.head
                    )));
                }
                let t = (0..spec.n_types)
                    .position(|i| type_name(i) == *required_type)
                    .ok_or_else(|| invalid(format!("unknown type `{required_type}`")))?;
                Some(t)
            }
        });
    }
    Ok(Checked { bodies, required })
}

/// Adjacency of one body relation in both directions.
struct Adjacency {
    forward: Vec<Vec<usize>>,
    backward: Vec<Vec<usize>>,
}

/// For every source, the chain endpoints and whether some chain reaching
/// that endpoint passed a first intermediate carrying `required`.
fn chains(
    n: usize,
    adj: &[Adjacency],
    body: &[BodyStep],
    types: &[Vec<usize>],
    required: Option<usize>,
) -> BTreeMap<(usize, usize), bool> {
    let mut out = BTreeMap::new();
    for s in 0..n {
        let mut frontier: BTreeMap<usize, bool> = BTreeMap::new();
        frontier.insert(s, false);
        for (k, step) in body.iter().enumerate() {
            let table = if step.inverse {
                &adj[step.relation].backward
            } else {
                &adj[step.relation].forward
            };
            let mut next: BTreeMap<usize, bool> = BTreeMap::new();
            for (&e, &ok) in &frontier {
                for &f in &table[e] {
                    let ok = if k == 0 {
                        required.is_none_or(|t| types[f].contains(&t))
                    } else {
                        ok
                    };
                    let slot = next.entry(f).or_insert(false);
                    *slot |= ok;
                }
            }
            frontier = next;
        }
        for (t, ok) in frontier {
            if t != s {
                out.insert((s, t), ok);
            }
        }
    }
    out
}

/// Entities within `hops` undirected steps of `source`.
fn within_hops(kg: &KnowledgeGraph, source: EntityId, hops: usize) -> BTreeSet<EntityId> {
    let mut seen = BTreeSet::new();
    seen.insert(source);
    let mut frontier = vec![source];
    for _ in 0..hops {
        let mut next = Vec::new();
        for e in frontier {
            for step in kg.edges(e) {
                if seen.insert(step.entity) {
                    next.push(step.entity);
                }
            }
        }
        frontier = next;
    }
    seen
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Split {
    Train,
    Dev,
    Test,
}

fn draw_split(rng: &mut Rng, split: [f64; 3]) -> Split {
    let u: f64 = rng.gen();
    if u < split[0] {
        Split::Train
    } else if u < split[0] + split[1] {
        Split::Dev
    } else {
        Split::Test
    }
}

pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SynthData, SynthError> {
    let checked = check(spec)?;
    let n = spec.n_entities;
    let mut rng = derive_rng(seed, "synth", 0);

    let types: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=spec.max_types_per_entity.min(spec.n_types));
            let mut ts = rand::seq::index::sample(&mut rng, spec.n_types, k).into_vec();
            ts.sort_unstable();
            ts
        })
        .collect();

    let mut body_edges: Vec<BTreeSet<(usize, usize)>> = Vec::new();
    for _ in 0..spec.n_body_relations {
        let mut edges = BTreeSet::new();
        for _ in 0..spec.edges_per_relation {
            let s = rng.gen_range(0..n);
            let t = rng.gen_range(0..n);
            if s != t {
                edges.insert((s, t));
            }
        }
        body_edges.push(edges);
    }
    let adj: Vec<Adjacency> = body_edges
        .iter()
        .map(|edges| {
            let mut a = Adjacency {
                forward: vec![Vec::new(); n],
                backward: vec![Vec::new(); n],
            };
            for &(s, t) in edges {
                a.forward[s].push(t);
                a.backward[t].push(s);
            }
            a
        })
        .collect();

    // Per rule: every chained pair and whether its head is present.
    let mut heads: Vec<BTreeMap<(usize, usize), bool>> = Vec::new();
    for (i, rule) in spec.rules.iter().enumerate() {
        let chained = chains(n, &adj, &checked.bodies[i], &types, checked.required[i]);
        let mut present = BTreeMap::new();
        for (pair, holds) in chained {
            let flip = rng.gen::<f64>() < rule.noise;
            present.insert(pair, holds != flip);
        }
        if !present.values().any(|&p| p) {
            return Err(SynthError::Unsatisfiable {
                head: rule.head.clone(),
            });
        }
        heads.push(present);
    }

    let mut head_pairs: Vec<(usize, usize)> = heads
        .iter()
        .flat_map(|h| h.iter().filter(|(_, &p)| p).map(|(&k, _)| k))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    head_pairs.shuffle(&mut rng);
    let n_pairs = head_pairs.len();
    let n_train = math::round(spec.split[0] * n_pairs as f64) as usize;
    let n_dev = (math::round(spec.split[1] * n_pairs as f64) as usize).min(n_pairs - n_train);
    let mut split_of: BTreeMap<(usize, usize), Split> = BTreeMap::new();
    for (i, &pair) in head_pairs.iter().enumerate() {
        let s = if i < n_train {
            Split::Train
        } else if i < n_train + n_dev {
            Split::Dev
        } else {
            Split::Test
        };
        split_of.insert(pair, s);
    }

    let mut b = GraphBuilder::new();
    let entity_ids: Vec<EntityId> = (0..n).map(|i| b.entity(&entity_name(i))).collect();
    let body_ids: Vec<RelationId> = (0..spec.n_body_relations)
        .map(|i| b.relation(&body_relation_name(i)))
        .collect();
    let head_ids: Vec<RelationId> = spec.rules.iter().map(|r| b.relation(&r.head)).collect();
    for (r, edges) in body_edges.iter().enumerate() {
        for &(s, t) in edges {
            b.add_ids(entity_ids[s], body_ids[r], entity_ids[t]);
        }
    }
    let mut held_out: [Vec<LabeledTriple>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let slot = |s: Split| match s {
        Split::Train => 0,
        Split::Dev => 1,
        Split::Test => 2,
    };
    for (h, present) in heads.iter().enumerate() {
        for (&(s, t), &p) in present {
            if !p {
                continue;
            }
            let triple = Triple::new(entity_ids[s], head_ids[h], entity_ids[t]);
            let split = split_of[&(s, t)];
            if split == Split::Train {
                b.add_ids(triple.source, triple.relation, triple.target);
            }
            held_out[slot(split)].push(LabeledTriple::new(triple, Label::Positive));
        }
    }
    let annotations: Vec<(String, Vec<String>)> = (0..n)
        .map(|e| (entity_name(e), types[e].iter().map(|&t| type_name(t)).collect()))
        .collect();
    let (kg, _) = b.build().with_type_annotations(annotations);

    if spec.near_miss_negatives {
        for (h, present) in heads.iter().enumerate() {
            for (&(s, t), &p) in present {
                if p {
                    continue;
                }
                let split = match split_of.get(&(s, t)) {
                    Some(&sp) => sp,
                    None => draw_split(&mut rng, spec.split),
                };
                let triple = Triple::new(entity_ids[s], head_ids[h], entity_ids[t]);
                held_out[slot(split)].push(LabeledTriple::new(triple, Label::Negative));
            }
        }
    }

    // Random corruptions for held-out positives: type-compatible, never a
    // head pair, reachable in the training graph.
    let all_head_pairs: BTreeSet<(usize, usize)> = head_pairs.iter().copied().collect();
    for part in [1, 2] {
        let positives: Vec<Triple> = held_out[part]
            .iter()
            .filter(|lt| lt.label.is_positive())
            .map(|lt| lt.triple)
            .collect();
        let mut negatives = BTreeSet::new();
        for pos in positives {
            let reach = within_hops(&kg, pos.source, spec.max_hops);
            let t_types = &types[pos.target.index()];
            let candidates: Vec<EntityId> = reach
                .iter()
                .copied()
                .filter(|&c| {
                    c != pos.target
                        && c != pos.source
                        && !all_head_pairs.contains(&(pos.source.index(), c.index()))
                        && types[c.index()].iter().any(|t| t_types.contains(t))
                })
                .collect();
            let chosen: Vec<&EntityId> = candidates
                .choose_multiple(&mut rng, spec.negatives_per_positive)
                .collect();
            for &c in chosen {
                negatives.insert(Triple::new(pos.source, pos.relation, c));
            }
        }
        let already: BTreeSet<Triple> = held_out[part].iter().map(|lt| lt.triple).collect();
        for t in negatives {
            if !already.contains(&t) {
                held_out[part].push(LabeledTriple::new(t, Label::Negative));
            }
        }
    }

    let [mut train, mut dev, mut test] = held_out;
    for part in [&mut train, &mut dev, &mut test] {
        part.sort();
        part.dedup();
    }
    Ok(SynthData {
        kg,
        heads: head_ids,
        train,
        dev,
        test,
    })
}

/// Uniformly random directed graph with relations `rel0..` and no types.
pub fn random_graph(
    n_entities: usize,
    n_relations: usize,
    edges_per_relation: usize,
    seed: u64,
) -> KnowledgeGraph {
    let mut rng = derive_rng(seed, "random_graph", 0);
    let mut b = GraphBuilder::new();
    let entities: Vec<EntityId> = (0..n_entities).map(|i| b.entity(&entity_name(i))).collect();
    let relations: Vec<RelationId> = (0..n_relations)
        .map(|i| b.relation(&body_relation_name(i)))
        .collect();
    if n_entities > 1 {
        for &r in &relations {
            for _ in 0..edges_per_relation {
                let s = rng.gen_range(0..n_entities);
                let t = rng.gen_range(0..n_entities);
                if s != t {
                    b.add_ids(entities[s], r, entities[t]);
                }
            }
        }
    }
    b.build()
}
