use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{EntityId, KgError, RelationId, Step, Triple, TypeId, Vocab, INVERSE_PREFIX};

/// Entities keep at most this many types, the most frequent ones in the
/// whole type annotation corpus.
pub const MAX_TYPES_PER_ENTITY: usize = 7;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Distinct forward triples stored.
    pub triples: usize,
    /// Input lines that repeated an already stored triple.
    pub duplicates: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeLoadReport {
    pub unknown_entities: Vec<String>,
    /// Entities that had more than [`MAX_TYPES_PER_ENTITY`] types.
    pub truncated: usize,
}

/// Accumulates triples before the graph is frozen.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    entities: Vocab,
    relations: Vocab,
    forward: BTreeSet<Triple>,
    duplicates: usize,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity(&mut self, name: &str) -> EntityId {
        EntityId(self.entities.intern(name))
    }

    /// Interns `name` and its inverse as an adjacent id pair. Passing an
    /// `_inv:`-prefixed name returns the inverse id of the stripped name.
    pub fn relation(&mut self, name: &str) -> RelationId {
        let (base, inverted) = match name.strip_prefix(INVERSE_PREFIX) {
            Some(stripped) => (stripped, true),
            None => (name, false),
        };
        let id = match self.relations.id(base) {
            Some(id) => RelationId(id),
            None => {
                let id = self.relations.intern(base);
                self.relations.intern(&format!("{INVERSE_PREFIX}{base}"));
                RelationId(id)
            }
        };
        if inverted {
            id.inverse()
        } else {
            id
        }
    }

    /// Adds a triple by name; returns `false` if it was already present.
    pub fn add(&mut self, source: &str, relation: &str, target: &str) -> bool {
        let s = self.entity(source);
        let r = self.relation(relation);
        let t = self.entity(target);
        self.add_ids(s, r, t)
    }

    pub fn add_ids(&mut self, source: EntityId, relation: RelationId, target: EntityId) -> bool {
        let triple = if relation.is_inverse() {
            Triple::new(target, relation.base(), source)
        } else {
            Triple::new(source, relation, target)
        };
        let fresh = self.forward.insert(triple);
        if !fresh {
            self.duplicates += 1;
        }
        fresh
    }

    pub fn build(self) -> KnowledgeGraph {
        let n = self.entities.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut all = BTreeSet::new();
        for &t in &self.forward {
            all.insert(t);
            all.insert(t.inverse());
        }
        for t in &all {
            adjacency[t.source.index()].push(Step {
                relation: t.relation,
                entity: t.target,
            });
        }
        KnowledgeGraph {
            entities: self.entities,
            relations: self.relations,
            types: Vocab::new(),
            forward_count: self.forward.len(),
            triples: all,
            adjacency,
            entity_types: vec![Vec::new(); n],
        }
    }
}

/// Immutable graph with inverse closure and per-entity type lists.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    types: Vocab,
    forward_count: usize,
    triples: BTreeSet<Triple>,
    adjacency: Vec<Vec<Step>>,
    entity_types: Vec<Vec<TypeId>>,
}

impl KnowledgeGraph {
    /// Parses `source<TAB>relation<TAB>target` lines. Blank lines are
    /// ignored; repeated triples are counted and dropped.
    pub fn load_triples<'a, I>(lines: I) -> Result<(Self, LoadReport), KgError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut builder = GraphBuilder::new();
        for (i, raw) in lines.into_iter().enumerate() {
            let line = raw.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
                return Err(KgError::Malformed {
                    line: i + 1,
                    message: format!("expected source<TAB>relation<TAB>target, got {} fields", fields.len()),
                });
            }
            builder.add(fields[0], fields[1], fields[2]);
        }
        let duplicates = builder.duplicates;
        let kg = builder.build();
        let report = LoadReport {
            triples: kg.forward_count,
            duplicates,
        };
        Ok((kg, report))
    }

    /// Parses `entity<TAB>type1,type2,...` lines and attaches the capped type
    /// lists. Unknown entities are reported and skipped.
    pub fn with_entity_types<'a, I>(self, lines: I) -> Result<(Self, TypeLoadReport), KgError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut entries: Vec<(String, Vec<String>)> = Vec::new();
        for (i, raw) in lines.into_iter().enumerate() {
            let line = raw.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let entity = parts.next().unwrap_or_default();
            let types = parts.next().ok_or_else(|| KgError::Malformed {
                line: i + 1,
                message: "expected entity<TAB>types".to_string(),
            })?;
            if entity.is_empty() {
                return Err(KgError::Malformed {
                    line: i + 1,
                    message: "empty entity name".to_string(),
                });
            }
            let list = types
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(ToString::to_string)
                .collect();
            entries.push((entity.to_string(), list));
        }
        Ok(self.with_type_annotations(entries))
    }

    /// Attaches types given as `(entity name, type names)` pairs.
    pub fn with_type_annotations<I, S, T>(mut self, entries: I) -> (Self, TypeLoadReport)
    where
        I: IntoIterator<Item = (S, Vec<T>)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut frequency: BTreeMap<String, usize> = BTreeMap::new();
        let mut per_entity: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (entity, types) in entries {
            let set: BTreeSet<String> = types.iter().map(|t| t.as_ref().to_string()).collect();
            for t in &set {
                *frequency.entry(t.clone()).or_default() += 1;
            }
            per_entity
                .entry(entity.as_ref().to_string())
                .or_default()
                .extend(set);
        }

        let mut report = TypeLoadReport::default();
        let mut kept: Vec<(EntityId, Vec<String>)> = Vec::new();
        let mut retained_types: BTreeSet<String> = BTreeSet::new();
        for (entity, types) in per_entity {
            let Some(id) = self.entities.id(&entity) else {
                report.unknown_entities.push(entity);
                continue;
            };
            let mut ranked: Vec<String> = types.into_iter().collect();
            // Most frequent first; ties go to the lexicographically smaller name.
            ranked.sort_by(|a, b| frequency[b].cmp(&frequency[a]).then_with(|| a.cmp(b)));
            if ranked.len() > MAX_TYPES_PER_ENTITY {
                report.truncated += 1;
                ranked.truncate(MAX_TYPES_PER_ENTITY);
            }
            retained_types.extend(ranked.iter().cloned());
            kept.push((EntityId(id), ranked));
        }

        self.types = Vocab::from_names(&retained_types);
        self.entity_types = vec![Vec::new(); self.entities.len()];
        for (entity, names) in kept {
            let mut ids: Vec<TypeId> = names
                .iter()
                .map(|n| TypeId(self.types.id(n).expect("retained type interned")))
                .collect();
            ids.sort();
            self.entity_types[entity.index()] = ids;
        }
        (self, report)
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn types(&self) -> &Vocab {
        &self.types
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    /// Number of distinct forward (non-synthesized) triples.
    pub fn num_triples(&self) -> usize {
        self.forward_count
    }

    /// Number of directed edges, inverses included.
    pub fn num_edges(&self) -> usize {
        self.triples.len()
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.id(name).map(EntityId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.id(name).map(RelationId)
    }

    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.types.id(name).map(TypeId)
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0).unwrap_or("?")
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        self.relations.name(id.0).unwrap_or("?")
    }

    pub fn type_name(&self, id: TypeId) -> &str {
        self.types.name(id.0).unwrap_or("?")
    }

    pub fn contains(&self, triple: Triple) -> bool {
        self.triples.contains(&triple)
    }

    /// All directed edges in `(source, relation, target)` order.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.triples.iter().copied()
    }

    /// Forward triples only, in sorted order.
    pub fn forward_triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.triples.iter().copied().filter(|t| !t.relation.is_inverse())
    }

    pub fn edges(&self, entity: EntityId) -> &[Step] {
        &self.adjacency[entity.index()]
    }

    pub fn entity_types(&self, entity: EntityId) -> &[TypeId] {
        &self.entity_types[entity.index()]
    }
}
