//! Tab-separated text formats.
//!
//! | file          | line                                     |
//! |---------------|------------------------------------------|
//! | triples.tsv   | `source\trelation\ttarget`               |
//! | types.tsv     | `entity\ttype1,type2,...`                |
//! | labeled split | `source\trelation\ttarget\tlabel` (1/0)  |
//! | pairs         | `source\ttarget`, or any labeled line    |
//! | paths.tsv     | `source\ttarget\tr1,e1,r2,...,rk`        |
//! | path queries  | `source\tr1,r2,...\ttarget`              |
//!
//! Blank lines are ignored everywhere. Relation names may carry the `_inv:`
//! prefix to denote a reversed edge.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path as FsPath, PathBuf};

use chainkb_core::kgraph::{KgError, LoadReport, Step, TypeLoadReport, MAX_PATH_LEN};
use chainkb_core::pathquery::PathQuery;
use chainkb_core::training::{Label, LabeledTriple};
use chainkb_core::{EntityId, KnowledgeGraph, Path, RelationId, Triple};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Graph { path: PathBuf, source: KgError },
}

pub fn read_file(path: &FsPath) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &FsPath, contents: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path, contents).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads triples and, if given, entity types.
pub fn load_graph(
    triples: &FsPath,
    types: Option<&FsPath>,
) -> Result<(KnowledgeGraph, LoadReport, Option<TypeLoadReport>), FormatError> {
    let text = read_file(triples)?;
    let (kg, report) =
        KnowledgeGraph::load_triples(text.lines()).map_err(|source| FormatError::Graph {
            path: triples.to_path_buf(),
            source,
        })?;
    match types {
        None => Ok((kg, report, None)),
        Some(p) => {
            let text = read_file(p)?;
            let (kg, type_report) =
                kg.with_entity_types(text.lines())
                    .map_err(|source| FormatError::Graph {
                        path: p.to_path_buf(),
                        source,
                    })?;
            Ok((kg, report, Some(type_report)))
        }
    }
}

/// Forward triples, one per line, in id order.
pub fn format_triples(kg: &KnowledgeGraph) -> String {
    let mut out = String::new();
    for t in kg.forward_triples() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            kg.entity_name(t.source),
            kg.relation_name(t.relation),
            kg.entity_name(t.target)
        );
    }
    out
}

/// Typed entities only, in id order.
pub fn format_types(kg: &KnowledgeGraph) -> String {
    let mut out = String::new();
    for e in (0..kg.num_entities() as u32).map(EntityId) {
        let types = kg.entity_types(e);
        if types.is_empty() {
            continue;
        }
        let names: Vec<&str> = types.iter().map(|&t| kg.type_name(t)).collect();
        let _ = writeln!(out, "{}\t{}", kg.entity_name(e), names.join(","));
    }
    out
}

pub fn format_labeled(kg: &KnowledgeGraph, triples: &[LabeledTriple]) -> String {
    let mut out = String::new();
    for lt in triples {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            kg.entity_name(lt.triple.source),
            kg.relation_name(lt.triple.relation),
            kg.entity_name(lt.triple.target),
            u8::from(lt.label.is_positive())
        );
    }
    out
}

struct Lines<'a> {
    path: &'a FsPath,
    kg: &'a KnowledgeGraph,
}

impl Lines<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> FormatError {
        FormatError::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn entity(&self, line: usize, name: &str) -> Result<EntityId, FormatError> {
        self.kg
            .entity_id(name)
            .ok_or_else(|| self.err(line, format!("unknown entity `{name}`")))
    }

    fn relation(&self, line: usize, name: &str) -> Result<RelationId, FormatError> {
        self.kg
            .relation_id(name)
            .ok_or_else(|| self.err(line, format!("unknown relation `{name}`")))
    }

    fn label(&self, line: usize, field: &str) -> Result<Label, FormatError> {
        match field {
            "1" | "+" | "true" => Ok(Label::Positive),
            "0" | "-" | "false" => Ok(Label::Negative),
            other => Err(self.err(line, format!("bad label `{other}` (expected 1 or 0)"))),
        }
    }
}

/// Non-blank lines with 1-based numbers and fields split on tabs.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.trim_end_matches('\r');
        (!line.trim().is_empty()).then(|| (i + 1, line.split('\t').collect()))
    })
}

/// Labeled triples; a line without a label column is positive.
pub fn parse_labeled(
    kg: &KnowledgeGraph,
    path: &FsPath,
    text: &str,
) -> Result<Vec<LabeledTriple>, FormatError> {
    let ctx = Lines { path, kg };
    let mut out = Vec::new();
    for (n, f) in records(text) {
        let label = match f.len() {
            3 => Label::Positive,
            4 => ctx.label(n, f[3])?,
            k => return Err(ctx.err(n, format!("expected 3 or 4 fields, got {k}"))),
        };
        let triple = Triple::new(
            ctx.entity(n, f[0])?,
            ctx.relation(n, f[1])?,
            ctx.entity(n, f[2])?,
        );
        out.push(LabeledTriple::new(triple, label));
    }
    Ok(out)
}

/// Entity pairs from `source\ttarget` lines or from labeled lines.
pub fn parse_pairs(
    kg: &KnowledgeGraph,
    path: &FsPath,
    text: &str,
) -> Result<Vec<(EntityId, EntityId)>, FormatError> {
    let ctx = Lines { path, kg };
    let mut out = Vec::new();
    for (n, f) in records(text) {
        let (s, t) = match f.len() {
            2 => (f[0], f[1]),
            3 | 4 => (f[0], f[2]),
            k => return Err(ctx.err(n, format!("expected 2 to 4 fields, got {k}"))),
        };
        out.push((ctx.entity(n, s)?, ctx.entity(n, t)?));
    }
    Ok(out)
}

pub fn format_paths<'a, I>(kg: &KnowledgeGraph, sets: I) -> String
where
    I: IntoIterator<Item = ((EntityId, EntityId), &'a [Path])>,
{
    let mut out = String::new();
    for ((s, t), paths) in sets {
        for p in paths {
            let mut fields = Vec::with_capacity(2 * p.len());
            for (i, step) in p.steps.iter().enumerate() {
                fields.push(kg.relation_name(step.relation));
                if i + 1 < p.len() {
                    fields.push(kg.entity_name(step.entity));
                }
            }
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                kg.entity_name(s),
                kg.entity_name(t),
                fields.join(",")
            );
        }
    }
    out
}

/// Path sets keyed by pair. Every path is checked against the graph.
pub fn parse_paths(
    kg: &KnowledgeGraph,
    path: &FsPath,
    text: &str,
) -> Result<BTreeMap<(EntityId, EntityId), Vec<Path>>, FormatError> {
    let ctx = Lines { path, kg };
    let mut out: BTreeMap<(EntityId, EntityId), Vec<Path>> = BTreeMap::new();
    for (n, f) in records(text) {
        if f.len() != 3 {
            return Err(ctx.err(n, format!("expected 3 fields, got {}", f.len())));
        }
        let s = ctx.entity(n, f[0])?;
        let t = ctx.entity(n, f[1])?;
        let items: Vec<&str> = f[2].split(',').collect();
        if items.len().is_multiple_of(2) {
            return Err(ctx.err(n, "path must alternate relations and entities, ending on a relation"));
        }
        let mut steps = Vec::with_capacity(items.len() / 2 + 1);
        for pair in items.chunks(2) {
            let relation = ctx.relation(n, pair[0])?;
            let entity = match pair.get(1) {
                Some(e) => ctx.entity(n, e)?,
                None => t,
            };
            steps.push(Step { relation, entity });
        }
        let p = Path::new(s, steps);
        p.validate(kg, t, MAX_PATH_LEN)
            .map_err(|e| ctx.err(n, e.to_string()))?;
        let set = out.entry((s, t)).or_default();
        if !set.contains(&p) {
            set.push(p);
        }
    }
    for set in out.values_mut() {
        set.sort();
    }
    Ok(out)
}

pub fn format_queries(kg: &KnowledgeGraph, queries: &[PathQuery]) -> String {
    let mut out = String::new();
    for q in queries {
        let rels: Vec<&str> = q.relations.iter().map(|&r| kg.relation_name(r)).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            kg.entity_name(q.source),
            rels.join(","),
            kg.entity_name(q.target)
        );
    }
    out
}

pub fn parse_queries(
    kg: &KnowledgeGraph,
    path: &FsPath,
    text: &str,
) -> Result<Vec<PathQuery>, FormatError> {
    let ctx = Lines { path, kg };
    let mut out = Vec::new();
    for (n, f) in records(text) {
        if f.len() != 3 {
            return Err(ctx.err(n, format!("expected 3 fields, got {}", f.len())));
        }
        let relations = f[1]
            .split(',')
            .map(|r| ctx.relation(n, r))
            .collect::<Result<Vec<_>, _>>()?;
        if relations.len() > MAX_PATH_LEN {
            return Err(ctx.err(n, format!("query longer than {MAX_PATH_LEN} relations")));
        }
        out.push(PathQuery {
            source: ctx.entity(n, f[0])?,
            relations,
            target: ctx.entity(n, f[2])?,
        });
    }
    Ok(out)
}

/// Resolves a comma-separated list of forward relation names.
pub fn parse_relation_list(kg: &KnowledgeGraph, list: &str) -> Result<Vec<RelationId>, String> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|n| !n.is_empty()) {
        let r = kg
            .relation_id(name)
            .ok_or_else(|| format!("unknown relation `{name}`"))?;
        if r.is_inverse() {
            return Err(format!("`{name}` is an inverse relation"));
        }
        if !out.contains(&r) {
            out.push(r);
        }
    }
    Ok(out)
}

/// Drops paths that walk a direct edge between the pair's endpoints under
/// one of `blocked`.
pub fn strip_blocked(paths: &mut Vec<Path>, source: EntityId, target: EntityId, blocked: &[RelationId]) {
    paths.retain(|p| {
        let mut at = p.source;
        p.steps.iter().all(|step| {
            let direct = (at == source && step.entity == target) || (at == target && step.entity == source);
            at = step.entity;
            !(direct && blocked.iter().any(|b| b.base() == step.relation.base()))
        })
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use chainkb_core::kgraph::GraphBuilder;

    fn graph() -> KnowledgeGraph {
        let mut b = GraphBuilder::new();
        b.add("a", "r", "b");
        b.add("b", "s", "c");
        b.add("a", "q", "c");
        b.build()
    }

    #[test]
    fn paths_round_trip() {
        let kg = graph();
        let text = "a\tc\tr,b,s\na\tc\t_inv:r,b,s\na\tc\tq\n";
        let p = FsPath::new("p.tsv");
        assert!(parse_paths(&kg, p, text).is_err());
        let text = "a\tc\tr,b,s\na\tc\tq\n\n";
        let parsed = parse_paths(&kg, p, text).unwrap();
        let (a, c) = (kg.entity_id("a").unwrap(), kg.entity_id("c").unwrap());
        assert_eq!(parsed[&(a, c)].len(), 2);
        let again = format_paths(&kg, parsed.iter().map(|(k, v)| (*k, v.as_slice())));
        assert_eq!(parse_paths(&kg, p, &again).unwrap(), parsed);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let kg = graph();
        let err = parse_labeled(&kg, FsPath::new("x"), "a\tr\tb\t1\n\na\tr\tzz\t0\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(parse_labeled(&kg, FsPath::new("x"), "a\tr\tb\t2\n").is_err());
    }

    #[test]
    fn blocked_direct_edges_are_stripped() {
        let kg = graph();
        let (a, c) = (kg.entity_id("a").unwrap(), kg.entity_id("c").unwrap());
        let parsed = parse_paths(&kg, FsPath::new("p"), "a\tc\tr,b,s\na\tc\tq\n").unwrap();
        let mut paths = parsed[&(a, c)].clone();
        strip_blocked(&mut paths, a, c, &[kg.relation_id("q").unwrap()]);
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].len(), 2);
    }

    #[test]
    fn queries_round_trip() {
        let kg = graph();
        let qs = parse_queries(&kg, FsPath::new("q"), "a\tr,s\tc\nc\t_inv:q\ta\n").unwrap();
        assert_eq!(qs[1].relations, vec![kg.relation_id("q").unwrap().inverse()]);
        assert_eq!(parse_queries(&kg, FsPath::new("q"), &format_queries(&kg, &qs)).unwrap(), qs);
    }
}
