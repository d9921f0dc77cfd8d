use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::encode::{backward, encode_relations};
use super::{ModelError, ModelParams};
use crate::kgraph::{EntityId, RelationId};

/// Scorers for `(source, relation sequence, target)` path queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathQueryVariant {
    /// `x_sᵀ diag(Σ_t h_t) x_t` over the recurrent hidden states.
    RnnDiag,
    /// `−‖x_s + Σ_t w_{r_t} − x_t‖²`.
    CompTransE,
    /// `Σ_i x_s[i] · Π_t w_{r_t}[i] · x_t[i]`.
    CompBilinearDiag,
}

impl fmt::Display for PathQueryVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathQueryVariant::RnnDiag => "rnn_diag",
            PathQueryVariant::CompTransE => "comp_transe",
            PathQueryVariant::CompBilinearDiag => "comp_bilinear_diag",
        })
    }
}

impl FromStr for PathQueryVariant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rnn_diag" => Ok(PathQueryVariant::RnnDiag),
            "comp_transe" => Ok(PathQueryVariant::CompTransE),
            "comp_bilinear_diag" => Ok(PathQueryVariant::CompBilinearDiag),
            other => Err(ModelError::Config(format!(
                "unknown path-query variant `{other}` (expected rnn_diag, comp_transe or comp_bilinear_diag)"
            ))),
        }
    }
}

fn entity_row(params: &ModelParams, e: EntityId) -> Result<&[f64], ModelError> {
    let table = params
        .entity_emb
        .as_ref()
        .ok_or(ModelError::MissingTable("entity"))?;
    if e.index() >= table.rows() {
        return Err(ModelError::UnknownId {
            kind: "entity",
            id: e.0,
            len: table.rows(),
        });
    }
    Ok(table.row(e.index()))
}

fn relation_row(params: &ModelParams, r: RelationId) -> Result<&[f64], ModelError> {
    let table = &params.blocks[0].relation_emb;
    if r.index() >= table.rows() {
        return Err(ModelError::UnknownId {
            kind: "relation",
            id: r.0,
            len: table.rows(),
        });
    }
    Ok(table.row(r.index()))
}

fn same_dims(what: &str, a: usize, b: usize) -> Result<(), ModelError> {
    if a != b {
        return Err(ModelError::Dimension(format!("{what}: {a} vs {b}")));
    }
    Ok(())
}

pub fn pathquery_score(
    params: &ModelParams,
    source: EntityId,
    relations: &[RelationId],
    target: EntityId,
    variant: PathQueryVariant,
) -> Result<f64, ModelError> {
    evaluate(params, source, relations, target, variant, None)
}

/// Scores the query and adds `upstream · ∂score/∂θ` into `grads`.
pub fn pathquery_backward(
    params: &ModelParams,
    source: EntityId,
    relations: &[RelationId],
    target: EntityId,
    variant: PathQueryVariant,
    upstream: f64,
    grads: &mut ModelParams,
) -> Result<f64, ModelError> {
    evaluate(params, source, relations, target, variant, Some((upstream, grads)))
}

fn add_row(grads: &mut ModelParams, entity: EntityId, v: &[f64]) -> Result<(), ModelError> {
    let table = grads
        .entity_emb
        .as_mut()
        .ok_or(ModelError::MissingTable("entity"))?;
    for (o, &x) in table.row_mut(entity.index()).iter_mut().zip(v) {
        *o += x;
    }
    Ok(())
}

fn evaluate(
    params: &ModelParams,
    source: EntityId,
    relations: &[RelationId],
    target: EntityId,
    variant: PathQueryVariant,
    grads: Option<(f64, &mut ModelParams)>,
) -> Result<f64, ModelError> {
    if relations.is_empty() {
        return Err(ModelError::EmptyPath);
    }
    let xs = entity_row(params, source)?;
    let xt = entity_row(params, target)?;
    let m = xs.len();
    match variant {
        PathQueryVariant::RnnDiag => {
            same_dims("entity vs hidden size", m, params.config.h)?;
            let enc = encode_relations(params, 0, relations)?;
            let mut sum = vec![0.0; m];
            for t in 0..enc.len() {
                for (s, &x) in sum.iter_mut().zip(enc.state(t)) {
                    *s += x;
                }
            }
            let mut score = 0.0;
            for i in 0..m {
                score += xs[i] * sum[i] * xt[i];
            }
            if let Some((up, grads)) = grads {
                let d_sum: Vec<f64> = (0..m).map(|i| up * xs[i] * xt[i]).collect();
                let d_xs: Vec<f64> = (0..m).map(|i| up * sum[i] * xt[i]).collect();
                let d_xt: Vec<f64> = (0..m).map(|i| up * sum[i] * xs[i]).collect();
                backward(params, None, &enc, &vec![d_sum; enc.len()], grads)?;
                add_row(grads, source, &d_xs)?;
                add_row(grads, target, &d_xt)?;
            }
            Ok(score)
        }
        PathQueryVariant::CompTransE => {
            same_dims("entity vs relation size", m, params.config.d)?;
            let mut v: Vec<f64> = xs.to_vec();
            for &r in relations {
                for (a, &w) in v.iter_mut().zip(relation_row(params, r)?) {
                    *a += w;
                }
            }
            for (a, &t) in v.iter_mut().zip(xt) {
                *a -= t;
            }
            let score = -v.iter().map(|x| x * x).sum::<f64>();
            if let Some((up, grads)) = grads {
                let dv: Vec<f64> = v.iter().map(|&x| -2.0 * up * x).collect();
                add_row(grads, source, &dv)?;
                let neg: Vec<f64> = dv.iter().map(|x| -x).collect();
                add_row(grads, target, &neg)?;
                for &r in relations {
                    for (o, &x) in grads.blocks[0].relation_emb.row_mut(r.index()).iter_mut().zip(&dv) {
                        *o += x;
                    }
                }
            }
            Ok(score)
        }
        PathQueryVariant::CompBilinearDiag => {
            same_dims("entity vs relation size", m, params.config.d)?;
            let rows: Vec<&[f64]> = relations
                .iter()
                .map(|&r| relation_row(params, r))
                .collect::<Result<_, _>>()?;
            let mut prod = vec![1.0; m];
            for row in &rows {
                for (p, &w) in prod.iter_mut().zip(*row) {
                    *p *= w;
                }
            }
            let mut score = 0.0;
            for i in 0..m {
                score += xs[i] * prod[i] * xt[i];
            }
            if let Some((up, grads)) = grads {
                let d_xs: Vec<f64> = (0..m).map(|i| up * prod[i] * xt[i]).collect();
                let d_xt: Vec<f64> = (0..m).map(|i| up * prod[i] * xs[i]).collect();
                add_row(grads, source, &d_xs)?;
                add_row(grads, target, &d_xt)?;
                for (t, &r) in relations.iter().enumerate() {
                    let g = grads.blocks[0].relation_emb.row_mut(r.index());
                    for i in 0..m {
                        let mut others = 1.0;
                        for (u, row) in rows.iter().enumerate() {
                            if u != t {
                                others *= row[i];
                            }
                        }
                        g[i] += up * xs[i] * xt[i] * others;
                    }
                }
            }
            Ok(score)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{check_gradients, seeded_rng, DenseMatrix, GradCheckConfig};
    use crate::pathmodel::{ModelConfig, ModelShape};

    fn params(dim: usize, seed: u64) -> ModelParams {
        let shape = ModelShape {
            relations: 6,
            query_relations: 1,
            types: 0,
            entities: 5,
        };
        ModelParams::init(ModelConfig::path_query(dim), shape, &mut seeded_rng(seed)).unwrap()
    }

    #[test]
    fn single_relation_identity_recurrence() {
        let mut p = params(4, 1);
        p.blocks[0].w_hh.fill(0.0);
        p.blocks[0].w_ih = DenseMatrix::identity(4);
        let r = RelationId(2);
        let got = pathquery_score(&p, EntityId(0), &[r], EntityId(3), PathQueryVariant::RnnDiag).unwrap();
        let y = p.blocks[0].relation_emb.row(2);
        let xs = p.entity_emb.as_ref().unwrap().row(0);
        let xt = p.entity_emb.as_ref().unwrap().row(3);
        let want: f64 = (0..4).map(|i| xs[i] * y[i].max(0.0) * xt[i]).sum();
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn two_hop_rnn_diag_matches_oracle() {
        let p = params(3, 2);
        let rels = [RelationId(0), RelationId(3)];
        let b = &p.blocks[0];
        let mv = |m: &DenseMatrix, v: &[f64]| -> Vec<f64> {
            (0..m.rows()).map(|i| (0..m.cols()).map(|j| m.get(i, j) * v[j]).sum()).collect()
        };
        let mut h = vec![0.0; 3];
        let mut total = vec![0.0; 3];
        for r in rels {
            let a = mv(&b.w_hh, &h);
            let c = mv(&b.w_ih, b.relation_emb.row(r.index()));
            h = (0..3).map(|i| (a[i] + c[i]).max(0.0)).collect();
            for i in 0..3 {
                total[i] += h[i];
            }
        }
        let e = p.entity_emb.as_ref().unwrap();
        let want: f64 = (0..3).map(|i| e.get(1, i) * total[i] * e.get(4, i)).sum();
        let got = pathquery_score(&p, EntityId(1), &rels, EntityId(4), PathQueryVariant::RnnDiag).unwrap();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn rnn_diag_is_symmetric_in_endpoints() {
        let p = params(5, 3);
        let rels = [RelationId(1), RelationId(4), RelationId(0)];
        let a = pathquery_score(&p, EntityId(0), &rels, EntityId(2), PathQueryVariant::RnnDiag).unwrap();
        let b = pathquery_score(&p, EntityId(2), &rels, EntityId(0), PathQueryVariant::RnnDiag).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transe_exact_translation_scores_zero() {
        let mut p = params(4, 4);
        let rels = [RelationId(1), RelationId(2)];
        // Accumulate in the scorer's order so the residual is exactly zero.
        let mut target = p.entity_emb.as_ref().unwrap().row(0).to_vec();
        for r in rels {
            for (t, &w) in target.iter_mut().zip(p.blocks[0].relation_emb.row(r.index())) {
                *t += w;
            }
        }
        p.entity_emb.as_mut().unwrap().row_mut(3).copy_from_slice(&target);
        let s = pathquery_score(&p, EntityId(0), &rels, EntityId(3), PathQueryVariant::CompTransE).unwrap();
        assert_eq!(s, 0.0);
        let off = pathquery_score(&p, EntityId(0), &rels, EntityId(4), PathQueryVariant::CompTransE).unwrap();
        assert!(off < 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let shape = ModelShape { relations: 2, query_relations: 1, types: 0, entities: 2 };
        let cfg = ModelConfig::single(3, 4, 3, crate::pathmodel::EntityMode::LearnedEntity);
        let p = ModelParams::init(cfg, shape, &mut seeded_rng(1)).unwrap();
        let err = pathquery_score(&p, EntityId(0), &[RelationId(0)], EntityId(1), PathQueryVariant::RnnDiag);
        assert!(matches!(err, Err(ModelError::Dimension(_))));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for variant in [
            PathQueryVariant::RnnDiag,
            PathQueryVariant::CompTransE,
            PathQueryVariant::CompBilinearDiag,
        ] {
            let p = params(4, 10);
            let rels = [RelationId(0), RelationId(5), RelationId(2)];
            let mut g = p.zeros_like();
            pathquery_backward(&p, EntityId(1), &rels, EntityId(2), variant, 1.0, &mut g).unwrap();
            let report = check_gradients(
                |q: &ModelParams| {
                    let enc = encode_relations(q, 0, &rels).unwrap();
                    crate::numcore::Probe {
                        loss: pathquery_score(q, EntityId(1), &rels, EntityId(2), variant).unwrap(),
                        kink_margin: if variant == PathQueryVariant::RnnDiag { enc.kink_margin() } else { f64::INFINITY },
                        fingerprint: enc.fold_signs(0),
                    }
                },
                &p,
                &g,
                GradCheckConfig::with_tolerance(1e-4),
            )
            .unwrap();
            assert!(report.passed(), "{variant}: {:?}", report.failures);
            assert!(report.checked > 0);
        }
    }

    #[test]
    fn variant_names() {
        for v in ["rnn_diag", "comp_transe", "comp_bilinear_diag"] {
            assert_eq!(alloc::format!("{}", v.parse::<PathQueryVariant>().unwrap()), v);
        }
        assert!("bilinear".parse::<PathQueryVariant>().is_err());
    }
}
