use rand::Rng as _;

use super::TrainError;
use crate::kgraph::{EntityId, KnowledgeGraph, TypeId};
use crate::numcore::{dot, math, sigmoid, Rng};
use crate::pathmodel::{entity_vector, ModelError, ModelParams};

/// Draws one observed and one unobserved type for `entity`, or `None` when
/// the entity is untyped or carries every type.
pub fn sample_type_pair(
    kg: &KnowledgeGraph,
    entity: EntityId,
    rng: &mut Rng,
) -> Option<(TypeId, TypeId)> {
    let own = kg.entity_types(entity);
    let n = kg.num_types();
    if own.is_empty() || own.len() >= n {
        return None;
    }
    let observed = own[rng.gen_range(0..own.len())];
    // Uniform over the complement: draw a rank and skip the owned ids.
    let mut k = rng.gen_range(0..n - own.len());
    for t in 0..n as u32 {
        if own.contains(&TypeId(t)) {
            continue;
        }
        if k == 0 {
            return Some((observed, TypeId(t)));
        }
        k -= 1;
    }
    None
}

/// `−log σ(⟨x_e, t⁺⟩ − ⟨x_e, t⁻⟩)` where `x_e` is the entity's
/// representation. With `grads`, adds `scale · ∂loss/∂θ` into it.
pub fn bpr_type_loss(
    params: &ModelParams,
    kg: &KnowledgeGraph,
    entity: EntityId,
    observed: TypeId,
    negative: TypeId,
    scale: f64,
    grads: Option<&mut ModelParams>,
) -> Result<f64, TrainError> {
    let types = params
        .type_emb
        .as_ref()
        .ok_or(ModelError::MissingTable("type"))?;
    for t in [observed, negative] {
        if t.index() >= types.rows() {
            return Err(ModelError::UnknownId {
                kind: "type",
                id: t.0,
                len: types.rows(),
            }
            .into());
        }
    }
    let x = entity_vector(kg, params, entity)?;
    let x = x.as_slice();
    let tp = types.row(observed.index());
    let tn = types.row(negative.index());
    let margin = dot(x, tp) - dot(x, tn);
    // −log σ(u) = log(1 + e^{−u}), evaluated without overflow.
    let loss = if margin > 0.0 {
        math::ln_1p(math::exp(-margin))
    } else {
        -margin + math::ln_1p(math::exp(margin))
    };

    if let Some(grads) = grads {
        let g = -scale * (1.0 - sigmoid(margin));
        let m = x.len();
        let mut dx = alloc::vec![0.0; m];
        for i in 0..m {
            dx[i] = g * (tp[i] - tn[i]);
        }
        let gt = grads
            .type_emb
            .as_mut()
            .ok_or(ModelError::MissingTable("type"))?;
        for (o, &v) in gt.row_mut(observed.index()).iter_mut().zip(&x[..m]) {
            *o += g * v;
        }
        for (o, &v) in gt.row_mut(negative.index()).iter_mut().zip(&x[..m]) {
            *o -= g * v;
        }
        let mode = params.config.entity_mode;
        if mode.uses_types() {
            for &t in kg.entity_types(entity) {
                for (o, &d) in gt.row_mut(t.index()).iter_mut().zip(&dx) {
                    *o += d;
                }
            }
        }
        if mode.uses_learned_entities() {
            let ge = grads
                .entity_emb
                .as_mut()
                .ok_or(ModelError::MissingTable("entity"))?;
            for (o, &d) in ge.row_mut(entity.index()).iter_mut().zip(&dx) {
                *o += d;
            }
        }
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::GraphBuilder;
    use crate::numcore::{check_gradients, seeded_rng, GradCheckConfig};
    use crate::pathmodel::{EntityMode, ModelConfig, ModelShape};
    use alloc::vec;

    fn graph() -> KnowledgeGraph {
        let mut b = GraphBuilder::new();
        b.add("a", "r", "b");
        b.add("b", "r", "c");
        let (kg, _) = b.build().with_type_annotations([
            ("a", vec!["t0", "t1"]),
            ("b", vec!["t0", "t1", "t2"]),
        ]);
        kg
    }

    fn params(kg: &KnowledgeGraph, mode: EntityMode, seed: u64) -> ModelParams {
        let shape = ModelShape {
            relations: kg.num_relations(),
            query_relations: 1,
            types: kg.num_types(),
            entities: kg.num_entities(),
        };
        ModelParams::init(ModelConfig::single(4, 4, 3, mode), shape, &mut seeded_rng(seed))
            .unwrap()
    }

    #[test]
    fn equal_scores_cost_ln2() {
        let kg = graph();
        let mut p = params(&kg, EntityMode::TypeSum, 1);
        p.type_emb.as_mut().unwrap().fill(0.0);
        let a = kg.entity_id("a").unwrap();
        let l = bpr_type_loss(&p, &kg, a, TypeId(0), TypeId(2), 1.0, None).unwrap();
        assert_eq!(l, core::f64::consts::LN_2);
    }

    #[test]
    fn large_margin_costs_nothing() {
        let kg = graph();
        let mut p = params(&kg, EntityMode::LearnedEntity, 1);
        let a = kg.entity_id("a").unwrap();
        p.entity_emb.as_mut().unwrap().row_mut(a.index()).copy_from_slice(&[1.0, 0.0, 0.0]);
        p.type_emb.as_mut().unwrap().row_mut(0).copy_from_slice(&[100.0, 0.0, 0.0]);
        p.type_emb.as_mut().unwrap().row_mut(2).copy_from_slice(&[-100.0, 0.0, 0.0]);
        let l = bpr_type_loss(&p, &kg, a, TypeId(0), TypeId(2), 1.0, None).unwrap();
        assert!(l > 0.0 && l < 1e-80);
        let flipped = bpr_type_loss(&p, &kg, a, TypeId(2), TypeId(0), 1.0, None).unwrap();
        assert!((flipped - 200.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let kg = graph();
        let a = kg.entity_id("a").unwrap();
        for (i, mode) in [
            EntityMode::LearnedEntity,
            EntityMode::TypeSum,
            EntityMode::EntityPlusTypeSum,
        ]
        .into_iter()
        .enumerate()
        {
            let p = params(&kg, mode, i as u64);
            let mut g = p.zeros_like();
            bpr_type_loss(&p, &kg, a, TypeId(1), TypeId(2), 1.0, Some(&mut g)).unwrap();
            let report = check_gradients(
                |q: &ModelParams| bpr_type_loss(q, &kg, a, TypeId(1), TypeId(2), 1.0, None).unwrap(),
                &p,
                &g,
                GradCheckConfig::with_tolerance(1e-4),
            )
            .unwrap();
            assert!(report.passed(), "{mode:?}: {:?}", report.failures);
        }
    }

    #[test]
    fn type_pairs_avoid_observed_types() {
        let kg = graph();
        let a = kg.entity_id("a").unwrap();
        let b = kg.entity_id("b").unwrap();
        let c = kg.entity_id("c").unwrap();
        let mut rng = seeded_rng(4);
        for _ in 0..50 {
            let (pos, neg) = sample_type_pair(&kg, a, &mut rng).unwrap();
            assert!(kg.entity_types(a).contains(&pos));
            assert_eq!(neg, TypeId(2));
        }
        assert!(sample_type_pair(&kg, b, &mut rng).is_none());
        assert!(sample_type_pair(&kg, c, &mut rng).is_none());
    }
}
