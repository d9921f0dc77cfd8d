use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{bpr_type_loss, instance_loss, sample_type_pair, Dataset, TrainError};
use crate::kgraph::{EntityId, KnowledgeGraph};
use crate::numcore::{derive_rng, AdamConfig, AdamState, NumError};
use crate::pathmodel::{ModelParams, Sharing};
use crate::pooling::{expected_support, PoolError, PoolingKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub pooling: PoolingKind,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Add the type-ranking objective on one batch of entities per step.
    pub mtl_types: bool,
    pub mtl_weight: f64,
    /// Stop after this many gradient steps.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            pooling: PoolingKind::LogSumExp,
            seed: 0,
            adam: AdamConfig::default(),
            mtl_types: false,
            mtl_weight: 0.1,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean batch loss of every gradient step, in order.
    pub trace: Vec<f64>,
    /// Mean instance loss seen during each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    /// Instances whose gradient reached a different number of paths than
    /// the pooling kind prescribes.
    pub sparsity_violations: usize,
}

fn non_finite(step: usize, params: &ModelParams) -> TrainError {
    TrainError::NonFinite {
        step,
        last_good: Box::new(params.clone()),
    }
}

/// Mini-batch Adam over `dataset`, starting from `init`.
///
/// With shared parameters every batch mixes query relations. With
/// per-relation parameters the dataset is split by query relation and each
/// part is trained in turn within an epoch, with its own optimizer state.
pub fn train(
    kg: &KnowledgeGraph,
    dataset: &Dataset,
    init: ModelParams,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if config.batch_size == 0 {
        return Err(TrainError::Config("batch_size must be at least 1"));
    }
    if init.shape.query_relations != dataset.query_relations.len() {
        return Err(TrainError::Config(
            "model and dataset disagree on the number of query relations",
        ));
    }
    if config.mtl_types && init.type_emb.is_none() {
        return Err(TrainError::Config("type multitask needs a model with type embeddings"));
    }

    let partitions: Vec<Vec<usize>> = match init.config.sharing {
        Sharing::Shared => alloc::vec![(0..dataset.len()).collect()],
        Sharing::PerRelation => (0..dataset.query_relations.len())
            .map(|q| {
                (0..dataset.len())
                    .filter(|&i| dataset.instances[i].query.index() == q)
                    .collect::<Vec<_>>()
            })
            .filter(|p| !p.is_empty())
            .collect(),
    };
    let typed: Vec<EntityId> = (0..kg.num_entities() as u32)
        .map(EntityId)
        .filter(|&e| {
            let n = kg.entity_types(e).len();
            n > 0 && n < kg.num_types()
        })
        .collect();

    let mut params = init;
    let mut grads = params.zeros_like();
    let mut states: Vec<AdamState> = partitions
        .iter()
        .map(|_| AdamState::new(config.adam, &params))
        .collect();
    let mut trace = Vec::new();
    let mut epoch_losses = Vec::new();
    let mut violations = 0;
    let mut step = 0;
    let limit = config.max_steps.unwrap_or(usize::MAX);

    'epochs: for epoch in 0..config.epochs {
        let mut rng = derive_rng(config.seed, "shuffle", epoch as u64);
        let mut epoch_sum = 0.0;
        let mut epoch_count = 0usize;
        for (part, state) in partitions.iter().zip(states.iter_mut()) {
            let mut order = part.clone();
            order.shuffle(&mut rng);
            for batch in order.chunks(config.batch_size) {
                if step >= limit {
                    if epoch_count > 0 {
                        epoch_losses.push(epoch_sum / epoch_count as f64);
                    }
                    break 'epochs;
                }
                grads.fill_zero();
                let scale = 1.0 / batch.len() as f64;
                let mut batch_loss = 0.0;
                for &i in batch {
                    let l = match instance_loss(
                        &params,
                        kg,
                        &dataset.instances[i],
                        config.pooling,
                        scale,
                        Some(&mut grads),
                    ) {
                        Err(TrainError::Pool(PoolError::NonFinite(_))) => {
                            return Err(non_finite(step, &params))
                        }
                        other => other?,
                    };
                    if l.support != expected_support(config.pooling, l.paths) {
                        violations += 1;
                    }
                    batch_loss += l.loss;
                }
                epoch_sum += batch_loss;
                epoch_count += batch.len();
                batch_loss *= scale;

                if config.mtl_types && !typed.is_empty() {
                    let mut mrng = derive_rng(config.seed, "mtl", step as u64);
                    for _ in 0..batch.len() {
                        let e = typed[mrng.gen_range(0..typed.len())];
                        if let Some((pos, neg)) = sample_type_pair(kg, e, &mut mrng) {
                            bpr_type_loss(
                                &params,
                                kg,
                                e,
                                pos,
                                neg,
                                config.mtl_weight * scale,
                                Some(&mut grads),
                            )?;
                        }
                    }
                }

                if !batch_loss.is_finite() {
                    return Err(non_finite(step, &params));
                }
                match state.step(&mut params, &grads) {
                    Ok(()) => {}
                    Err(NumError::NonFinite(_)) => return Err(non_finite(step, &params)),
                    Err(e) => return Err(e.into()),
                }
                trace.push(batch_loss);
                step += 1;
            }
        }
        epoch_losses.push(epoch_sum / epoch_count as f64);
    }

    Ok(TrainOutcome {
        params,
        trace,
        epoch_losses,
        steps: step,
        sparsity_violations: violations,
    })
}
