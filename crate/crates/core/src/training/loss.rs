use alloc::vec::Vec;

use super::{TrainError, TrainInstance};
use crate::kgraph::{KnowledgeGraph, Path};
use crate::numcore::{math, Probe};
use crate::pathmodel::{
    backward_final, encode_path, score_path, Activation, ModelParams, PathEncoding, QueryId,
};
use crate::pooling::{pool, PoolError, PoolResult, PoolingKind};

/// Probabilities are clamped to `[ε, 1 − ε]` before taking logs.
pub const PROB_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceLoss {
    pub loss: f64,
    pub probability: f64,
    pub pooled: f64,
    /// Paths that received a nonzero share of the gradient.
    pub support: usize,
    pub paths: usize,
    /// Distance to the nearest point where the loss is not differentiable.
    pub kink_margin: f64,
    /// Hash of the discrete choices made (activation signs, selections).
    pub fingerprint: u64,
}

impl From<InstanceLoss> for Probe {
    fn from(l: InstanceLoss) -> Self {
        Probe {
            loss: l.loss,
            kink_margin: l.kink_margin,
            fingerprint: l.fingerprint,
        }
    }
}

fn mix(acc: u64, x: u64) -> u64 {
    (acc ^ x).wrapping_mul(0x0100_0000_01b3).rotate_left(7)
}

struct Forward {
    encodings: Vec<PathEncoding>,
    scores: Vec<f64>,
    pooled: PoolResult,
}

fn forward(
    params: &ModelParams,
    kg: &KnowledgeGraph,
    paths: &[Path],
    query: QueryId,
    kind: PoolingKind,
) -> Result<Forward, TrainError> {
    if paths.is_empty() {
        return Err(PoolError::NoPaths.into());
    }
    let mut encodings = Vec::with_capacity(paths.len());
    let mut scores = Vec::with_capacity(paths.len());
    for p in paths {
        let enc = encode_path(params, kg, p, query)?;
        scores.push(score_path(params, &enc, query)?);
        encodings.push(enc);
    }
    let pooled = pool(&scores, kind)?;
    Ok(Forward {
        encodings,
        scores,
        pooled,
    })
}

/// Pools the path scores of one entity pair for `query`.
pub fn score_pair(
    params: &ModelParams,
    kg: &KnowledgeGraph,
    paths: &[Path],
    query: QueryId,
    kind: PoolingKind,
) -> Result<PoolResult, TrainError> {
    Ok(forward(params, kg, paths, query, kind)?.pooled)
}

/// Negative log-likelihood of one instance. With `grads`, adds
/// `scale · ∂loss/∂θ` into it.
pub fn instance_loss(
    params: &ModelParams,
    kg: &KnowledgeGraph,
    instance: &TrainInstance,
    kind: PoolingKind,
    scale: f64,
    grads: Option<&mut ModelParams>,
) -> Result<InstanceLoss, TrainError> {
    let fw = forward(params, kg, &instance.paths, instance.query, kind)?;
    let p = fw.pooled.probability;
    let clamped = !(PROB_EPSILON..=1.0 - PROB_EPSILON).contains(&p);
    let pc = p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    let (loss, d_pooled) = if instance.label.is_positive() {
        (-math::ln(pc), if clamped { 0.0 } else { p - 1.0 })
    } else {
        (-math::ln(1.0 - pc), if clamped { 0.0 } else { p })
    };

    let mut fingerprint = clamped as u64;
    let mut kink_margin = f64::INFINITY;
    if params.config.activation == Activation::Relu {
        for enc in &fw.encodings {
            fingerprint = enc.fold_signs(fingerprint);
            kink_margin = kink_margin.min(enc.kink_margin());
        }
    }
    if let PoolingKind::Max | PoolingKind::TopK(_) = kind {
        let mut selected = f64::INFINITY;
        let mut rejected = f64::NEG_INFINITY;
        for (i, (&w, &s)) in fw.pooled.weights.iter().zip(&fw.scores).enumerate() {
            if w != 0.0 {
                fingerprint = mix(fingerprint, i as u64 + 1);
                selected = selected.min(s);
            } else {
                rejected = rejected.max(s);
            }
        }
        kink_margin = kink_margin.min(selected - rejected);
    }

    if let Some(grads) = grads {
        let q = instance.query.index();
        let qv = params.query_emb.row(q);
        let mut d_final = alloc::vec![0.0; params.config.h];
        for (enc, &w) in fw.encodings.iter().zip(&fw.pooled.weights) {
            if w == 0.0 {
                continue;
            }
            let ds = scale * d_pooled * w;
            if ds == 0.0 {
                continue;
            }
            for (g, &y) in grads.query_emb.row_mut(q).iter_mut().zip(enc.final_state()) {
                *g += ds * y;
            }
            for (d, &x) in d_final.iter_mut().zip(qv) {
                *d = ds * x;
            }
            backward_final(params, kg, enc, &d_final, grads)?;
        }
    }

    Ok(InstanceLoss {
        loss,
        probability: p,
        pooled: fw.pooled.pooled,
        support: fw.pooled.nonzero_weights(),
        paths: fw.scores.len(),
        kink_margin,
        fingerprint,
    })
}

/// Mean instance loss, i.e. the summed loss scaled by 1/M.
pub fn dataset_loss(
    params: &ModelParams,
    kg: &KnowledgeGraph,
    instances: &[TrainInstance],
    kind: PoolingKind,
) -> Result<f64, TrainError> {
    if instances.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut total = 0.0;
    for inst in instances {
        total += instance_loss(params, kg, inst, kind, 1.0, None)?.loss;
    }
    Ok(total / instances.len() as f64)
}
