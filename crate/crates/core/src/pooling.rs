//! Aggregation of per-path scores into one pair-level probability.
//!
//! | kind        | pooled score                 | gradient weights          |
//! |-------------|------------------------------|---------------------------|
//! | `Max`       | max sᵢ                       | 1 on the argmax           |
//! | `TopK(k)`   | mean of the k largest        | 1/k on each of the k      |
//! | `Average`   | mean of all                  | 1/N everywhere            |
//! | `LogSumExp` | log Σ exp sᵢ                 | softmax(s)                |
//!
//! The probability is always σ(pooled). Selections for `Max` and `TopK`
//! break ties by ascending path index.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numcore::{math, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingKind {
    Max,
    TopK(usize),
    Average,
    LogSumExp,
}

impl PoolingKind {
    pub const DEFAULT_TOP_K: usize = 5;
}

impl fmt::Display for PoolingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolingKind::Max => f.write_str("max"),
            PoolingKind::TopK(k) => write!(f, "topk:{k}"),
            PoolingKind::Average => f.write_str("avg"),
            PoolingKind::LogSumExp => f.write_str("lse"),
        }
    }
}

impl FromStr for PoolingKind {
    type Err = PoolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(PoolingKind::Max),
            "avg" | "average" => Ok(PoolingKind::Average),
            "lse" | "logsumexp" => Ok(PoolingKind::LogSumExp),
            "topk" => Ok(PoolingKind::TopK(Self::DEFAULT_TOP_K)),
            other => match other.strip_prefix("topk:").map(str::parse::<usize>) {
                Some(Ok(k)) if k >= 1 => Ok(PoolingKind::TopK(k)),
                _ => Err(PoolError::UnknownKind(String::from(other))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PoolError {
    #[error("entity pair has no paths")]
    NoPaths,
    #[error("non-finite path score at index {0}")]
    NonFinite(usize),
    #[error("top-k requires k >= 1")]
    ZeroK,
    #[error("unknown pooling kind `{0}` (expected max, topk:K, avg or lse)")]
    UnknownKind(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolResult {
    pub probability: f64,
    pub pooled: f64,
    /// ∂pooled/∂sᵢ.
    pub weights: Vec<f64>,
}

impl PoolResult {
    pub fn nonzero_weights(&self) -> usize {
        self.weights.iter().filter(|&&w| w != 0.0).count()
    }
}

/// Number of paths that receive gradient under `kind` for `n` paths.
pub fn expected_support(kind: PoolingKind, n: usize) -> usize {
    match kind {
        PoolingKind::Max => n.min(1),
        PoolingKind::TopK(k) => k.min(n),
        PoolingKind::Average | PoolingKind::LogSumExp => n,
    }
}

/// Indices of the `k` highest scores; equal scores prefer the lower index.
fn top_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

pub fn pool(scores: &[f64], kind: PoolingKind) -> Result<PoolResult, PoolError> {
    if scores.is_empty() {
        return Err(PoolError::NoPaths);
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(PoolError::NonFinite(i));
    }
    let n = scores.len();
    let mut weights = vec![0.0; n];
    let pooled = match kind {
        PoolingKind::Max | PoolingKind::TopK(_) => {
            let k = match kind {
                PoolingKind::TopK(0) => return Err(PoolError::ZeroK),
                PoolingKind::TopK(k) => k.min(n),
                _ => 1,
            };
            let chosen = top_indices(scores, k);
            let share = 1.0 / k as f64;
            let mut sum = 0.0;
            for &i in &chosen {
                weights[i] = share;
                sum += scores[i];
            }
            sum / k as f64
        }
        PoolingKind::Average => {
            let share = 1.0 / n as f64;
            weights.iter_mut().for_each(|w| *w = share);
            scores.iter().sum::<f64>() / n as f64
        }
        PoolingKind::LogSumExp => {
            let c = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (w, &s) in weights.iter_mut().zip(scores) {
                *w = math::exp(s - c);
                total += *w;
            }
            weights.iter_mut().for_each(|w| *w /= total);
            c + math::ln(total)
        }
    };
    Ok(PoolResult {
        probability: sigmoid(pooled),
        pooled,
        weights,
    })
}

/// ∂L/∂sᵢ given ∂L/∂pooled.
pub fn pool_backward(
    scores: &[f64],
    kind: PoolingKind,
    upstream: f64,
) -> Result<Vec<f64>, PoolError> {
    let result = pool(scores, kind)?;
    Ok(result.weights.iter().map(|w| upstream * w).collect())
}
