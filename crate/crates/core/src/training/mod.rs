//! Training instances, the negative log-likelihood objective with its
//! gradients, the auxiliary type-ranking objective, and the Adam loop.

mod bpr;
mod dataset;
mod loss;
mod trainer;

pub use bpr::{bpr_type_loss, sample_type_pair};
pub use dataset::{
    build_dataset, subsample, Dataset, DatasetConfig, DatasetStats, Label, LabeledTriple,
    PathStore, TrainInstance,
};
pub use loss::{dataset_loss, instance_loss, score_pair, InstanceLoss, PROB_EPSILON};
pub use trainer::{train, TrainConfig, TrainOutcome};

use alloc::boxed::Box;

use crate::kgraph::{KgError, RelationId};
use crate::numcore::NumError;
use crate::pathmodel::{ModelError, ModelParams};
use crate::pooling::PoolError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Graph(#[from] KgError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("relation {0:?} is not a query relation of this dataset")]
    NotAQuery(RelationId),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    Config(&'static str),
    /// `last_good` holds the parameters before the failing step.
    #[error("non-finite loss or gradient at step {step}")]
    NonFinite {
        step: usize,
        last_good: Box<ModelParams>,
    },
}
