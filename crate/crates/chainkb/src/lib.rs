//! File formats, checkpoints and the command-line driver for
//! [`chainkb_core`].

pub mod checkpoint;
pub mod cli;
pub mod formats;
pub mod report;

pub use chainkb_core;
pub use checkpoint::{Checkpoint, CheckpointError, CheckpointHeader};
