//! Desk-scale laboratory for zero-shot generalization to unseen actions.
//!
//! The pipeline: a deterministic 2D tool-placement environment ([`envsim`])
//! produces task-agnostic probe observations per action; [`reprlearn`] learns
//! per-action Gaussian embeddings from those observations (coarse encoding,
//! graph-refined contrastive/classification training, hierarchical VAE
//! reconstruction); [`policylearn`] trains a PPO policy over the embeddings
//! with Gaussian-mixup augmentation; [`evalsuite`] measures zero-shot
//! transfer to actions never seen in training.

pub mod checkpoint;
pub mod config;
pub mod envsim;
pub mod error;
pub mod evalsuite;
pub mod nn;
pub mod policylearn;
pub mod reprlearn;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
