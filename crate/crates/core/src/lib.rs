//! Reliability-propagation training lab for learning with noisy labels.
//!
//! The crate couples a small differentiable classifier with four
//! reliability-driven pieces:
//!
//! - [`reliability`]: bilevel meta-gradients turned into per-sample
//!   given-label (`alpha`) and pseudo-label (`beta`) reliabilities,
//! - [`ram`]: reliability-arbitrated Mixup with asymmetric Beta draws and
//!   global gating,
//! - [`cdcl`]: consensus-gated cross-view contrastive loss,
//! - [`trainer`]: the joint objective and dual-network co-training loop.
//!
//! Everything runs in `f64` on synthetic Gaussian blobs so that every
//! gradient and estimator can be checked against a brute-force oracle
//! ([`oracle`]).
//!
//! Batch-level math is data-parallel through rayon when the `parallel`
//! feature is enabled (the default). Reductions always happen in a fixed
//! chunk order, so results are bit-identical with and without the feature.

pub mod cdcl;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod metrics;
pub mod net;
pub mod oracle;
pub mod par;
pub mod ram;
pub mod reliability;
pub mod sampling;
pub mod selfcheck;
pub mod trainer;

mod error;

pub use error::{HrpError, Result};
