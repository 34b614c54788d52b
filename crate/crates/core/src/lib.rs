//! Uncertainty-aware fine-tuning of implicit shape decoders.
//!
//! A decoder `f(x, z)` is pretrained with dropout on a dense dataset ("task A"),
//! then adapted to a sparse, corrupted dataset ("task B"). Dropsembles sample `M`
//! thinned subnetworks from the single pretrained model, fine-tune each one
//! independently (optionally under an elastic weight consolidation penalty built
//! from the task-A Fisher diagonal) and predict with their uniform mixture.
//!
//! Modules:
//!
//! - [`nn`]: dense networks, dropout, losses, optimizers, checkpoints.
//! - [`uq`]: Fisher diagonal, EWC penalty, thinned members, ensembles, MC dropout.
//! - [`data`]: toy classification, binary-glyph occupancy and 2D SDF benchmarks.
//! - [`oracle`]: the frozen convolutional encoder supplying latent codes.
//! - [`metrics`]: accuracy, ECE, reliability diagrams, Dice, IoU, Hausdorff, entropy.
//! - [`harness`]: experiment configs, pipelines, sweeps and reports.

pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod raster;
pub mod rng;
pub mod textdoc;
pub mod uq;

pub use error::{Error, Result};
