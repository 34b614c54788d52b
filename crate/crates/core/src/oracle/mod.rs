//! Frozen latent-code provider shared by Task A and Task B.
//!
//! The default oracle is a three-layer convolutional encoder trained once as an
//! autoencoder on Task-A rasters and then frozen. An auto-decoder alternative
//! learns one code per shape jointly with the decoder.

mod autodecoder;
mod encoder;
mod fill;
mod latent;

pub use autodecoder::{fit_codes, AutoDecoderSettings, ShapePoints};
pub use encoder::{
    train_oracle, ConvSpec, EncoderModel, OracleTraining, ENCODER_KIND, ENCODER_VERSION,
};
pub use fill::{fill_sparse, SparseFill};
pub use latent::{LatentCode, LatentSource};
