//! Dense feed-forward networks: forward and backward passes, losses, dropout,
//! optimizers, the training loop and checkpoints.

mod checkpoint;
mod layer;
mod loss;
mod mask;
mod network;
mod optim;
mod train;

pub use checkpoint::{
    checkpoint_doc, load_checkpoint, network_doc, network_from_doc, save_checkpoint,
    CHECKPOINT_KIND, CHECKPOINT_VERSION,
};
pub use layer::{mlp_layers, sigmoid, Activation, LayerSpec, SIREN_OMEGA0};
pub use loss::{loss_value, LossSpec, BCE_EPS};
pub use mask::DropoutMask;
pub use network::{Dropout, ForwardTrace, MlpNetwork};
pub use optim::{OptimizerKind, OptimizerState, Schedule};
pub use train::{train_epochs, Penalty, TrainDropout, TrainOptions, TrainPhase, TrainingData};
