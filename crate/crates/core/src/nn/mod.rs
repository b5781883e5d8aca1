//! Dense feed-forward networks with per-weight prune masks, manual backprop
//! and the optimizers used for both the pruned model and the Q-network.

mod checkpoint;
mod matrix;
mod network;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use matrix::Matrix;
pub use network::{argmax, softmax, Activation, DenseLayer, ForwardCache, Gradients, LayerGrads, Network};
pub use train::{evaluate_accuracy, retrain, Adam, SgdConfig};
