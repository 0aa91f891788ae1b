//! Fully convolutional sequence model: causal dilated convolutions, residual
//! blocks, losses, hand-rolled backpropagation and Adam optimization.

pub mod adam;
pub mod block;
pub mod conv;
pub mod loss;
pub mod network;
pub mod norm;
pub mod tensor;
pub mod train;

pub use adam::OptimizerState;
pub use conv::ConvLayer;
pub use loss::{compute_loss, LossKind};
pub use network::{receptive_field, receptive_field_of, Network, NetworkConfig, TcnError};
pub use tensor::{SeqTensor, ShapeError};
pub use train::{evaluate_loss, train_epoch, TrainExample};

/// Train/eval switch: train mode uses batch statistics and dropout, eval mode
/// is deterministic and strictly causal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
