//! From-scratch neural network stack: dense and LSTM layers, losses,
//! Adam, a shared training loop and finite-difference gradient checks.
//! Generic over [`crate::scalar::Scalar`] (`f32` or `f64`).

pub mod adam;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod matrix;
pub mod train;

pub use adam::{AdamConfig, AdamState};
pub use dense::{dense_forward, Activation, DenseLayer, DenseSample, Mlp};
pub use gradcheck::{check_gradients, finite_diff_grads, GradCheck};
pub use loss::Loss;
pub use lstm::{lstm_step, LstmLayer, LstmState, SeqRegressor, SeqSample};
pub use matrix::Matrix;
pub use train::{mean_loss, train, EpochStats, Grads, Network, TrainConfig, TrainingHistory};
