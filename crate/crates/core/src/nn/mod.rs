//! Dense sigmoid layers, MSE loss, backpropagation, momentum descent,
//! finite-difference gradient checking and the training loop.

mod activation;
mod gradcheck;
mod layer;
mod loss;
mod matrix;
mod optim;
mod train;

pub use activation::{sigmoid, sigmoid_prime};
pub use gradcheck::{gradient_check, relative_error, GradCheckReport};
pub use layer::{
    backprop, backward_stack, forward_dense, forward_stack, glorot_limit, loss_and_gradients,
    LayerParams,
};
pub use loss::{mse_grad, mse_loss};
pub use matrix::Matrix;
pub use optim::{sgd_momentum_step, Momentum};
pub use train::{derive_seed, train_loop, LossCurve, Network, Samples, TrainConfig, UpdateMode};
