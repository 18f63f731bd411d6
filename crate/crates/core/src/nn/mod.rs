//! Small dense/convolutional classifiers with hand-written reverse-mode
//! gradients for both parameters and input pixels.

mod arch;
pub mod io;
mod model;

pub(crate) use model::{dot, scaled_sq_norm};
mod tensor;

pub use arch::{Layer, ModelArch};
pub use model::{
    cross_entropy, forward, input_gradient, loss_and_input_gradient, loss_and_param_gradient,
    param_gradient, sample_loss, ModelParams,
};
pub use tensor::{Sample, Tensor};
