//! Dense numerical core: tensors, activations, Adam, initialisation and
//! finite-difference gradient checking.

mod adam;
mod gradcheck;
mod init;
pub mod ops;
mod param;
mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, ParamCheck};
pub use init::glorot_uniform;
pub use ops::{affine, log_softmax, relu, relu_backward, sigmoid, softmax, softmax_backward, softmax_with_counts};
pub use param::{ParamSet, Parameter};
pub use tensor::{dot, Tensor};
