//! Dense tensors, reverse-mode differentiation and SGD.

mod optim;
mod param;
mod tape;
mod tensor;

pub use optim::{zero_grad, SgdOptimizer};
pub use param::{assign_flat_grads, flat_grads, flat_values, ParamId, Parameter};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
