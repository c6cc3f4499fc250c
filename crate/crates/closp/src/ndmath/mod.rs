//! Dense f64 tensors plus a small define-by-run reverse-mode autodiff
//! engine. Everything the encoders and losses need, and nothing more.

mod gradcheck;
mod graph;
mod tensor;

pub use gradcheck::grad_check;
pub use graph::{ComputeGraph, NodeId};
pub use tensor::Tensor;
