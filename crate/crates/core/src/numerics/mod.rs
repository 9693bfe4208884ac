//! Minimal dense f64 math: tensors, differentiable kernels with hand-written
//! backwards, the Adam optimizer, and a finite-difference gradient checker.

pub mod gradcheck;
pub mod optim;
pub mod tensor;

pub use gradcheck::finite_diff_check;
pub use optim::{adam_step, AdamState};
pub use tensor::{
    binary_cross_entropy, binary_cross_entropy_backward, cross_entropy, cross_entropy_backward,
    flatten_grads, flatten_values, load_values, matmul, matmul_backward, softmax, softmax_backward,
    softmax_slice, Parameter, Tensor, PROB_FLOOR,
};
