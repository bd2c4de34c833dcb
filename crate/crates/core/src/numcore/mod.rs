//! Dense linear algebra, differentiable primitives with hand-derived
//! backward passes, the Adam optimizer, and a finite-difference gradient
//! checker. Everything is double precision.

mod adam;
mod gradcheck;
mod mat;
mod ops;

pub use adam::AdamState;
pub use gradcheck::{
    grad_check, max_rel_err, BlockCheck, NamedBlocks, ParamBlocks, DEFAULT_FD_STEP,
};
pub use mat::Mat;
pub use ops::{
    cross_entropy, dropout, dropout_mask, sigmoid, sigmoid_scalar, softmax, tanh, CE_FLOOR,
};
