//! Layer kernels with explicit forward and reverse passes.
//!
//! Each layer caches what its backward pass needs during a training-mode
//! forward call, and accumulates parameter gradients into [`Param::grad`].
//! Composition (and therefore the order of reverse accumulation) is fixed by
//! the caller; see [`crate::model::EmbNet`].
//!
//! Everything is generic over [`Real`], so the same code runs in 32-bit for
//! training and in 64-bit for gradient checks.

pub mod layers;
pub mod loss;
pub mod optim;
pub mod real;
pub mod rng;
pub mod tensor;

pub use layers::{BatchNorm1d, Dropout, Embedding, Linear, Mode, Relu};
pub use loss::{softmax, softmax_cross_entropy};
pub use optim::{adam_step, Adam, AdamMoments};
pub use real::Real;
pub use tensor::{Param, Tensor2};
