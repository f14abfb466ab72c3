//! Numeric substrate: tensors, MLPs with a reverse pass, Adam, Gaussian KL
//! and counter-based random keys.

pub mod adam;
pub mod gaussian;
pub mod mlp;
pub mod objective;
pub mod rng;
pub mod tensor;

pub use adam::{adam_step, cosine_lr, AdamState};
pub use gaussian::{kl_gaussian, kl_gaussian_grad, positive_sigma, sigmoid, softplus, GaussianParams};
pub use mlp::{mlp_forward, ForwardCache, MlpParams};
pub use objective::{grad, Objective};
pub use rng::{rng_split, KeyStream, RngKey};
pub use tensor::Tensor;
