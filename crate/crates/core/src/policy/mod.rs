//! Gaussian actor-critic, GAE, the clipped surrogate with replay and
//! importance penalties, and the minibatch update loop.

pub mod gae;
pub mod losses;
pub mod params;
pub mod rollout;
pub mod update;

pub use gae::{gae, normalize};
pub use losses::{
    ppo_loss, ppo_loss_grad, replay_loss, replay_loss_grad, si_loss, si_loss_grad_flat, total_policy_loss,
    total_policy_loss_grad, PolicyLoss, PolicyObjective, PolicyTerm, PpoHyper, PpoMinibatch, PpoRows, PpoTerms,
};
pub use params::{act, PolicyParams};
pub use rollout::RolloutBatch;
pub use update::{policy_update, PolicyUpdate, UpdateMetrics};
