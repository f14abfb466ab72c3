//! Progress model, its KL losses and the potential-based shaped reward.

pub mod losses;
pub mod model;
pub mod shaping;
pub mod triplets;

pub use losses::{
    expert_loss, expert_loss_grad, push_loss, push_loss_grad, reward_loss, reward_loss_grad, update_reward_model,
    RewardLoss, RewardObjective, RewardTerm,
};
pub use model::{ObsNorm, ProgressModel, RewardHyper, TRIPLET_WIDTH};
pub use shaping::{potential, potentials, shape, shaped_reward, shaped_rewards_from_potentials};
pub use triplets::{progress_ratio, sample_anchored_triplets, sample_expert_triplets, sample_triplets, Triplet};
