use serde::{Deserialize, Serialize};

use super::gae::{gae, normalize};
use crate::error::{Error, Result};
use crate::tasks::{Action, Observation};

/// Transitions of `n_envs` episodes of `horizon` steps, stored env-major:
/// transition `(e, t)` lives at `e * horizon + t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutBatch {
    pub n_envs: usize,
    pub horizon: usize,
    /// Observation before each action.
    pub obs: Vec<Observation>,
    /// Observation after the last action of each episode.
    pub final_obs: Vec<Observation>,
    /// Unclamped sampled actions.
    pub actions: Vec<Action>,
    pub log_probs: Vec<f64>,
    pub shaped_rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Sticky success after each step.
    pub successes: Vec<bool>,
    /// `Phi(o_0) .. Phi(o_T)` per episode, `n_envs * (horizon + 1)` entries.
    pub potentials: Vec<f64>,
    /// `V(final_obs)`; only used where the last step is not terminal.
    pub bootstrap_values: Vec<f64>,
    /// Normalized GAE advantages, filled by [`RolloutBatch::compute_advantages`].
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.n_envs * self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, env: usize, t: usize) -> usize {
        env * self.horizon + t
    }

    /// Checks that every per-transition array has `n_envs * horizon` rows.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let ok = self.obs.len() == n
            && self.actions.len() == n
            && self.log_probs.len() == n
            && self.shaped_rewards.len() == n
            && self.values.len() == n
            && self.dones.len() == n
            && self.successes.len() == n
            && self.final_obs.len() == self.n_envs
            && self.bootstrap_values.len() == self.n_envs
            && self.potentials.len() == self.n_envs * (self.horizon + 1)
            && (self.advantages.is_empty() || self.advantages.len() == n)
            && (self.returns.is_empty() || self.returns.len() == n);
        if ok {
            Ok(())
        } else {
            Err(Error::config("rollout batch arrays are not aligned"))
        }
    }

    /// All `horizon + 1` observations of episode `env`.
    pub fn episode_obs(&self, env: usize) -> Vec<Observation> {
        let start = env * self.horizon;
        let mut v = self.obs[start..start + self.horizon].to_vec();
        v.push(self.final_obs[env]);
        v
    }

    pub fn episode_success(&self, env: usize) -> bool {
        self.horizon > 0 && self.successes[self.index(env, self.horizon - 1)]
    }

    /// Fraction of episodes whose sticky success fired.
    pub fn success_rate(&self) -> f64 {
        if self.n_envs == 0 {
            return 0.0;
        }
        (0..self.n_envs).filter(|&e| self.episode_success(e)).count() as f64 / self.n_envs as f64
    }

    pub fn mean_shaped_reward(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.shaped_rewards.iter().sum::<f64>() / self.len() as f64
    }

    /// GAE per episode, returns from the raw advantages, then advantages
    /// normalized across the whole batch.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) {
        let h = self.horizon;
        let mut adv = Vec::with_capacity(self.len());
        let mut ret = Vec::with_capacity(self.len());
        for e in 0..self.n_envs {
            let r = e * h..(e + 1) * h;
            let (a, g) = gae(
                &self.shaped_rewards[r.clone()],
                &self.values[r.clone()],
                &self.dones[r],
                self.bootstrap_values[e],
                gamma,
                lambda,
            );
            adv.extend(a);
            ret.extend(g);
        }
        normalize(&mut adv);
        self.advantages = adv;
        self.returns = ret;
    }
}
