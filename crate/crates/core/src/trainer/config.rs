use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::policy::PpoHyper;
use crate::reward::RewardHyper;
use crate::tasks::TaskSpec;

/// Ablation variants run by `pcrl ablate`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoPushback,
    NoClregs,
    /// Neither push-back nor continual regularizers.
    Finetune,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoPushback, Variant::NoClregs, Variant::Finetune];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoPushback => "no_pushback",
            Variant::NoClregs => "no_clregs",
            Variant::Finetune => "finetune",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config(format!("unknown variant {s:?}")))
    }

    /// `config` with this variant's ablation flags.
    pub fn apply(self, config: &TrainConfig) -> TrainConfig {
        let mut c = config.clone();
        c.push_back_enabled = matches!(self, Variant::Full | Variant::NoClregs);
        c.cl_regs_enabled = matches!(self, Variant::Full | Variant::NoPushback);
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Built-in task ids, trained in order.
    pub tasks: Vec<String>,
    pub n_envs: usize,
    pub steps_per_task: usize,
    pub rollout_horizon: usize,
    pub lr_policy: f64,
    pub lr_reward: f64,
    /// Cosine decay of both learning rates over each task.
    pub lr_cosine: bool,
    pub demos_per_task: usize,
    pub demo_noise: f64,
    pub seed: u64,
    pub push_back_enabled: bool,
    /// Agent triplets take `o_g` from the episode's goal anchor rather than
    /// from the agent trajectory itself.
    pub push_goal_anchor: bool,
    pub cl_regs_enabled: bool,
    pub policy_hidden: Vec<usize>,
    pub init_log_std: f64,
    pub reward_hidden: Vec<usize>,
    /// Expert and agent triplets per reward update.
    pub reward_batch: usize,
    pub reward_updates_per_step: usize,
    pub coreset_capacity: usize,
    /// Final rollout batches of a task considered for the coreset.
    pub n_keep: usize,
    pub si_xi: f64,
    pub eval_episodes: usize,
    pub eval_every: usize,
    pub reward: RewardHyper,
    pub ppo: PpoHyper,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tasks: vec!["press".into(), "open".into(), "close".into()],
            n_envs: 64,
            steps_per_task: 300,
            rollout_horizon: 100,
            lr_policy: 3e-4,
            lr_reward: 1e-2,
            lr_cosine: true,
            demos_per_task: 50,
            demo_noise: 0.1,
            seed: 0,
            push_back_enabled: true,
            push_goal_anchor: true,
            cl_regs_enabled: true,
            policy_hidden: vec![64, 64],
            init_log_std: -0.5,
            reward_hidden: vec![64, 64, 64, 64],
            reward_batch: 512,
            reward_updates_per_step: 4,
            coreset_capacity: 256,
            n_keep: 10,
            si_xi: 0.1,
            eval_episodes: 30,
            eval_every: 50,
            reward: RewardHyper::default(),
            ppo: PpoHyper::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: TrainConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fsutil::read(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::config("config needs at least one task"));
        }
        for (name, v) in [
            ("n_envs", self.n_envs),
            ("rollout_horizon", self.rollout_horizon),
            ("demos_per_task", self.demos_per_task),
            ("reward_batch", self.reward_batch),
            ("reward_updates_per_step", self.reward_updates_per_step),
            ("coreset_capacity", self.coreset_capacity),
            ("n_keep", self.n_keep),
            ("eval_episodes", self.eval_episodes),
            ("eval_every", self.eval_every),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be >= 1")));
            }
        }
        for (name, v) in [("lr_policy", self.lr_policy), ("lr_reward", self.lr_reward), ("si_xi", self.si_xi)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be finite and > 0")));
            }
        }
        if !(self.demo_noise >= 0.0 && self.demo_noise.is_finite()) {
            return Err(Error::config("demo_noise must be finite and >= 0"));
        }
        if !self.init_log_std.is_finite() {
            return Err(Error::config("init_log_std must be finite"));
        }
        if self.policy_hidden.contains(&0) || self.reward_hidden.contains(&0) {
            return Err(Error::config("hidden layer widths must be >= 1"));
        }
        for id in &self.tasks {
            let t = TaskSpec::builtin(id)?;
            if self.rollout_horizon > t.horizon {
                return Err(Error::config(format!(
                    "rollout_horizon {} exceeds task {} horizon {}",
                    self.rollout_horizon, t.task_id, t.horizon
                )));
            }
        }
        self.reward.validate()?;
        self.ppo.validate()
    }

    /// Task specs with their horizon set to `rollout_horizon`.
    pub fn task_specs(&self) -> Result<Vec<TaskSpec>> {
        self.tasks
            .iter()
            .map(|id| {
                let mut t = TaskSpec::builtin(id)?;
                t.horizon = self.rollout_horizon;
                Ok(t)
            })
            .collect()
    }

    /// `ppo` with the continual weights zeroed when `cl_regs_enabled` is off.
    pub fn effective_ppo(&self) -> PpoHyper {
        let mut h = self.ppo.clone();
        if !self.cl_regs_enabled {
            h.lambda1 = 0.0;
            h.lambda2 = 0.0;
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        let back = TrainConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(TrainConfig::from_toml_str("lamda1 = 1.0"), Err(Error::Config(_))));
        assert!(matches!(TrainConfig::from_toml_str("[ppo]\nlamda1 = 1.0"), Err(Error::Config(_))));
        let c = TrainConfig::from_toml_str("steps_per_task = 7\n[ppo]\nlambda1 = 0.25").unwrap();
        assert_eq!((c.steps_per_task, c.ppo.lambda1), (7, 0.25));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(TrainConfig::from_toml_str("n_envs = 0").is_err());
        assert!(TrainConfig::from_toml_str("lr_policy = 0.0").is_err());
        assert!(TrainConfig::from_toml_str("tasks = [\"push\"]").is_err());
        assert!(TrainConfig::from_toml_str("rollout_horizon = 101").is_err());
    }

    #[test]
    fn variants_set_flags() {
        let c = TrainConfig::default();
        let f = Variant::Finetune.apply(&c);
        assert!(!f.push_back_enabled && !f.cl_regs_enabled);
        let n = Variant::NoClregs.apply(&c);
        assert!(n.push_back_enabled && !n.cl_regs_enabled);
        assert_eq!(n.effective_ppo().lambda1, 0.0);
        assert_eq!(Variant::parse("no_pushback").unwrap(), Variant::NoPushback);
        assert!(Variant::parse("none").is_err());
    }
}
