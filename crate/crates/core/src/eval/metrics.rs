use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::RngKey;
use crate::policy::PolicyParams;
use crate::reward::{potentials, ProgressModel};
use crate::tasks::{env_reset, env_step, scripted_expert, Action, EnvState, Observation, TaskSpec, Trajectory};

/// Outcome of a batch of evaluation episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub success_rate: f64,
    /// Mean over episodes of the fraction of steps spent in the success state.
    pub mean_true_reward: f64,
    pub episodes: Vec<Trajectory>,
}

/// Runs `n_episodes` fixed-horizon episodes, asking `controller` for one
/// action per live row each step.
pub fn eval_with<F>(task: &TaskSpec, n_episodes: usize, key: RngKey, mut controller: F) -> Result<EvalOutcome>
where
    F: FnMut(usize, &[EnvState], &[Observation]) -> Vec<Action>,
{
    if n_episodes == 0 {
        return Err(Error::Input("evaluation needs at least one episode".into()));
    }
    let mut states = env_reset(task, key, n_episodes);
    let mut obs: Vec<Observation> = states.iter().map(|s| s.observe(task)).collect();
    let mut episodes: Vec<Vec<Observation>> = obs.iter().map(|o| vec![*o]).collect();
    let mut in_success = vec![0usize; n_episodes];
    for t in 0..task.horizon {
        let actions = controller(t, &states, &obs);
        let (next, next_obs, succ) = env_step(task, &states, &actions)?;
        for (e, o) in next_obs.iter().enumerate() {
            episodes[e].push(*o);
            in_success[e] += usize::from(succ[e]);
        }
        states = next;
        obs = next_obs;
    }
    let n = n_episodes as f64;
    let success: Vec<bool> = states.iter().map(|s| s.succeeded).collect();
    Ok(EvalOutcome {
        success_rate: success.iter().filter(|s| **s).count() as f64 / n,
        mean_true_reward: in_success.iter().map(|c| *c as f64 / task.horizon as f64).sum::<f64>() / n,
        episodes: episodes
            .into_iter()
            .zip(success)
            .map(|(observations, success)| Trajectory {
                task_id: task.task_id.clone(),
                success,
                observations,
            })
            .collect(),
    })
}

/// Deterministic evaluation with the policy's mean actions.
pub fn eval_policy(theta: &PolicyParams, task: &TaskSpec, n_episodes: usize, key: RngKey) -> Result<EvalOutcome> {
    eval_with(task, n_episodes, key, |_, _, obs| theta.action_means(obs))
}

/// The noiseless scripted expert run through the same evaluation loop.
pub fn eval_expert(task: &TaskSpec, n_episodes: usize, key: RngKey) -> Result<EvalOutcome> {
    eval_with(task, n_episodes, key, |t, states, _| {
        states
            .iter()
            .enumerate()
            .map(|(e, s)| scripted_expert(task, s, key.fold_in(((t as u64) << 32) | e as u64), 0.0))
            .collect()
    })
}

/// Mean discounted shaped return `gamma^T Phi(o_T) - Phi(o_0)` of each
/// episode under `phi`, all episodes sharing the goal anchor `goal`.
pub fn mean_shaped_return(phi: &ProgressModel, episodes: &[Trajectory], goal: &Observation, gamma: f64) -> f64 {
    if episodes.is_empty() {
        return 0.0;
    }
    let rows: Vec<_> = episodes
        .iter()
        .flat_map(|ep| [(*ep.first(), *ep.first(), *goal), (*ep.first(), *ep.last(), *goal)])
        .collect();
    let p = potentials(phi, &rows);
    let total: f64 = episodes
        .iter()
        .enumerate()
        .map(|(k, ep)| gamma.powi((ep.len() - 1) as i32) * p[2 * k + 1] - p[2 * k])
        .sum();
    total / episodes.len() as f64
}

/// Average success over the tasks seen so far.
pub fn compute_ap(per_task_success: &BTreeMap<String, f64>) -> Result<f64> {
    if per_task_success.is_empty() {
        return Err(Error::Input("AP needs at least one task".into()));
    }
    Ok(per_task_success.values().sum::<f64>() / per_task_success.len() as f64)
}

/// Mean of `max(0, oracle - success)` over evaluation checkpoints.
pub fn compute_regret(oracle_success: f64, checkpoints: &[f64]) -> Result<f64> {
    if checkpoints.is_empty() {
        return Err(Error::Input("regret needs at least one checkpoint".into()));
    }
    if !(0.0..=1.0).contains(&oracle_success) {
        return Err(Error::Input(format!("oracle success {oracle_success} outside [0, 1]")));
    }
    Ok(checkpoints.iter().map(|s| (oracle_success - s).max(0.0)).sum::<f64>() / checkpoints.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
        v.iter().map(|(k, x)| (k.to_string(), *x)).collect()
    }

    #[test]
    fn ap_examples() {
        assert_eq!(compute_ap(&map(&[("a", 1.0), ("b", 0.5)])).unwrap(), 0.75);
        assert_eq!(compute_ap(&map(&[("a", 0.9)])).unwrap(), 0.9);
        assert_eq!(compute_ap(&map(&[("a", 0.0), ("b", 0.0)])).unwrap(), 0.0);
        assert!(compute_ap(&BTreeMap::new()).is_err());
    }

    #[test]
    fn regret_examples() {
        assert_eq!(compute_regret(0.9, &[0.9, 0.9]).unwrap(), 0.0);
        assert!((compute_regret(1.0, &[0.8]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(compute_regret(0.5, &[0.7]).unwrap(), 0.0);
        assert!(compute_regret(1.0, &[]).is_err());
    }

    #[test]
    fn expert_is_near_perfect_and_random_policy_is_not() {
        let task = TaskSpec::press();
        let e = eval_expert(&task, 30, RngKey::from_seed(4)).unwrap();
        assert!(e.success_rate >= 0.95, "{}", e.success_rate);
        let theta = PolicyParams::new(&[64, 64], RngKey::from_seed(0), -0.5).unwrap();
        let r = eval_policy(&theta, &task, 30, RngKey::from_seed(4)).unwrap();
        assert!(r.success_rate <= 0.2, "{}", r.success_rate);
        assert_eq!(r, eval_policy(&theta, &task, 30, RngKey::from_seed(4)).unwrap());
        assert_eq!(r.episodes[0].len(), task.horizon + 1);
    }

    #[test]
    fn zero_head_gives_zero_shaped_return() {
        let phi = ProgressModel::new(&[8], RngKey::from_seed(1)).unwrap();
        let e = eval_expert(&TaskSpec::press(), 3, RngKey::from_seed(2)).unwrap();
        assert_eq!(mean_shaped_return(&phi, &e.episodes, e.episodes[0].last(), 0.99), 0.0);
    }
}
