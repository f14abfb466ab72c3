use serde::{Deserialize, Serialize};

use super::losses::{total_policy_loss_grad, PolicyLoss, PpoHyper, PpoMinibatch};
use super::params::PolicyParams;
use super::rollout::RolloutBatch;
use crate::continual::{sample_coreset, Coreset, SiRegularizer};
use crate::error::{Error, Result};
use crate::numeric::{AdamState, RngKey};

/// Minibatch losses averaged over every Adam step of one update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub ppo_loss: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    pub replay_loss: f64,
    pub si_loss: f64,
    pub total_loss: f64,
    pub adam_steps: usize,
}

/// Result of [`policy_update`]. `si_trace` holds, per Adam step, the PPO
/// gradient used and the parameters after the step.
pub struct PolicyUpdate {
    pub theta: PolicyParams,
    pub adam: AdamState,
    pub metrics: UpdateMetrics,
    pub si_trace: Vec<(Vec<f64>, Vec<f64>)>,
}

fn check_finite(l: &PolicyLoss) -> Result<()> {
    for (name, v) in [
        ("ppo surrogate", l.ppo.surrogate),
        ("ppo value loss", l.ppo.value),
        ("ppo entropy", l.ppo.entropy),
        ("replay loss", l.replay),
        ("si loss", l.si),
    ] {
        if !v.is_finite() {
            return Err(Error::numerical("policy_update", format!("{name} is {v}")));
        }
    }
    Ok(())
}

/// `epochs` passes of shuffled minibatches; each minibatch is paired with a
/// fresh coreset sample of the same size.
#[allow(clippy::too_many_arguments)]
pub fn policy_update(
    theta: &PolicyParams,
    adam: &AdamState,
    batch: &RolloutBatch,
    coreset: &Coreset,
    regs: &[SiRegularizer],
    hyper: &PpoHyper,
    lr: f64,
    key: RngKey,
) -> Result<PolicyUpdate> {
    batch.validate()?;
    if batch.advantages.len() != batch.len() || batch.returns.len() != batch.len() {
        return Err(Error::Input("policy_update needs advantages; call compute_advantages".into()));
    }
    if batch.is_empty() {
        return Err(Error::Input("policy_update on an empty rollout batch".into()));
    }
    let use_replay = hyper.lambda1 != 0.0;
    let n = batch.len();
    let n_mb = hyper.minibatches.min(n);
    let mut flat = theta.flatten();
    let mut cur = theta.clone();
    let mut adam = adam.clone();
    let mut sums = UpdateMetrics::default();
    let mut si_trace = Vec::with_capacity(hyper.epochs * n_mb);
    for epoch in 0..hyper.epochs {
        let ekey = key.fold_in(epoch as u64);
        let (shuffle_key, coreset_key) = ekey.split();
        let mut order: Vec<usize> = (0..n).collect();
        shuffle_key.stream().shuffle(&mut order);
        for m in 0..n_mb {
            let idx = &order[m * n / n_mb..(m + 1) * n / n_mb];
            let mb = PpoMinibatch::gather(batch, idx);
            let replay = if use_replay {
                sample_coreset(coreset, coreset_key.fold_in(m as u64), idx.len())
            } else {
                Vec::new()
            };
            let (loss, grad, ppo_grad) = total_policy_loss_grad(&cur, &mb.rows(), &replay, regs, hyper)?;
            check_finite(&loss)?;
            adam.step(&mut flat, &grad, lr)?;
            cur.assign(&flat)?;
            si_trace.push((ppo_grad, flat.clone()));
            sums.ppo_loss += loss.ppo.total;
            sums.surrogate += loss.ppo.surrogate;
            sums.value_loss += loss.ppo.value;
            sums.entropy += loss.ppo.entropy;
            sums.clip_frac += loss.ppo.clip_frac;
            sums.replay_loss += loss.replay;
            sums.si_loss += loss.si;
            sums.total_loss += loss.total;
            sums.adam_steps += 1;
        }
    }
    let k = sums.adam_steps as f64;
    let metrics = UpdateMetrics {
        ppo_loss: sums.ppo_loss / k,
        surrogate: sums.surrogate / k,
        value_loss: sums.value_loss / k,
        entropy: sums.entropy / k,
        clip_frac: sums.clip_frac / k,
        replay_loss: sums.replay_loss / k,
        si_loss: sums.si_loss / k,
        total_loss: sums.total_loss / k,
        adam_steps: sums.adam_steps,
    };
    Ok(PolicyUpdate {
        theta: cur,
        adam,
        metrics,
        si_trace,
    })
}
