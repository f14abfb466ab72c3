use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::params::{obs_rows, PolicyParams};
use super::rollout::RolloutBatch;
use crate::continual::{CoresetEntry, SiRegularizer};
use crate::error::{Error, Result};
use crate::numeric::objective::chunked_value_and_grad;
use crate::numeric::gaussian::LN_2PI;
use crate::numeric::Objective;
use crate::tasks::{Action, Observation, ACT_DIM};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoHyper {
    pub clip_eps: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Weight of the coreset replay term.
    pub lambda1: f64,
    /// Weight of the synaptic-importance penalty.
    pub lambda2: f64,
}

impl Default for PpoHyper {
    fn default() -> Self {
        PpoHyper {
            clip_eps: 0.2,
            gae_lambda: 0.95,
            epochs: 4,
            minibatches: 4,
            value_coef: 0.5,
            entropy_coef: 0.01,
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }
}

impl PpoHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::config("ppo.clip_eps must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config("ppo.gae_lambda must lie in [0, 1]"));
        }
        if self.epochs == 0 || self.minibatches == 0 {
            return Err(Error::config("ppo.epochs and ppo.minibatches must be >= 1"));
        }
        for (name, v) in [
            ("value_coef", self.value_coef),
            ("entropy_coef", self.entropy_coef),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("ppo.{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Components of the PPO loss on one minibatch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoTerms {
    /// `-mean(min(rho A, clip(rho) A))`.
    pub surrogate: f64,
    /// `mean((V - R)^2)`, before `value_coef`.
    pub value: f64,
    pub entropy: f64,
    /// `surrogate + value_coef * value - entropy_coef * entropy`.
    pub total: f64,
    /// Fraction of rows whose ratio left the clip interval.
    pub clip_frac: f64,
}

/// Minibatch view: the rows of a rollout batch the PPO loss sees.
pub struct PpoRows<'a> {
    pub obs: &'a [Observation],
    pub actions: &'a [Action],
    pub old_log_probs: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

/// Gathered copy of selected rollout rows.
pub struct PpoMinibatch {
    pub obs: Vec<Observation>,
    pub actions: Vec<Action>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl PpoMinibatch {
    pub fn gather(batch: &RolloutBatch, idx: &[usize]) -> Self {
        PpoMinibatch {
            obs: idx.iter().map(|&i| batch.obs[i]).collect(),
            actions: idx.iter().map(|&i| batch.actions[i]).collect(),
            old_log_probs: idx.iter().map(|&i| batch.log_probs[i]).collect(),
            advantages: idx.iter().map(|&i| batch.advantages[i]).collect(),
            returns: idx.iter().map(|&i| batch.returns[i]).collect(),
        }
    }

    pub fn rows(&self) -> PpoRows<'_> {
        PpoRows {
            obs: &self.obs,
            actions: &self.actions,
            old_log_probs: &self.old_log_probs,
            advantages: &self.advantages,
            returns: &self.returns,
        }
    }
}

impl<'a> PpoRows<'a> {
    pub fn full(batch: &'a RolloutBatch) -> Self {
        PpoRows {
            obs: &batch.obs,
            actions: &batch.actions,
            old_log_probs: &batch.log_probs,
            advantages: &batch.advantages,
            returns: &batch.returns,
        }
    }

    fn len(&self) -> usize {
        self.obs.len()
    }
}

/// One actor pass over rows `r`. For each row computes `log pi(a|s)`, asks
/// `weight(k, logp)` for `dL/dlogp` and accumulates the actor and log-std
/// gradient into `grad`.
fn logp_backward<F: FnMut(usize, f64) -> f64>(
    theta: &PolicyParams,
    obs: &[Observation],
    actions: &[Action],
    r: Range<usize>,
    grad: &mut [f64],
    mut weight: F,
) {
    let batch = r.len();
    let cache = theta.actor.forward_cached(&obs_rows(&obs[r.clone()]), batch);
    let means = cache.output();
    let inv_std: Vec<f64> = theta.log_std.iter().map(|s| (-s).exp()).collect();
    let ls_off = theta.log_std_offset();
    let mut d_mean = vec![0.0; batch * ACT_DIM];
    for k in 0..batch {
        let a = &actions[r.start + k];
        let mut z = [0.0; ACT_DIM];
        let mut lp = 0.0;
        for d in 0..ACT_DIM {
            z[d] = (a[d] - means[k * ACT_DIM + d]) * inv_std[d];
            lp += -0.5 * z[d] * z[d] - theta.log_std[d] - 0.5 * LN_2PI;
        }
        let w = weight(k, lp);
        for d in 0..ACT_DIM {
            d_mean[k * ACT_DIM + d] = w * z[d] * inv_std[d];
            grad[ls_off + d] += w * (z[d] * z[d] - 1.0);
        }
    }
    theta
        .actor
        .backward(&cache, &d_mean, &mut grad[..theta.actor.num_params()], None);
}

/// PPO clipped surrogate plus value and entropy terms, with gradient in the
/// flat policy layout.
pub fn ppo_loss_grad(theta: &PolicyParams, rows: &PpoRows<'_>, hyper: &PpoHyper) -> Result<(PpoTerms, Vec<f64>)> {
    let n = rows.len();
    let dim = theta.num_params();
    if n == 0 {
        return Ok((PpoTerms::default(), vec![0.0; dim]));
    }
    let inv = 1.0 / n as f64;
    let eps = hyper.clip_eps;
    let c_off = theta.critic_offset();
    // The slot after the gradient carries the clip count through the reduction.
    let (surr_sum, mut grad) = chunked_value_and_grad(n, dim + 1, |r: Range<usize>| {
        let mut sum = 0.0;
        let mut clipped_rows = 0.0;
        let mut g = vec![0.0; dim + 1];
        let start = r.start;
        logp_backward(theta, rows.obs, rows.actions, r, &mut g[..dim], |k, lp| {
            let i = start + k;
            let a = rows.advantages[i];
            let rho = (lp - rows.old_log_probs[i]).exp();
            if rho < 1.0 - eps || rho > 1.0 + eps {
                clipped_rows += 1.0;
            }
            let unclipped = rho * a;
            let clipped = rho.clamp(1.0 - eps, 1.0 + eps) * a;
            if unclipped <= clipped {
                sum += unclipped;
                -inv * a * rho
            } else {
                sum += clipped;
                0.0
            }
        });
        g[dim] = clipped_rows;
        Ok((sum, g))
    })?;
    let clip_count = grad.pop().unwrap_or(0.0);
    let (v_sum, vgrad) = chunked_value_and_grad(n, dim, |r: Range<usize>| {
        let batch = r.len();
        let cache = theta.critic.forward_cached(&obs_rows(&rows.obs[r.clone()]), batch);
        let v = cache.output();
        let mut d = vec![0.0; batch];
        let mut sum = 0.0;
        for k in 0..batch {
            let e = v[k] - rows.returns[r.start + k];
            sum += e * e;
            d[k] = 2.0 * hyper.value_coef * inv * e;
        }
        let mut g = vec![0.0; dim];
        theta.critic.backward(&cache, &d, &mut g[c_off..], None);
        Ok((sum, g))
    })?;
    for (g, v) in grad.iter_mut().zip(&vgrad) {
        *g += v;
    }
    let ls_off = theta.log_std_offset();
    for d in 0..ACT_DIM {
        grad[ls_off + d] -= hyper.entropy_coef;
    }
    let surrogate = -surr_sum * inv;
    let value = v_sum * inv;
    let entropy = theta.entropy();
    Ok((
        PpoTerms {
            surrogate,
            value,
            entropy,
            total: surrogate + hyper.value_coef * value - hyper.entropy_coef * entropy,
            clip_frac: clip_count * inv,
        },
        grad,
    ))
}

pub fn ppo_loss(theta: &PolicyParams, batch: &RolloutBatch, hyper: &PpoHyper) -> Result<f64> {
    Ok(ppo_loss_grad(theta, &PpoRows::full(batch), hyper)?.0.total)
}

/// `mean(-log pi(a|s) * A)` over coreset entries with frozen advantages.
pub fn replay_loss_grad(theta: &PolicyParams, entries: &[CoresetEntry]) -> Result<(f64, Vec<f64>)> {
    let n = entries.len();
    let dim = theta.num_params();
    if n == 0 {
        return Ok((0.0, vec![0.0; dim]));
    }
    let inv = 1.0 / n as f64;
    let obs: Vec<Observation> = entries.iter().map(|e| e.obs).collect();
    let actions: Vec<Action> = entries.iter().map(|e| e.action).collect();
    let (sum, grad) = chunked_value_and_grad(n, dim, |r: Range<usize>| {
        let mut g = vec![0.0; dim];
        let mut sum = 0.0;
        let start = r.start;
        logp_backward(theta, &obs, &actions, r, &mut g, |k, lp| {
            let adv = entries[start + k].advantage;
            sum -= lp * adv;
            -inv * adv
        });
        Ok((sum, g))
    })?;
    Ok((sum * inv, grad))
}

pub fn replay_loss(theta: &PolicyParams, entries: &[CoresetEntry]) -> Result<f64> {
    Ok(replay_loss_grad(theta, entries)?.0)
}

/// `sum_k sum_i Omega_k,i (theta_i - theta*_k,i)^2` over a flat parameter vector.
pub fn si_loss_grad_flat(flat: &[f64], regs: &[SiRegularizer]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; flat.len()];
    let mut total = 0.0;
    for (k, reg) in regs.iter().enumerate() {
        if reg.omega_cap.len() != flat.len() || reg.theta_star.len() != flat.len() {
            return Err(Error::config(format!(
                "SI regularizer {k} has {} entries, policy has {}",
                reg.omega_cap.len(),
                flat.len()
            )));
        }
        for i in 0..flat.len() {
            let d = flat[i] - reg.theta_star[i];
            total += reg.omega_cap[i] * d * d;
            grad[i] += 2.0 * reg.omega_cap[i] * d;
        }
    }
    Ok((total, grad))
}

pub fn si_loss(theta: &PolicyParams, regs: &[SiRegularizer]) -> Result<f64> {
    Ok(si_loss_grad_flat(&theta.flatten(), regs)?.0)
}

/// Components of the unified policy objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyLoss {
    pub ppo: PpoTerms,
    pub replay: f64,
    pub si: f64,
    /// `ppo.total + lambda1 * replay + lambda2 * si`.
    pub total: f64,
}

/// Total loss and gradient. Also returns the gradient of the PPO part alone,
/// which drives the importance path integral.
pub fn total_policy_loss_grad(
    theta: &PolicyParams,
    rows: &PpoRows<'_>,
    coreset_batch: &[CoresetEntry],
    regs: &[SiRegularizer],
    hyper: &PpoHyper,
) -> Result<(PolicyLoss, Vec<f64>, Vec<f64>)> {
    let (ppo, ppo_grad) = ppo_loss_grad(theta, rows, hyper)?;
    let mut grad = ppo_grad.clone();
    let mut out = PolicyLoss {
        ppo,
        replay: 0.0,
        si: 0.0,
        total: ppo.total,
    };
    if hyper.lambda1 != 0.0 && !coreset_batch.is_empty() {
        let (r, g) = replay_loss_grad(theta, coreset_batch)?;
        out.replay = r;
        out.total += hyper.lambda1 * r;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += hyper.lambda1 * b;
        }
    }
    if hyper.lambda2 != 0.0 && !regs.is_empty() {
        let (s, g) = si_loss_grad_flat(&theta.flatten(), regs)?;
        out.si = s;
        out.total += hyper.lambda2 * s;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += hyper.lambda2 * b;
        }
    }
    Ok((out, grad, ppo_grad))
}

pub fn total_policy_loss(
    theta: &PolicyParams,
    batch: &RolloutBatch,
    coreset_batch: &[CoresetEntry],
    regs: &[SiRegularizer],
    hyper: &PpoHyper,
) -> Result<f64> {
    Ok(total_policy_loss_grad(theta, &PpoRows::full(batch), coreset_batch, regs, hyper)?.0.total)
}

/// Which policy loss a [`PolicyObjective`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyTerm {
    Ppo,
    Replay,
    Si,
    Total,
}

/// A policy loss as a function of the flat parameter vector.
pub struct PolicyObjective<'a> {
    pub template: &'a PolicyParams,
    pub term: PolicyTerm,
    pub rows: PpoRows<'a>,
    pub coreset: &'a [CoresetEntry],
    pub regs: &'a [SiRegularizer],
    pub hyper: &'a PpoHyper,
}

impl Objective for PolicyObjective<'_> {
    fn name(&self) -> &str {
        match self.term {
            PolicyTerm::Ppo => "ppo_loss",
            PolicyTerm::Replay => "replay_loss",
            PolicyTerm::Si => "si_loss",
            PolicyTerm::Total => "total_policy_loss",
        }
    }

    fn value(&self, params: &[f64]) -> Result<f64> {
        Ok(self.value_and_grad(params)?.0)
    }

    fn value_and_grad(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let theta = self.template.with_flat(params)?;
        match self.term {
            PolicyTerm::Ppo => {
                let (t, g) = ppo_loss_grad(&theta, &self.rows, self.hyper)?;
                Ok((t.total, g))
            }
            PolicyTerm::Replay => replay_loss_grad(&theta, self.coreset),
            PolicyTerm::Si => si_loss_grad_flat(params, self.regs),
            PolicyTerm::Total => {
                let (l, g, _) = total_policy_loss_grad(&theta, &self.rows, self.coreset, self.regs, self.hyper)?;
                Ok((l.total, g))
            }
        }
    }
}
