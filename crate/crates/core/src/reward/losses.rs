use std::ops::Range;

use super::model::{ObsNorm, ProgressModel, RewardHyper, TRIPLET_WIDTH};
use super::triplets::Triplet;
use crate::error::{ensure_finite, Error, Result};
use crate::numeric::gaussian::{kl_gaussian_grad, positive_sigma, sigmoid, GaussianParams};
use crate::numeric::objective::chunked_value_and_grad;
use crate::numeric::{AdamState, MlpParams, Objective};

#[derive(Clone, Copy, Debug, PartialEq)]
enum Term {
    Expert { model_first: bool },
    Push,
}

/// Per-row KL term and its derivatives with respect to the two raw outputs.
fn row_term(term: Term, raw: &[f64], delta: f64, hyper: &RewardHyper) -> Result<(f64, f64, f64)> {
    let model = GaussianParams {
        mu: raw[0],
        sigma: positive_sigma(raw[1]),
    };
    let ds_draw = sigmoid(raw[1]);
    let (value, d_mu, d_sigma) = match term {
        Term::Expert { model_first: false } => {
            let target = GaussianParams {
                mu: delta,
                sigma: hyper.sigma_target,
            };
            let g = kl_gaussian_grad(target, model)?;
            (g.value, g.d_mu_q, g.d_sigma_q)
        }
        Term::Expert { model_first: true } => {
            let target = GaussianParams {
                mu: delta,
                sigma: hyper.sigma_target,
            };
            let g = kl_gaussian_grad(model, target)?;
            (g.value, g.d_mu_p, g.d_sigma_p)
        }
        Term::Push => {
            let prior = GaussianParams {
                mu: 0.0,
                sigma: hyper.sigma_prior,
            };
            let g = kl_gaussian_grad(model, prior)?;
            (g.value, g.d_mu_p, g.d_sigma_p)
        }
    };
    Ok((value, d_mu, d_sigma * ds_draw))
}

/// Mean KL term over `rows`, plus `scale *` its gradient. Returns 0 and a zero
/// gradient for an empty batch.
fn mean_term(
    net: &MlpParams,
    term: Term,
    rows: &[f64],
    deltas: &[f64],
    hyper: &RewardHyper,
    scale: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = deltas.len();
    let dim = net.num_params();
    if n == 0 {
        return Ok((0.0, vec![0.0; dim]));
    }
    let inv = 1.0 / n as f64;
    let (sum, grad) = chunked_value_and_grad(n, dim, |r: Range<usize>| {
        let batch = r.len();
        let cache = net.forward_cached(&rows[r.start * TRIPLET_WIDTH..r.end * TRIPLET_WIDTH], batch);
        let out = cache.output();
        let mut d_out = vec![0.0; 2 * batch];
        let mut sum = 0.0;
        for k in 0..batch {
            let (v, dm, ds) = row_term(term, &out[2 * k..2 * k + 2], deltas[r.start + k], hyper)?;
            sum += v;
            d_out[2 * k] = scale * inv * dm;
            d_out[2 * k + 1] = scale * inv * ds;
        }
        let mut g = vec![0.0; dim];
        net.backward(&cache, &d_out, &mut g, None);
        Ok((sum, g))
    })?;
    Ok((sum * inv, grad))
}

fn expert_term(hyper: &RewardHyper) -> Term {
    Term::Expert {
        model_first: hyper.expert_kl_model_first,
    }
}

fn deltas(triplets: &[Triplet]) -> Vec<f64> {
    triplets.iter().map(|t| t.delta).collect()
}

/// Mean `KL(N(delta, sigma_target^2) || E(triplet))` and its gradient.
pub fn expert_loss_grad(model: &ProgressModel, triplets: &[Triplet], hyper: &RewardHyper) -> Result<(f64, Vec<f64>)> {
    mean_term(
        &model.net,
        expert_term(hyper),
        &model.triplet_rows(triplets),
        &deltas(triplets),
        hyper,
        1.0,
    )
}

pub fn expert_loss(model: &ProgressModel, triplets: &[Triplet], hyper: &RewardHyper) -> Result<f64> {
    Ok(expert_loss_grad(model, triplets, hyper)?.0)
}

/// Mean `KL(E(triplet) || N(0, sigma_prior^2))` and its gradient.
pub fn push_loss_grad(model: &ProgressModel, triplets: &[Triplet], hyper: &RewardHyper) -> Result<(f64, Vec<f64>)> {
    mean_term(
        &model.net,
        Term::Push,
        &model.triplet_rows(triplets),
        &deltas(triplets),
        hyper,
        1.0,
    )
}

pub fn push_loss(model: &ProgressModel, triplets: &[Triplet], hyper: &RewardHyper) -> Result<f64> {
    Ok(push_loss_grad(model, triplets, hyper)?.0)
}

/// Components of one evaluation of the joint reward loss.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardLoss {
    pub total: f64,
    pub expert: f64,
    pub push: f64,
}

/// `expert + beta * push`. With `beta == 0` or no agent triplets the push term
/// is skipped and `total` equals the expert loss bit for bit.
pub fn reward_loss_grad(
    model: &ProgressModel,
    expert: &[Triplet],
    agent: &[Triplet],
    hyper: &RewardHyper,
) -> Result<(RewardLoss, Vec<f64>)> {
    if expert.is_empty() {
        return Err(Error::Input("reward loss needs at least one expert triplet".into()));
    }
    let (e, mut grad) = expert_loss_grad(model, expert, hyper)?;
    if hyper.beta == 0.0 || agent.is_empty() {
        return Ok((
            RewardLoss {
                total: e,
                expert: e,
                push: 0.0,
            },
            grad,
        ));
    }
    let (p, pg) = mean_term(
        &model.net,
        Term::Push,
        &model.triplet_rows(agent),
        &deltas(agent),
        hyper,
        hyper.beta,
    )?;
    for (g, x) in grad.iter_mut().zip(&pg) {
        *g += x;
    }
    Ok((
        RewardLoss {
            total: e + hyper.beta * p,
            expert: e,
            push: p,
        },
        grad,
    ))
}

pub fn reward_loss(model: &ProgressModel, expert: &[Triplet], agent: &[Triplet], hyper: &RewardHyper) -> Result<f64> {
    Ok(reward_loss_grad(model, expert, agent, hyper)?.0.total)
}

/// One Adam step on the joint reward loss. Returns the loss evaluated before
/// the step.
pub fn update_reward_model(
    model: &ProgressModel,
    adam: &AdamState,
    expert: &[Triplet],
    agent: &[Triplet],
    hyper: &RewardHyper,
    lr: f64,
) -> Result<(ProgressModel, AdamState, RewardLoss)> {
    let (loss, grad) = reward_loss_grad(model, expert, agent, hyper)?;
    ensure_finite("reward_loss", loss.total)?;
    let mut next = model.clone();
    let mut adam = adam.clone();
    adam.step(next.net.as_mut_slice(), &grad, lr)?;
    Ok((next, adam, loss))
}

/// Which reward-model loss an [`RewardObjective`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardTerm {
    Expert,
    Push,
    Joint,
}

/// A reward-model loss as a function of the flat parameter vector.
pub struct RewardObjective<'a> {
    pub dims: &'a [usize],
    pub norm: ObsNorm,
    pub term: RewardTerm,
    pub expert: &'a [Triplet],
    pub agent: &'a [Triplet],
    pub hyper: &'a RewardHyper,
}

impl RewardObjective<'_> {
    fn model(&self, params: &[f64]) -> Result<ProgressModel> {
        Ok(ProgressModel::from_net(MlpParams::from_flat(self.dims, params.to_vec())?)?.with_norm(self.norm))
    }
}

impl Objective for RewardObjective<'_> {
    fn name(&self) -> &str {
        match self.term {
            RewardTerm::Expert => "expert_loss",
            RewardTerm::Push => "push_loss",
            RewardTerm::Joint => "reward_loss",
        }
    }

    fn value(&self, params: &[f64]) -> Result<f64> {
        Ok(self.value_and_grad(params)?.0)
    }

    fn value_and_grad(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let m = self.model(params)?;
        match self.term {
            RewardTerm::Expert => expert_loss_grad(&m, self.expert, self.hyper),
            RewardTerm::Push => push_loss_grad(&m, self.agent, self.hyper),
            RewardTerm::Joint => {
                let (l, g) = reward_loss_grad(&m, self.expert, self.agent, self.hyper)?;
                Ok((l.total, g))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_model(hidden: &[usize], key: RngKey) -> ProgressModel {
        let mut dims = vec![TRIPLET_WIDTH];
        dims.extend_from_slice(hidden);
        dims.push(2);
        ProgressModel::from_net(MlpParams::init(&dims, key).unwrap()).unwrap()
    }
    use crate::numeric::RngKey;
    use crate::tasks::Observation;

    /// A model whose raw output is the constant `(mu, raw_sigma)`.
    fn constant_model(mu: f64, sigma: f64) -> ProgressModel {
        let mut net = MlpParams::zeros(&[TRIPLET_WIDTH, 2]).unwrap();
        let (_, b) = net.layer_mut(0);
        b[0] = mu;
        // Inverse of softplus(x) + 1e-4.
        let s = sigma - 1e-4;
        b[1] = s + (-(-s).exp_m1()).ln();
        ProgressModel::from_net(net).unwrap()
    }

    fn triplet(delta: f64, seed: u64) -> Triplet {
        let mut s = RngKey::from_seed(seed).stream();
        let mut obs = || {
            let mut o = [0.0; 8];
            for v in o.iter_mut() {
                *v = s.uniform_range(-1.0, 1.0);
            }
            Observation(o)
        };
        Triplet {
            o_i: obs(),
            o_j: obs(),
            o_g: obs(),
            delta,
        }
    }

    #[test]
    fn expert_loss_zero_at_target() {
        let h = RewardHyper::default();
        let m = constant_model(0.3, h.sigma_target);
        let ts: Vec<_> = (0..5).map(|k| triplet(0.3, k)).collect();
        assert!(expert_loss(&m, &ts, &h).unwrap() < 1e-9);
    }

    #[test]
    fn expert_loss_single_triplet_closed_form() {
        let h = RewardHyper::default();
        let m = constant_model(0.0, 0.1);
        let l = expert_loss(&m, &[triplet(1.0, 0)], &h).unwrap();
        assert!((l - 50.0).abs() < 1e-6, "{l}");
    }

    #[test]
    fn push_loss_closed_forms() {
        let h = RewardHyper::default();
        let t = [triplet(0.0, 1)];
        assert!(push_loss(&constant_model(0.0, 1.0), &t, &h).unwrap() < 1e-9);
        let l = push_loss(&constant_model(1.0, 1.0), &t, &h).unwrap();
        assert!((l - 0.5).abs() < 1e-6, "{l}");
    }

    #[test]
    fn beta_zero_is_bitwise_expert_loss() {
        let h = RewardHyper {
            beta: 0.0,
            ..Default::default()
        };
        let m = random_model(&[8], RngKey::from_seed(3));
        let e: Vec<_> = (0..40).map(|k| triplet((k % 7) as f64 / 7.0, k)).collect();
        let a: Vec<_> = (0..30).map(|k| triplet(0.0, 100 + k)).collect();
        let joint = reward_loss(&m, &e, &a, &h).unwrap();
        assert_eq!(joint.to_bits(), expert_loss(&m, &e, &h).unwrap().to_bits());
    }

    #[test]
    fn joint_is_linear_combination() {
        let h = RewardHyper::default();
        let m = random_model(&[8], RngKey::from_seed(4));
        let e: Vec<_> = (0..10).map(|k| triplet(0.5, k)).collect();
        let a: Vec<_> = (0..10).map(|k| triplet(0.0, 50 + k)).collect();
        let (l, _) = reward_loss_grad(&m, &e, &a, &h).unwrap();
        let want = expert_loss(&m, &e, &h).unwrap() + 0.5 * push_loss(&m, &a, &h).unwrap();
        assert!((l.total - want).abs() < 1e-12);
    }

    #[test]
    fn conflicting_terms_keep_loss_positive() {
        let h = RewardHyper {
            beta: 1.0,
            ..Default::default()
        };
        let t = [triplet(0.7, 2)];
        for (mu, s) in [(0.7, 0.1), (0.0, 1.0), (0.35, 0.5)] {
            assert!(reward_loss(&constant_model(mu, s), &t, &t, &h).unwrap() > 0.0);
        }
    }

    #[test]
    fn zero_learning_rate_leaves_model() {
        let h = RewardHyper::default();
        let m = random_model(&[8], RngKey::from_seed(5));
        let e: Vec<_> = (0..10).map(|k| triplet(0.5, k)).collect();
        let (m2, _, _) = update_reward_model(&m, &AdamState::new(m.num_params()), &e, &[], &h, 0.0).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn empty_expert_batch_rejected() {
        let h = RewardHyper::default();
        let m = constant_model(0.0, 1.0);
        assert!(reward_loss(&m, &[], &[], &h).is_err());
    }
}
