use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::gaussian::LN_2PI;
use crate::numeric::{MlpParams, RngKey};
use crate::tasks::{Action, Observation, ACT_DIM, OBS_DIM};

/// Separate actor and critic trunks plus a state-independent log-std.
///
/// Flat layout: actor parameters, then `log_std`, then critic parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub actor: MlpParams,
    pub log_std: Vec<f64>,
    pub critic: MlpParams,
}

pub(crate) fn obs_rows(obs: &[Observation]) -> Vec<f64> {
    let mut rows = Vec::with_capacity(obs.len() * OBS_DIM);
    for o in obs {
        rows.extend_from_slice(o.as_slice());
    }
    rows
}

impl PolicyParams {
    /// Glorot init for both trunks; the actor's output layer is scaled by
    /// 0.01 so initial action means sit near zero.
    pub fn new(hidden: &[usize], key: RngKey, init_log_std: f64) -> Result<Self> {
        let (ka, kc) = key.split();
        let mut dims = vec![OBS_DIM];
        dims.extend_from_slice(hidden);
        dims.push(ACT_DIM);
        let mut actor = MlpParams::init(&dims, ka)?;
        let last = actor.num_layers() - 1;
        let (w, _) = actor.layer_mut(last);
        w.iter_mut().for_each(|x| *x *= 0.01);
        *dims.last_mut().unwrap() = 1;
        let critic = MlpParams::init(&dims, kc)?;
        Ok(PolicyParams {
            actor,
            log_std: vec![init_log_std; ACT_DIM],
            critic,
        })
    }

    pub fn num_params(&self) -> usize {
        self.actor.num_params() + self.log_std.len() + self.critic.num_params()
    }

    /// Offset of `log_std` in the flat layout.
    pub fn log_std_offset(&self) -> usize {
        self.actor.num_params()
    }

    /// Offset of the critic in the flat layout.
    pub fn critic_offset(&self) -> usize {
        self.actor.num_params() + self.log_std.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(self.actor.as_slice());
        v.extend_from_slice(&self.log_std);
        v.extend_from_slice(self.critic.as_slice());
        v
    }

    /// Overwrites every parameter from a flat vector in this layout.
    pub fn assign(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::config(format!(
                "policy parameter vector has {} entries, expected {}",
                flat.len(),
                self.num_params()
            )));
        }
        let (a, rest) = flat.split_at(self.actor.num_params());
        let (s, c) = rest.split_at(self.log_std.len());
        self.actor.as_mut_slice().copy_from_slice(a);
        self.log_std.copy_from_slice(s);
        self.critic.as_mut_slice().copy_from_slice(c);
        Ok(())
    }

    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        let mut p = self.clone();
        p.assign(flat)?;
        Ok(p)
    }

    pub fn action_means(&self, obs: &[Observation]) -> Vec<Action> {
        self.actor
            .forward_rows(&obs_rows(obs), obs.len())
            .chunks_exact(ACT_DIM)
            .map(|m| [m[0], m[1]])
            .collect()
    }

    pub fn values(&self, obs: &[Observation]) -> Vec<f64> {
        self.critic.forward_rows(&obs_rows(obs), obs.len())
    }

    /// Log-density of `action` under `N(mean, diag(exp(log_std))^2)`.
    pub fn log_prob(&self, mean: &Action, action: &Action) -> f64 {
        (0..ACT_DIM)
            .map(|d| {
                let z = (action[d] - mean[d]) / self.log_std[d].exp();
                -0.5 * z * z - self.log_std[d] - 0.5 * LN_2PI
            })
            .sum()
    }

    /// Differential entropy of the action distribution (state independent).
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|s| s + 0.5 * (1.0 + LN_2PI)).sum()
    }
}

/// Samples actions from the Gaussian policy. Row `i` draws its noise from
/// `key.fold_in(i)`. Returns the unclamped samples and their log-probs; the
/// environment clamps to the action box.
pub fn act(theta: &PolicyParams, obs: &[Observation], key: RngKey) -> (Vec<Action>, Vec<f64>) {
    let means = theta.action_means(obs);
    let std: Vec<f64> = theta.log_std.iter().map(|s| s.exp()).collect();
    means
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut s = key.fold_in(i as u64).stream();
            let a = [m[0] + std[0] * s.normal(), m[1] + std[1] * s.normal()];
            (a, theta.log_prob(m, &a))
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(n: usize) -> Vec<Observation> {
        let mut s = RngKey::from_seed(42).stream();
        (0..n)
            .map(|_| {
                let mut o = [0.0; OBS_DIM];
                o.iter_mut().for_each(|v| *v = s.uniform_range(-1.0, 1.0));
                Observation(o)
            })
            .collect()
    }

    #[test]
    fn flatten_assign_round_trip() {
        let p = PolicyParams::new(&[16, 16], RngKey::from_seed(1), -0.5).unwrap();
        let flat = p.flatten();
        assert_eq!(flat.len(), p.num_params());
        let mut q = PolicyParams::new(&[16, 16], RngKey::from_seed(2), 0.0).unwrap();
        q.assign(&flat).unwrap();
        assert_eq!(p, q);
        assert!(q.assign(&flat[1..]).is_err());
    }

    #[test]
    fn near_deterministic_sample_hits_mean() {
        let p = PolicyParams::new(&[16], RngKey::from_seed(3), -10.0).unwrap();
        let o = obs(20);
        let (a, _) = act(&p, &o, RngKey::from_seed(4));
        for (a, m) in a.iter().zip(p.action_means(&o)) {
            assert!((a[0] - m[0]).abs() < 1e-3 && (a[1] - m[1]).abs() < 1e-3);
        }
    }

    #[test]
    fn sampling_is_deterministic_in_key() {
        let p = PolicyParams::new(&[16], RngKey::from_seed(3), 0.0).unwrap();
        let o = obs(10);
        assert_eq!(act(&p, &o, RngKey::from_seed(5)), act(&p, &o, RngKey::from_seed(5)));
        assert_ne!(act(&p, &o, RngKey::from_seed(5)).0, act(&p, &o, RngKey::from_seed(6)).0);
    }

    #[test]
    fn log_prob_matches_density_product() {
        let p = PolicyParams::new(&[16], RngKey::from_seed(7), 0.3).unwrap();
        let o = obs(10);
        let (a, lp) = act(&p, &o, RngKey::from_seed(8));
        let sd = 0.3f64.exp();
        for ((a, lp), m) in a.iter().zip(&lp).zip(p.action_means(&o)) {
            let dens: f64 = (0..2)
                .map(|d| {
                    let z = (a[d] - m[d]) / sd;
                    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
                })
                .product();
            assert!((lp - dens.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn samples_are_not_clamped() {
        let p = PolicyParams::new(&[8], RngKey::from_seed(9), 1.5).unwrap();
        let (a, _) = act(&p, &obs(200), RngKey::from_seed(10));
        assert!(a.iter().any(|a| a[0].abs() > 1.0));
    }
}
