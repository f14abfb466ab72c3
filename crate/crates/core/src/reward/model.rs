use serde::{Deserialize, Serialize};

use super::triplets::Triplet;
use crate::error::{Error, Result};
use crate::numeric::gaussian::{positive_sigma, GaussianParams};
use crate::numeric::{MlpParams, RngKey};
use crate::tasks::{Observation, OBS_DIM};

pub const TRIPLET_WIDTH: usize = 3 * OBS_DIM;

/// Gaussian progress predictor over `(o_i, o_j, o_g)` triplets.
///
/// The network maps the concatenated triplet to two raw outputs; the mean is
/// `raw[0]` and the deviation `softplus(raw[1]) + 1e-4`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressModel {
    pub net: MlpParams,
    /// Per-feature standardization applied to each observation slot.
    pub norm: ObsNorm,
}

/// Affine map `(o - shift) / scale` applied to observations before the net.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObsNorm {
    pub shift: [f64; OBS_DIM],
    pub scale: [f64; OBS_DIM],
}

impl Default for ObsNorm {
    fn default() -> Self {
        ObsNorm {
            shift: [0.0; OBS_DIM],
            scale: [1.0; OBS_DIM],
        }
    }
}

impl ObsNorm {
    /// Mean and standard deviation of every feature over all observations.
    /// Features with deviation below `1e-6` keep unit scale.
    pub fn fit<T: AsRef<[Observation]>>(trajectories: &[T]) -> Self {
        let mut n = 0.0;
        let mut sum = [0.0; OBS_DIM];
        let mut sq = [0.0; OBS_DIM];
        for t in trajectories {
            for o in t.as_ref() {
                n += 1.0;
                for k in 0..OBS_DIM {
                    sum[k] += o.0[k];
                    sq[k] += o.0[k] * o.0[k];
                }
            }
        }
        if n == 0.0 {
            return ObsNorm::default();
        }
        let mut out = ObsNorm::default();
        for k in 0..OBS_DIM {
            let m = sum[k] / n;
            let sd = (sq[k] / n - m * m).max(0.0).sqrt();
            out.shift[k] = m;
            out.scale[k] = if sd < 1e-6 { 1.0 } else { sd };
        }
        out
    }

    fn push(&self, buf: &mut Vec<f64>, o: &Observation) {
        for k in 0..OBS_DIM {
            buf.push((o.0[k] - self.shift[k]) / self.scale[k]);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardHyper {
    /// Deviation of the progress target distribution.
    pub sigma_target: f64,
    /// Deviation of the zero-mean low-confidence prior.
    pub sigma_prior: f64,
    /// Weight of the push-back term.
    pub beta: f64,
    /// Shaping discount, shared with the policy's advantage estimator.
    pub gamma: f64,
    /// Use `KL(model || target)` in the expert term instead of `KL(target || model)`.
    pub expert_kl_model_first: bool,
}

impl Default for RewardHyper {
    fn default() -> Self {
        RewardHyper {
            sigma_target: 0.1,
            sigma_prior: 1.0,
            beta: 0.5,
            gamma: 0.99,
            expert_kl_model_first: false,
        }
    }
}

impl RewardHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_target > 0.0) {
            return Err(Error::config("reward.sigma_target must be > 0"));
        }
        if !(self.sigma_prior > 0.0) {
            return Err(Error::config("reward.sigma_prior must be > 0"));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::config("reward.beta must be >= 0"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("reward.gamma must lie in (0, 1]"));
        }
        Ok(())
    }
}

impl ProgressModel {
    /// Glorot-initialized hidden layers and a zero output layer, so an
    /// untrained model predicts `N(0, softplus(0)^2)` everywhere.
    pub fn new(hidden: &[usize], key: RngKey) -> Result<Self> {
        let mut dims = vec![TRIPLET_WIDTH];
        dims.extend_from_slice(hidden);
        dims.push(2);
        let mut net = MlpParams::init(&dims, key)?;
        let last = net.num_layers() - 1;
        let (w, b) = net.layer_mut(last);
        w.fill(0.0);
        b.fill(0.0);
        Ok(ProgressModel {
            net,
            norm: ObsNorm::default(),
        })
    }

    pub fn from_net(net: MlpParams) -> Result<Self> {
        if net.input_dim() != TRIPLET_WIDTH || net.output_dim() != 2 {
            return Err(Error::config(format!(
                "progress net must map {TRIPLET_WIDTH} -> 2, got {:?}",
                net.dims()
            )));
        }
        Ok(ProgressModel {
            net,
            norm: ObsNorm::default(),
        })
    }

    pub fn with_norm(mut self, norm: ObsNorm) -> Self {
        self.norm = norm;
        self
    }

    /// Network input rows for `(o_i, o_j, o_g)` triples.
    pub fn input_rows<'a, I>(&self, triples: I) -> Vec<f64>
    where
        I: IntoIterator<Item = (&'a Observation, &'a Observation, &'a Observation)>,
    {
        let iter = triples.into_iter();
        let mut rows = Vec::with_capacity(iter.size_hint().0 * TRIPLET_WIDTH);
        for (a, b, c) in iter {
            self.norm.push(&mut rows, a);
            self.norm.push(&mut rows, b);
            self.norm.push(&mut rows, c);
        }
        rows
    }

    pub fn triplet_rows(&self, triplets: &[Triplet]) -> Vec<f64> {
        self.input_rows(triplets.iter().map(|t| (&t.o_i, &t.o_j, &t.o_g)))
    }

    pub fn num_params(&self) -> usize {
        self.net.num_params()
    }

    /// Predicted Gaussians for a flat `[batch x 24]` buffer of normalized rows.
    pub fn predict_rows(&self, rows: &[f64]) -> Vec<GaussianParams> {
        let batch = rows.len() / TRIPLET_WIDTH;
        self.net
            .forward_rows(rows, batch)
            .chunks_exact(2)
            .map(|raw| GaussianParams {
                mu: raw[0],
                sigma: positive_sigma(raw[1]),
            })
            .collect()
    }

    pub fn predict(&self, triplets: &[Triplet]) -> Vec<GaussianParams> {
        self.predict_rows(&self.triplet_rows(triplets))
    }

    pub fn predict_one(&self, o_i: &Observation, o_j: &Observation, o_g: &Observation) -> GaussianParams {
        self.predict_rows(&self.input_rows([(o_i, o_j, o_g)]))[0]
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

    #[test]
    fn predicted_sigma_is_positive() {
        let m = random_model(&[16], RngKey::from_seed(0));
        let mut rows = vec![0.0; 5 * TRIPLET_WIDTH];
        for (i, v) in rows.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin() * 50.0;
        }
        assert!(m.predict_rows(&rows).iter().all(|g| g.sigma > 0.0));
    }

    #[test]
    fn hyper_validation() {
        assert!(RewardHyper::default().validate().is_ok());
        let h = RewardHyper {
            gamma: 0.0,
            ..Default::default()
        };
        assert!(h.validate().is_err());
        let h = RewardHyper {
            sigma_prior: -1.0,
            ..Default::default()
        };
        assert!(h.validate().is_err());
    }

    #[test]
    fn norm_fit_standardizes() {
        let traj: Vec<Observation> = (0..5)
            .map(|k| Observation([k as f64, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]))
            .collect();
        let n = ObsNorm::fit(&[traj]);
        assert_eq!(n.shift[0], 2.0);
        assert!((n.scale[0] - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!((n.shift[1], n.scale[1]), (2.0, 1.0));
    }

    #[test]
    fn wrong_net_shape_rejected() {
        let net = MlpParams::zeros(&[8, 2]).unwrap();
        assert!(ProgressModel::from_net(net).is_err());
    }
}
