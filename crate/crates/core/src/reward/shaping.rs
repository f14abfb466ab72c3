use super::model::{ProgressModel, RewardHyper};
use crate::tasks::Observation;

/// `Phi(o_t)`: the mean head of the model on `(o_0, o_t, o_g)`.
pub fn potential(model: &ProgressModel, o_0: &Observation, o_t: &Observation, o_g: &Observation) -> f64 {
    model.predict_one(o_0, o_t, o_g).mu
}

/// Potentials for many `(o_0, o_t, o_g)` rows in one batched pass.
pub fn potentials(model: &ProgressModel, rows: &[(Observation, Observation, Observation)]) -> Vec<f64> {
    let buf = model.input_rows(rows.iter().map(|(a, b, c)| (a, b, c)));
    model.predict_rows(&buf).into_iter().map(|g| g.mu).collect()
}

/// `gamma * Phi(o_curr) - Phi(o_prev)`.
pub fn shaped_reward(
    model: &ProgressModel,
    o_prev: &Observation,
    o_curr: &Observation,
    o_0: &Observation,
    o_g: &Observation,
    hyper: &RewardHyper,
) -> f64 {
    let p = potentials(model, &[(*o_0, *o_prev, *o_g), (*o_0, *o_curr, *o_g)]);
    shape(p[0], p[1], hyper.gamma)
}

pub fn shape(phi_prev: f64, phi_curr: f64, gamma: f64) -> f64 {
    gamma * phi_curr - phi_prev
}

/// Shaped rewards `r_1..r_T` along one episode from its potentials `Phi_0..Phi_T`.
pub fn shaped_rewards_from_potentials(phis: &[f64], gamma: f64) -> Vec<f64> {
    phis.windows(2).map(|w| shape(w[0], w[1], gamma)).collect()
}
