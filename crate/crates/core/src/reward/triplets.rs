use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::RngKey;
use crate::tasks::Observation;

/// Anchor, intermediate and goal observation from one trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub o_i: Observation,
    pub o_j: Observation,
    pub o_g: Observation,
    /// `(j - i) / (g - i)`. Carried for agent triplets too, where it is ignored.
    pub delta: f64,
}

/// Relative position of `j` between `i` and `g`. Requires `i <= j <= g`, `g > i`.
pub fn progress_ratio(i: usize, j: usize, g: usize) -> f64 {
    debug_assert!(i <= j && j <= g && g > i);
    (j - i) as f64 / (g - i) as f64
}

/// Samples triplets: a trajectory uniformly, `i` in `[0, L-2]`, `g` in
/// `(i, L-1]`, `j` in `[i, g]`, all from the same trajectory.
pub fn sample_triplets<T: AsRef<[Observation]>>(
    trajectories: &[T],
    key: RngKey,
    batch: usize,
) -> Result<Vec<Triplet>> {
    if trajectories.is_empty() {
        return Err(Error::Input("cannot sample triplets from an empty trajectory set".into()));
    }
    if let Some(k) = trajectories.iter().position(|t| t.as_ref().len() < 2) {
        return Err(Error::Input(format!("trajectory {k} has fewer than 2 observations")));
    }
    let mut s = key.stream();
    Ok((0..batch)
        .map(|_| {
            let traj = trajectories[s.below(trajectories.len())].as_ref();
            let len = traj.len();
            let i = s.below(len - 1);
            let g = i + 1 + s.below(len - 1 - i);
            let j = i + s.below(g - i + 1);
            Triplet {
                o_i: traj[i],
                o_j: traj[j],
                o_g: traj[g],
                delta: progress_ratio(i, j, g),
            }
        })
        .collect())
}

/// Expert triplets drawn from a demo set.
pub fn sample_expert_triplets<T: AsRef<[Observation]>>(
    demos: &[T],
    key: RngKey,
    batch: usize,
) -> Result<Vec<Triplet>> {
    sample_triplets(demos, key, batch)
}

/// Agent triplets conditioned on each episode's goal anchor: `i` and `j >= i`
/// from episode `e`, `o_g = goals[e]`. `delta` is set to 0.
pub fn sample_anchored_triplets<T: AsRef<[Observation]>>(
    episodes: &[T],
    goals: &[Observation],
    key: RngKey,
    batch: usize,
) -> Result<Vec<Triplet>> {
    if episodes.is_empty() || episodes.len() != goals.len() {
        return Err(Error::Input(format!(
            "anchored triplets need one goal per episode, got {} episodes and {} goals",
            episodes.len(),
            goals.len()
        )));
    }
    if let Some(k) = episodes.iter().position(|t| t.as_ref().is_empty()) {
        return Err(Error::Input(format!("episode {k} is empty")));
    }
    let mut s = key.stream();
    Ok((0..batch)
        .map(|_| {
            let e = s.below(episodes.len());
            let traj = episodes[e].as_ref();
            let i = s.below(traj.len());
            let j = i + s.below(traj.len() - i);
            Triplet {
                o_i: traj[i],
                o_j: traj[j],
                o_g: goals[e],
                delta: 0.0,
            }
        })
        .collect())
}
