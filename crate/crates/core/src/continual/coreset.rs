use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::RngKey;
use crate::policy::RolloutBatch;
use crate::tasks::{Action, Observation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoresetEntry {
    pub obs: Observation,
    /// Unclamped action as sampled during collection.
    pub action: Action,
    /// Normalized advantage at insertion time, never recomputed.
    pub advantage: f64,
    pub task_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coreset {
    pub entries: Vec<CoresetEntry>,
    pub capacity_per_task: usize,
}

impl Coreset {
    pub fn new(capacity_per_task: usize) -> Self {
        Coreset {
            entries: Vec::new(),
            capacity_per_task,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Task ids in order of first appearance.
    pub fn task_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !ids.contains(&e.task_id.as_str()) {
                ids.push(&e.task_id);
            }
        }
        ids
    }

    pub fn count(&self, task_id: &str) -> usize {
        self.entries.iter().filter(|e| e.task_id == task_id).count()
    }
}

/// Replaces `task_id`'s entries with the `capacity_per_task` transitions of
/// largest positive advantage from the last `n_keep` batches. Ties go to the
/// earlier batch, then the earlier step, then the lower env index.
pub fn update_coreset(m: &Coreset, rollouts: &[RolloutBatch], task_id: &str, n_keep: usize) -> Result<Coreset> {
    if rollouts.is_empty() {
        return Err(Error::Input("update_coreset needs at least one rollout batch".into()));
    }
    let first = rollouts.len().saturating_sub(n_keep.max(1));
    // (advantage, batch, t, env)
    let mut cands: Vec<(f64, usize, usize, usize)> = Vec::new();
    for (b, batch) in rollouts.iter().enumerate().skip(first) {
        if batch.advantages.len() != batch.len() {
            return Err(Error::Input(format!("rollout batch {b} has no advantages")));
        }
        for e in 0..batch.n_envs {
            for t in 0..batch.horizon {
                let a = batch.advantages[batch.index(e, t)];
                if a > 0.0 {
                    cands.push((a, b, t, e));
                }
            }
        }
    }
    cands.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2, x.3).cmp(&(y.1, y.2, y.3))));
    cands.truncate(m.capacity_per_task);
    let mut out = Coreset {
        entries: m.entries.iter().filter(|e| e.task_id != task_id).cloned().collect(),
        capacity_per_task: m.capacity_per_task,
    };
    out.entries.extend(cands.into_iter().map(|(a, b, t, e)| {
        let batch = &rollouts[b];
        let i = batch.index(e, t);
        CoresetEntry {
            obs: batch.obs[i],
            action: batch.actions[i],
            advantage: a,
            task_id: task_id.to_string(),
        }
    }));
    Ok(out)
}

/// Uniform sampling with replacement, split equally across the task ids
/// present. A remainder goes one each to the earliest tasks.
pub fn sample_coreset(m: &Coreset, key: RngKey, batch: usize) -> Vec<CoresetEntry> {
    if m.is_empty() || batch == 0 {
        return Vec::new();
    }
    let ids = m.task_ids();
    let per: Vec<Vec<&CoresetEntry>> = ids
        .iter()
        .map(|id| m.entries.iter().filter(|e| e.task_id == *id).collect())
        .collect();
    let base = batch / ids.len();
    let extra = batch % ids.len();
    let mut s = key.stream();
    let mut out = Vec::with_capacity(batch);
    for (k, pool) in per.iter().enumerate() {
        let n = base + usize::from(k < extra);
        for _ in 0..n {
            out.push(pool[s.below(pool.len())].clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch_with(adv: &[f64]) -> RolloutBatch {
        let n = adv.len();
        RolloutBatch {
            n_envs: 1,
            horizon: n,
            obs: (0..n).map(|k| Observation([k as f64, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])).collect(),
            final_obs: vec![Observation([0.0; 8])],
            actions: vec![[0.0, 0.0]; n],
            log_probs: vec![0.0; n],
            shaped_rewards: vec![0.0; n],
            values: vec![0.0; n],
            dones: vec![false; n],
            successes: vec![false; n],
            potentials: vec![0.0; n + 1],
            bootstrap_values: vec![0.0],
            advantages: adv.to_vec(),
            returns: vec![0.0; n],
        }
    }

    #[test]
    fn keeps_top_positive_advantages() {
        let m = update_coreset(&Coreset::new(2), &[batch_with(&[3.0, 1.0, 2.0, -1.0])], "a", 10).unwrap();
        let mut a: Vec<f64> = m.entries.iter().map(|e| e.advantage).collect();
        a.sort_by(f64::total_cmp);
        assert_eq!(a, vec![2.0, 3.0]);
    }

    #[test]
    fn ties_prefer_earlier_collection() {
        let m = update_coreset(&Coreset::new(1), &[batch_with(&[1.0, 5.0, 5.0])], "a", 10).unwrap();
        assert_eq!(m.entries[0].obs.0[0], 1.0);
    }

    #[test]
    fn same_task_replaces_and_others_untouched() {
        let b = [batch_with(&[1.0, 2.0, 3.0])];
        let m = update_coreset(&Coreset::new(2), &b, "a", 10).unwrap();
        let m = update_coreset(&m, &b, "b", 10).unwrap();
        let before: Vec<_> = m.entries.iter().filter(|e| e.task_id == "b").cloned().collect();
        let m = update_coreset(&m, &[batch_with(&[9.0])], "a", 10).unwrap();
        assert_eq!((m.count("a"), m.count("b")), (1, 2));
        let after: Vec<_> = m.entries.iter().filter(|e| e.task_id == "b").cloned().collect();
        assert_eq!(before, after);
    }

    #[test]
    fn only_last_n_keep_batches_count() {
        let bs = [batch_with(&[100.0]), batch_with(&[1.0]), batch_with(&[2.0])];
        let m = update_coreset(&Coreset::new(5), &bs, "a", 2).unwrap();
        assert_eq!(m.len(), 2);
        assert!(m.entries.iter().all(|e| e.advantage < 100.0));
    }

    #[test]
    fn capacity_bound_exhaustive() {
        let adv: Vec<f64> = (0..40).map(|k| (k as f64 * 0.7).sin()).collect();
        let positives = adv.iter().filter(|a| **a > 0.0).count();
        let b = [batch_with(&adv)];
        let mut m = Coreset::new(16);
        for (k, id) in ["a", "b", "c"].iter().enumerate() {
            m = update_coreset(&m, &b, id, 10).unwrap();
            assert_eq!(m.len(), positives.min(16) * (k + 1));
            assert!(m.task_ids().iter().all(|t| m.count(t) <= 16));
        }
    }

    #[test]
    fn sampling_is_stratified_and_deterministic() {
        let b = [batch_with(&[1.0, 2.0, 3.0])];
        let m = update_coreset(&Coreset::new(8), &b, "a", 10).unwrap();
        let m = update_coreset(&m, &[batch_with(&[4.0])], "b", 10).unwrap();
        let s = sample_coreset(&m, RngKey::from_seed(1), 10);
        assert_eq!(s.iter().filter(|e| e.task_id == "a").count(), 5);
        assert_eq!(s.iter().filter(|e| e.task_id == "b").count(), 5);
        assert_eq!(s, sample_coreset(&m, RngKey::from_seed(1), 10));
        assert!(sample_coreset(&Coreset::new(4), RngKey::from_seed(1), 10).is_empty());
    }
}
