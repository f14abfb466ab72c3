//! Evaluation metrics, potential traces, checkpoints and run outputs.

pub mod checkpoint;
pub mod metrics;
pub mod output;
pub mod trace;

pub use checkpoint::{checkpoint_load, checkpoint_save, CheckpointData};
pub use metrics::{
    compute_ap, compute_regret, eval_expert, eval_policy, eval_with, mean_shaped_return, EvalOutcome,
};
pub use output::{MetricsTable, RunManifest};
pub use trace::{export_potential_trace, PotentialTrace, TraceKind};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Evaluation of every task seen so far at a task boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_task_success: BTreeMap<String, f64>,
    /// Mean discounted shaped return of the evaluation episodes.
    pub eval_reward: f64,
    pub ap: f64,
    pub regret: f64,
    pub checkpoint_step: u64,
}
