//! Collects one shaped-reward rollout batch and applies a single PPO update,
//! printing the loss terms and how far the policy moved.
//!
//! cargo run --release --example ppo_update -- [n_envs]

use progress_crl::continual::Coreset;
use progress_crl::numeric::RngKey;
use progress_crl::policy::policy_update;
use progress_crl::trainer::{collect_rollouts, task_demos, AgentState, TrainConfig};

fn main() -> progress_crl::Result<()> {
    let n_envs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(32);
    let config = TrainConfig {
        n_envs,
        ..TrainConfig::default()
    };
    let task = config.task_specs()?.remove(0);
    let demos = task_demos(&config, &task, 0)?;
    let state = AgentState::init(&config, &demos, RngKey::from_seed(5))?;
    let batch = collect_rollouts(&state, &task, &demos, &config, RngKey::from_seed(6))?;
    let n = batch.len() as f64;
    println!(
        "{} transitions, mean shaped reward {:+.3e}, success rate {:.2}",
        batch.len(),
        batch.shaped_rewards.iter().sum::<f64>() / n,
        batch.successes.iter().filter(|s| **s).count() as f64 / n
    );

    let up = policy_update(
        &state.theta,
        &state.adam_theta,
        &batch,
        &Coreset::new(config.coreset_capacity),
        &[],
        &config.effective_ppo(),
        config.lr_policy,
        RngKey::from_seed(7),
    )?;
    let m = &up.metrics;
    println!(
        "ppo loss {:.4}  surrogate {:+.4}  value {:.4}  entropy {:.4}  clip frac {:.3}  ({} Adam steps)",
        m.ppo_loss, m.surrogate, m.value_loss, m.entropy, m.clip_frac, m.adam_steps
    );
    let before = state.theta.flatten();
    let after = up.theta.flatten();
    let moved = before.iter().zip(&after).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    println!("parameter change L2 {moved:.5} over {} parameters", before.len());
    Ok(())
}
