//! Trains one task from scratch and prints progress every 10 steps.
//!
//! cargo run --release --example single_task -- [task] [steps] [seed]

use std::time::Instant;

use progress_crl::eval::eval_policy;
use progress_crl::trainer::{eval_key, task_demos, train_task, AgentState, RunEvent, TrainConfig};
use progress_crl::continual::Coreset;
use progress_crl::numeric::RngKey;

fn main() -> progress_crl::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let task_id = args.get(1).map(String::as_str).unwrap_or("press");
    let steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(300);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);

    let config = TrainConfig {
        tasks: vec![task_id.to_string()],
        steps_per_task: steps,
        seed,
        ..TrainConfig::default()
    };
    config.validate()?;
    let task = config.task_specs()?.remove(0);
    let demos = task_demos(&config, &task, 0)?;
    let state = AgentState::init(&config, &demos, RngKey::from_seed(seed))?;
    let start = Instant::now();
    let mut sink = |ev: RunEvent<'_>| {
        match ev {
            RunEvent::Step(m) if m.step % 10 == 0 => println!(
                "step {:4}  rollout success {:.2}  shaped {:+.4}  expert {:.3}  push {:.3}  entropy {:.3}  {:.1}s",
                m.step,
                m.rollout_success_rate,
                m.mean_shaped_reward,
                m.expert_loss,
                m.push_loss,
                m.entropy,
                start.elapsed().as_secs_f64()
            ),
            RunEvent::Eval(c) => println!("eval at step {}: success {:.2}", c.step, c.success),
            _ => {}
        }
        Ok(())
    };
    let run = train_task(&state, &task, &Coreset::new(config.coreset_capacity), &[], &demos, &config, &mut sink)?;
    let fin = eval_policy(&run.state.theta, &task, config.eval_episodes, eval_key(seed, task_id))?;
    println!("final deterministic success {:.2} after {} steps ({:.1}s)", fin.success_rate, steps, start.elapsed().as_secs_f64());
    Ok(())
}
