//! Runs the press -> open -> close sequence for one variant and prints the
//! evaluation of every seen task at each boundary.
//!
//! cargo run --release --example continual_sequence -- [variant] [steps_per_task] [seed]

use progress_crl::trainer::{train_sequence_with, RunEvent, TrainConfig, Variant};

fn main() -> progress_crl::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let variant = Variant::parse(args.get(1).map(String::as_str).unwrap_or("full"))?;
    let steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(150);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let config = TrainConfig {
        steps_per_task: steps,
        seed,
        ..variant.apply(&TrainConfig::default())
    };
    println!("variant {} seed {seed}, {steps} steps per task", variant.name());
    let run = train_sequence_with(&config, &mut |ev| {
        match ev {
            RunEvent::Eval(e) => println!("  step {:4} {:<6} eval success {:.2}", e.step, e.task_id, e.success),
            RunEvent::Boundary(r) => {
                let per: Vec<String> = r.per_task_success.iter().map(|(t, s)| format!("{t} {s:.2}")).collect();
                println!(
                    "boundary at step {}: {}  AP {:.3}  regret {:.3}  eval reward {:+.3}",
                    r.checkpoint_step,
                    per.join(", "),
                    r.ap,
                    r.regret,
                    r.eval_reward
                );
            }
            RunEvent::Step(_) => {}
        }
        Ok(())
    })?;
    println!("coreset entries {}, SI regularizers {}", run.coreset.len(), run.regs.len());
    Ok(())
}
