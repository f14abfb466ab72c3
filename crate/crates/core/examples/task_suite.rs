//! Scripted-expert quality on each built-in task.
//!
//! ```bash
//! cargo run --release --example task_suite
//! ```

use progress_crl::numeric::RngKey;
use progress_crl::tasks::{expert_rollout, TaskSpec};

fn main() -> progress_crl::Result<()> {
    for task in TaskSpec::suite() {
        for noise in [0.0, 0.1, 0.3] {
            let runs: Vec<_> = (0..200)
                .map(|i| expert_rollout(&task, RngKey::from_seed(1).fold_in(i), noise))
                .collect::<Result<_, _>>()?;
            let ok: Vec<_> = runs.iter().filter(|r| r.success).collect();
            let mean_len = ok.iter().map(|r| r.len() as f64).sum::<f64>() / ok.len().max(1) as f64;
            let max_len = ok.iter().map(|r| r.len()).max().unwrap_or(0);
            println!(
                "{:<6} noise {:.1}: success {:>5.1}%  mean length {:>5.1}  max length {}",
                task.task_id,
                noise,
                100.0 * ok.len() as f64 / runs.len() as f64,
                mean_len,
                max_len
            );
        }
    }
    Ok(())
}
