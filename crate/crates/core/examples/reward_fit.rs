//! Fits the progress model on noisy expert demos of one task, then reports
//! the loss reduction and the rank correlation of the learned potential with
//! time on held-out demos.
//!
//! cargo run --release --example reward_fit -- [task] [steps] [seed]

use progress_crl::numeric::{cosine_lr, AdamState, RngKey};
use progress_crl::reward::{
    expert_loss, potentials, sample_expert_triplets, update_reward_model, ObsNorm, ProgressModel, RewardHyper,
};
use progress_crl::stats::{mean, spearman};
use progress_crl::tasks::{generate_demos, TaskSpec};

fn main() -> progress_crl::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let task = TaskSpec::builtin(args.get(1).map(String::as_str).unwrap_or("press"))?;
    let steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(500);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let ks = RngKey::from_seed(seed).split_n(4);
    let demos = generate_demos(&task, 50, ks[0], 0.1, 0.0)?;
    let held = generate_demos(&task, 10, ks[1], 0.1, 0.0)?;
    let hyper = RewardHyper::default();
    let mut model = ProgressModel::new(&[64, 64, 64, 64], ks[2])?.with_norm(ObsNorm::fit(&demos));
    let mut adam = AdamState::new(model.num_params());
    let probe = sample_expert_triplets(&demos, ks[3].fold_in(u64::MAX), 4096)?;
    let initial = expert_loss(&model, &probe, &hyper)?;
    println!("step 0: expert_loss {initial:.4}");
    let t0 = std::time::Instant::now();
    for s in 0..steps {
        let batch = sample_expert_triplets(&demos, ks[3].fold_in(s as u64), 512)?;
        let lr = cosine_lr(1e-2, s, steps);
        (model, adam, _) = update_reward_model(&model, &adam, &batch, &[], &hyper, lr)?;
        if (s + 1) % 100 == 0 {
            println!("step {}: expert_loss {:.4}", s + 1, expert_loss(&model, &probe, &hyper)?);
        }
    }
    let last = expert_loss(&model, &probe, &hyper)?;
    println!("loss ratio {:.1}x in {:.1}s", initial / last, t0.elapsed().as_secs_f64());
    let rhos: Vec<f64> = held
        .iter()
        .map(|d| {
            let (o0, og) = (*d.first(), *d.last());
            let rows: Vec<_> = d.observations.iter().map(|o| (o0, *o, og)).collect();
            let phi = potentials(&model, &rows);
            let t: Vec<f64> = (0..phi.len()).map(|k| k as f64).collect();
            spearman(&phi, &t)
        })
        .collect();
    println!("held-out Spearman(phi, t): mean {:.3}", mean(&rhos));
    Ok(())
}
