//! Fits the progress model on expert demos, then exports the potential along
//! a held-out expert trajectory and along random-action trajectories.
//!
//! cargo run --release --example potential_trace -- [task] [out.csv]

use progress_crl::eval::trace::write_traces_csv;
use progress_crl::eval::{eval_with, export_potential_trace, TraceKind};
use progress_crl::numeric::{cosine_lr, AdamState, RngKey};
use progress_crl::reward::{sample_expert_triplets, update_reward_model, ObsNorm, ProgressModel, RewardHyper};
use progress_crl::tasks::{generate_demos, TaskSpec};

fn main() -> progress_crl::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let task = TaskSpec::builtin(args.get(1).map(String::as_str).unwrap_or("press"))?;
    let out = args.get(2).cloned().unwrap_or_else(|| "potential_trace.csv".into());
    let ks = RngKey::from_seed(3).split_n(4);
    let demos = generate_demos(&task, 50, ks[0], 0.1, 0.0)?;
    let hyper = RewardHyper::default();
    let mut phi = ProgressModel::new(&[64, 64, 64, 64], ks[1])?.with_norm(ObsNorm::fit(&demos));
    let mut adam = AdamState::new(phi.num_params());
    for s in 0..400 {
        let batch = sample_expert_triplets(&demos, ks[2].fold_in(s as u64), 512)?;
        (phi, adam, _) = update_reward_model(&phi, &adam, &batch, &[], &hyper, cosine_lr(1e-2, s, 400))?;
    }

    let held = generate_demos(&task, 1, ks[3], 0.1, 0.0)?.remove(0);
    let goal = *held.last();
    let random = eval_with(&task, 2, ks[3].fold_in(1), |t, states, _| {
        let mut s = ks[3].fold_in(2).fold_in(t as u64).stream();
        states.iter().map(|_| [s.uniform_range(-1.0, 1.0), s.uniform_range(-1.0, 1.0)]).collect()
    })?;
    let mut traces = vec![export_potential_trace(&phi, &held, &goal, TraceKind::Expert)?];
    for ep in &random.episodes {
        let kind = if ep.success { TraceKind::AgentSuccess } else { TraceKind::AgentFailure };
        traces.push(export_potential_trace(&phi, ep, &goal, kind)?);
    }
    for tr in &traces {
        let p = tr.phis();
        let at = |f: f64| p[((p.len() - 1) as f64 * f) as usize];
        println!(
            "{:<13} len {:>3}  phi at 0% {:+.3}  50% {:+.3}  100% {:+.3}",
            tr.kind.name(),
            p.len(),
            at(0.0),
            at(0.5),
            at(1.0)
        );
    }
    write_traces_csv(std::path::Path::new(&out), &traces)?;
    println!("wrote {out}");
    Ok(())
}
