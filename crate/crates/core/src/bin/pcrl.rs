use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use progress_crl::eval::output::{summary_rows, write_summary};
use progress_crl::eval::trace::write_traces_csv;
use progress_crl::eval::{
    checkpoint_load, checkpoint_save, compute_ap, eval_policy, export_potential_trace, CheckpointData, MetricsTable,
    RunManifest, TraceKind,
};
use progress_crl::numeric::objective::with_threads;
use progress_crl::numeric::RngKey;
use progress_crl::stats::median;
use progress_crl::tasks::{generate_demos, write_demos_jsonl, TaskSpec};
use progress_crl::trainer::{eval_key, train_sequence_with, RunResult, TrainConfig, Variant};
use progress_crl::{Error, Result};

/// Worker-count override. Results never depend on it.
const THREADS_VAR: &str = "PCRL_THREADS";

#[derive(Parser)]
#[command(name = "pcrl", version, about = "Continual RL with learned progress rewards")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train on the configured task sequence.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on every task it has trained.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 30)]
        episodes: usize,
    },
    /// Run one ablation variant over several seeds.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "full")]
        variant: String,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value = "ablate_out")]
        out: PathBuf,
    },
    /// Export potential traces of expert and agent trajectories.
    Trace {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        task: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate scripted-expert demonstrations as JSONL.
    Demos {
        #[arg(long)]
        task: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::load(p),
        None => Ok(TrainConfig::default()),
    }
}

/// Trains one run into `out`: metrics.csv (rewritten at every task boundary
/// and on failure), summary.csv, checkpoint.bin, manifest.json.
fn run_into(config: &TrainConfig, variant: &str, out: &Path) -> Result<RunResult> {
    let started = progress_crl::eval::output::unix_now();
    let metrics_path = out.join("metrics.csv");
    let mut table = MetricsTable::new();
    let result = train_sequence_with(config, &mut |ev| {
        table.push_event(&ev);
        if let progress_crl::trainer::RunEvent::Boundary(r) = ev {
            table.write(&metrics_path)?;
            eprintln!("[{variant} seed {}] step {}: AP {:.3} regret {:.3}", config.seed, r.checkpoint_step, r.ap, r.regret);
        }
        Ok(())
    });
    table.write(&metrics_path)?;
    let result = result?;
    let last = result.reports.last().ok_or_else(|| Error::Input("run produced no report".into()))?;
    let summary_path = out.join("summary.csv");
    write_summary(&summary_path, &summary_rows(variant, config.seed, last))?;
    let ckpt_path = out.join("checkpoint.bin");
    checkpoint_save(
        &CheckpointData {
            state: result.state.clone(),
            coreset: result.coreset.clone(),
            regs: result.regs.clone(),
            config: config.clone(),
            tasks_done: config.tasks.len(),
        },
        &ckpt_path,
    )?;
    let mut manifest = RunManifest::new(config, started);
    manifest.outputs = vec![metrics_path, summary_path, ckpt_path];
    manifest.finish(&out.join("manifest.json"))?;
    Ok(result)
}

fn train(config: Option<PathBuf>, seed: Option<u64>, out: PathBuf) -> Result<()> {
    let mut config = load_config(config.as_deref())?;
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    let r = run_into(&config, "custom", &out)?;
    if let Some(last) = r.reports.last() {
        println!("final AP {:.3}  regret {:.3}", last.ap, last.regret);
        for (t, s) in &last.per_task_success {
            println!("  {t}: success {s:.3}");
        }
    }
    Ok(())
}

fn eval(checkpoint: PathBuf, episodes: usize) -> Result<()> {
    let ck = checkpoint_load(&checkpoint)?;
    let specs = ck.config.task_specs()?;
    let seen = &specs[..ck.tasks_done.clamp(1, specs.len())];
    let mut per_task = BTreeMap::new();
    for task in seen {
        let out = eval_policy(&ck.state.theta, task, episodes, eval_key(ck.config.seed, &task.task_id))?;
        println!("{}: success {:.3}  true reward {:.3}", task.task_id, out.success_rate, out.mean_true_reward);
        per_task.insert(task.task_id.clone(), out.success_rate);
    }
    println!("AP {:.3} at step {}", compute_ap(&per_task)?, ck.state.step);
    Ok(())
}

fn ablate(config: Option<PathBuf>, variant: &str, seeds: u64, out: PathBuf) -> Result<()> {
    let v = Variant::parse(variant)?;
    let base = v.apply(&load_config(config.as_deref())?);
    base.validate()?;
    let mut rows = String::new();
    let mut aps = Vec::new();
    for s in 0..seeds {
        let c = TrainConfig {
            seed: base.seed + s,
            ..base.clone()
        };
        let r = run_into(&c, v.name(), &out.join(format!("{}_seed{}", v.name(), c.seed)))?;
        let last = r.reports.last().ok_or_else(|| Error::Input("run produced no report".into()))?;
        rows.push_str(&summary_rows(v.name(), c.seed, last));
        aps.push(last.ap);
    }
    write_summary(&out.join(format!("summary_{}.csv", v.name())), &rows)?;
    println!("{}: median AP {:.3} over {seeds} seeds", v.name(), median(&aps));
    Ok(())
}

fn trace(checkpoint: PathBuf, task_id: &str, out: PathBuf) -> Result<()> {
    let ck = checkpoint_load(&checkpoint)?;
    let mut task = TaskSpec::builtin(task_id)?;
    task.horizon = ck.config.rollout_horizon;
    let key = RngKey::from_seed(ck.config.seed).fold_in(0x5452_4143);
    let expert = generate_demos(&task, 1, key, ck.config.demo_noise, 0.0)?.remove(0);
    let goal = *expert.last();
    let agent = eval_policy(&ck.state.theta, &task, ck.config.eval_episodes, key.fold_in(1))?;
    let mut traces = vec![export_potential_trace(&ck.state.phi, &expert, &goal, TraceKind::Expert)?];
    if let Some(ep) = agent.episodes.iter().find(|e| e.success) {
        traces.push(export_potential_trace(&ck.state.phi, ep, &goal, TraceKind::AgentSuccess)?);
    }
    if let Some(ep) = agent.episodes.iter().find(|e| !e.success) {
        traces.push(export_potential_trace(&ck.state.phi, ep, &goal, TraceKind::AgentFailure)?);
    }
    write_traces_csv(&out, &traces)?;
    println!("wrote {} traces to {}", traces.len(), out.display());
    Ok(())
}

fn demos(task_id: &str, n: usize, noise: f64, seed: u64, out: PathBuf) -> Result<()> {
    let task = TaskSpec::builtin(task_id)?;
    let d = generate_demos(&task, n, RngKey::from_seed(seed), noise, 0.0)?;
    write_demos_jsonl(&out, &d)?;
    println!("wrote {} demos to {}", d.len(), out.display());
    Ok(())
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Train { config, seed, out } => train(config, seed, out),
        Cmd::Eval { checkpoint, episodes } => eval(checkpoint, episodes),
        Cmd::Ablate {
            config,
            variant,
            seeds,
            out,
        } => ablate(config, &variant, seeds, out),
        Cmd::Trace { checkpoint, task, out } => trace(checkpoint, &task, out),
        Cmd::Demos {
            task,
            n,
            noise,
            seed,
            out,
        } => demos(&task, n, noise, seed, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var(THREADS_VAR).ok().and_then(|v| v.parse().ok());
    match with_threads(threads, || dispatch(cli.cmd)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
