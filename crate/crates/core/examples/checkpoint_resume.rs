//! Trains a few steps, checkpoints, reloads, and shows that the resumed step
//! matches the uninterrupted one bit for bit. Also shows what a corrupted
//! file reports.
//!
//! cargo run --release --example checkpoint_resume

use progress_crl::continual::Coreset;
use progress_crl::eval::{checkpoint_load, checkpoint_save, CheckpointData};
use progress_crl::numeric::RngKey;
use progress_crl::trainer::{task_demos, train_step, AgentState, TrainConfig};

fn main() -> progress_crl::Result<()> {
    let config = TrainConfig {
        n_envs: 16,
        ..TrainConfig::default()
    };
    let task = config.task_specs()?.remove(0);
    let demos = task_demos(&config, &task, 0)?;
    let coreset = Coreset::new(config.coreset_capacity);
    let mut state = AgentState::init(&config, &demos, RngKey::from_seed(1))?;
    for k in 0..3 {
        state = train_step(&state, &coreset, &[], &demos, &task, &config, RngKey::from_seed(k))?.0;
    }

    let dir = std::env::temp_dir().join("pcrl_checkpoint_example");
    std::fs::create_dir_all(&dir).map_err(|e| progress_crl::Error::io(&dir, e))?;
    let path = dir.join("state.bin");
    let data = CheckpointData {
        state: state.clone(),
        coreset: coreset.clone(),
        regs: Vec::new(),
        config: config.clone(),
        tasks_done: 0,
    };
    checkpoint_save(&data, &path)?;
    let size = std::fs::metadata(&path).map_err(|e| progress_crl::Error::io(&path, e))?.len();
    println!("saved step {} to {} ({size} bytes)", state.step, path.display());

    let back = checkpoint_load(&path)?;
    let key = RngKey::from_seed(99);
    let (a, _, ma) = train_step(&state, &coreset, &[], &demos, &task, &config, key)?;
    let (b, _, mb) = train_step(&back.state, &back.coreset, &back.regs, &demos, &task, &back.config, key)?;
    println!("resumed step identical: {}", a == b && ma == mb);
    println!("  ppo loss {:.6} vs {:.6}", ma.ppo_loss, mb.ppo_loss);

    let mut bytes = std::fs::read(&path).map_err(|e| progress_crl::Error::io(&path, e))?;
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    let bad = dir.join("corrupt.bin");
    std::fs::write(&bad, &bytes).map_err(|e| progress_crl::Error::io(&bad, e))?;
    match checkpoint_load(&bad) {
        Ok(_) => println!("corrupted file loaded (unexpected)"),
        Err(e) => println!("corrupted file rejected: {e}"),
    }
    Ok(())
}
