use std::path::Path;

use rayon::prelude::*;

use super::{expert_rollout, TaskSpec, Trajectory, OBS_DIM};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::numeric::RngKey;

/// Rolls out the noisy scripted expert until `n` trajectories are collected,
/// `round(n * keep_failures)` of them failures. Attempt `i` uses
/// `key.fold_in(i)`; attempts are consumed in index order.
pub fn generate_demos(
    task: &TaskSpec,
    n: usize,
    key: RngKey,
    noise: f64,
    keep_failures: f64,
) -> Result<Vec<Trajectory>> {
    task.validate()?;
    if n == 0 {
        return Err(Error::Input("demo count must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&keep_failures) {
        return Err(Error::Input(format!(
            "keep_failures must lie in [0, 1], got {keep_failures}"
        )));
    }
    if !(noise >= 0.0) {
        return Err(Error::Input(format!("noise must be >= 0, got {noise}")));
    }
    let want_fail = (n as f64 * keep_failures).round() as usize;
    let want_succ = n - want_fail;
    let max_attempts = 10 * n;

    let mut succ = Vec::with_capacity(want_succ);
    let mut fail = Vec::with_capacity(want_fail);
    let mut order = Vec::with_capacity(n);
    let mut next = 0;
    while next < max_attempts && (succ.len() < want_succ || fail.len() < want_fail) {
        let end = (next + n).min(max_attempts);
        let wave: Vec<Result<Trajectory>> = (next..end)
            .into_par_iter()
            .map(|i| expert_rollout(task, key.fold_in(i as u64), noise))
            .collect();
        for tr in wave {
            let tr = tr?;
            if tr.success && succ.len() < want_succ {
                order.push(true);
                succ.push(tr);
            } else if !tr.success && fail.len() < want_fail {
                order.push(false);
                fail.push(tr);
            }
            if succ.len() == want_succ && fail.len() == want_fail {
                break;
            }
        }
        next = end;
    }
    if succ.len() < want_succ || fail.len() < want_fail {
        return Err(Error::Generation(format!(
            "task {}: got {}/{want_succ} successes and {}/{want_fail} failures in {max_attempts} attempts",
            task.task_id,
            succ.len(),
            fail.len()
        )));
    }
    // Keep collection order.
    let (mut s, mut f) = (succ.into_iter(), fail.into_iter());
    Ok(order
        .into_iter()
        .map(|ok| if ok { s.next().unwrap() } else { f.next().unwrap() })
        .collect())
}

/// One JSON object per line: `{"task_id": .., "success": .., "obs": [[f64; 8], ..]}`.
pub fn write_demos_jsonl(path: &Path, demos: &[Trajectory]) -> Result<()> {
    let mut out = String::new();
    for d in demos {
        out.push_str(&serde_json::to_string(d).map_err(|e| Error::Serde(e.to_string()))?);
        out.push('\n');
    }
    fsutil::write_atomic(path, out.as_bytes())
}

pub fn read_demos_jsonl(path: &Path) -> Result<Vec<Trajectory>> {
    let bytes = fsutil::read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))?;
    let mut demos = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let tr: Trajectory = serde_json::from_str(line)
            .map_err(|e| Error::Serde(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        if tr.len() < 2 {
            return Err(Error::Input(format!(
                "{}:{}: trajectory needs at least 2 observations",
                path.display(),
                lineno + 1
            )));
        }
        debug_assert!(tr.observations.iter().all(|o| o.0.len() == OBS_DIM));
        demos.push(tr);
    }
    Ok(demos)
}
