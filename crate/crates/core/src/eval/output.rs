use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::EvalReport;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::trainer::{EvalPoint, RunEvent, StepMetrics, TrainConfig};

pub const METRICS_HEADER: &str = "step,task_id,metric,value";
pub const SUMMARY_HEADER: &str = "variant,seed,task_id,success_rate,ap,regret";

/// Long-format metrics table accumulated in memory and written atomically.
#[derive(Clone, Debug, Default)]
pub struct MetricsTable {
    text: String,
}

impl MetricsTable {
    pub fn new() -> Self {
        MetricsTable {
            text: format!("{METRICS_HEADER}\n"),
        }
    }

    fn row(&mut self, step: u64, task: &str, metric: &str, value: f64) {
        let _ = writeln!(self.text, "{step},{task},{metric},{value}");
    }

    pub fn push_step(&mut self, m: &StepMetrics) {
        for (name, v) in m.scalars() {
            self.row(m.step, &m.task_id, name, v);
        }
    }

    pub fn push_eval(&mut self, e: &EvalPoint) {
        self.row(e.step, &e.task_id, "eval_success", e.success);
    }

    pub fn push_report(&mut self, r: &EvalReport) {
        for (task, s) in &r.per_task_success {
            self.row(r.checkpoint_step, task, "boundary_success", *s);
        }
        self.row(r.checkpoint_step, "all", "ap", r.ap);
        self.row(r.checkpoint_step, "all", "regret", r.regret);
        self.row(r.checkpoint_step, "all", "eval_reward", r.eval_reward);
    }

    pub fn push_event(&mut self, ev: &RunEvent<'_>) {
        match ev {
            RunEvent::Step(m) => self.push_step(m),
            RunEvent::Eval(e) => self.push_eval(e),
            RunEvent::Boundary(r) => self.push_report(r),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.text.as_bytes())
    }
}

/// One row per task with its final success, plus an `all` row carrying the
/// run's AP and regret.
pub fn summary_rows(variant: &str, seed: u64, report: &EvalReport) -> String {
    let mut s = String::new();
    for (task, v) in &report.per_task_success {
        let _ = writeln!(s, "{variant},{seed},{task},{v},,");
    }
    let _ = writeln!(s, "{variant},{seed},all,,{},{}", report.ap, report.regret);
    s
}

pub fn write_summary(path: &Path, rows: &str) -> Result<()> {
    fsutil::write_atomic(path, format!("{SUMMARY_HEADER}\n{rows}").as_bytes())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: TrainConfig,
    pub seed: u64,
    pub code_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<PathBuf>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn new(config: &TrainConfig, started_unix: u64) -> Self {
        RunManifest {
            config: config.clone(),
            seed: config.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix,
            finished_unix: started_unix,
            outputs: Vec::new(),
        }
    }

    /// Stamps the end time and writes the manifest as JSON. Fails if a listed
    /// output is missing.
    pub fn finish(&mut self, path: &Path) -> Result<()> {
        self.finished_unix = unix_now();
        self.verify()?;
        let json = serde_json::to_vec_pretty(self).map_err(|e| Error::Serde(e.to_string()))?;
        fsutil::write_atomic(path, &json)
    }

    pub fn verify(&self) -> Result<()> {
        match self.outputs.iter().find(|p| !p.exists()) {
            Some(p) => Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound))),
            None => Ok(()),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_slice(&fsutil::read(path)?).map_err(|e| Error::Serde(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn metrics_rows_are_long_format() {
        let mut t = MetricsTable::new();
        t.push_step(&StepMetrics {
            step: 3,
            task_id: "press".into(),
            reward_loss: 0.5,
            ..StepMetrics::default()
        });
        let lines: Vec<&str> = t.as_str().lines().collect();
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines[1], "3,press,reward_loss,0.5");
        assert_eq!(lines.len(), 1 + 11);
    }

    #[test]
    fn summary_has_run_row() {
        let r = EvalReport {
            per_task_success: BTreeMap::from([("open".to_string(), 0.5), ("press".to_string(), 1.0)]),
            eval_reward: 0.1,
            ap: 0.75,
            regret: 0.2,
            checkpoint_step: 10,
        };
        assert_eq!(summary_rows("full", 1, &r), "full,1,open,0.5,,\nfull,1,press,1,,\nfull,1,all,,0.75,0.2\n");
    }

    #[test]
    fn manifest_requires_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new(&TrainConfig::default(), 0);
        m.outputs.push(dir.path().join("missing.csv"));
        assert!(m.finish(&dir.path().join("manifest.json")).is_err());
        m.outputs.clear();
        m.finish(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(RunManifest::load(&dir.path().join("manifest.json")).unwrap(), m);
    }
}
