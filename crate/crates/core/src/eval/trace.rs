use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::reward::{potentials, ProgressModel};
use crate::tasks::{Observation, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Expert,
    AgentSuccess,
    AgentFailure,
}

impl TraceKind {
    pub fn name(self) -> &'static str {
        match self {
            TraceKind::Expert => "expert",
            TraceKind::AgentSuccess => "agent_success",
            TraceKind::AgentFailure => "agent_failure",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "expert" => Ok(TraceKind::Expert),
            "agent_success" => Ok(TraceKind::AgentSuccess),
            "agent_failure" => Ok(TraceKind::AgentFailure),
            other => Err(Error::Input(format!("unknown trace kind {other:?}"))),
        }
    }
}

/// `Phi(o_t)` along one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialTrace {
    pub kind: TraceKind,
    pub values: Vec<(usize, f64)>,
}

impl PotentialTrace {
    pub fn phis(&self) -> Vec<f64> {
        self.values.iter().map(|(_, p)| *p).collect()
    }
}

/// `values[t] = Phi(o_0, o_t, goal)` for every step of `trajectory`.
pub fn export_potential_trace(
    phi: &ProgressModel,
    trajectory: &Trajectory,
    goal: &Observation,
    kind: TraceKind,
) -> Result<PotentialTrace> {
    if trajectory.len() < 2 {
        return Err(Error::Input("potential trace needs at least 2 observations".into()));
    }
    let o0 = *trajectory.first();
    let rows: Vec<_> = trajectory.observations.iter().map(|o| (o0, *o, *goal)).collect();
    Ok(PotentialTrace {
        kind,
        values: potentials(phi, &rows).into_iter().enumerate().collect(),
    })
}

/// CSV with header `kind,t,phi`.
pub fn traces_to_csv(traces: &[PotentialTrace]) -> String {
    let mut s = String::from("kind,t,phi\n");
    for tr in traces {
        for (t, p) in &tr.values {
            let _ = writeln!(s, "{},{t},{p}", tr.kind.name());
        }
    }
    s
}

pub fn traces_from_csv(text: &str) -> Result<Vec<PotentialTrace>> {
    let mut lines = text.lines();
    if lines.next() != Some("kind,t,phi") {
        return Err(Error::Input("potential trace CSV must start with `kind,t,phi`".into()));
    }
    let mut out: Vec<PotentialTrace> = Vec::new();
    for (n, line) in lines.enumerate() {
        let bad = || Error::Input(format!("trace CSV line {}: {line:?}", n + 2));
        let mut f = line.split(',');
        let (Some(k), Some(t), Some(p), None) = (f.next(), f.next(), f.next(), f.next()) else {
            return Err(bad());
        };
        let kind = TraceKind::parse(k)?;
        let t: usize = t.parse().map_err(|_| bad())?;
        let p: f64 = p.parse().map_err(|_| bad())?;
        match out.last_mut() {
            Some(tr) if tr.kind == kind && tr.values.last().is_some_and(|(prev, _)| *prev < t) => tr.values.push((t, p)),
            _ => out.push(PotentialTrace {
                kind,
                values: vec![(t, p)],
            }),
        }
    }
    Ok(out)
}

pub fn write_traces_csv(path: &Path, traces: &[PotentialTrace]) -> Result<()> {
    fsutil::write_atomic(path, traces_to_csv(traces).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{MlpParams, RngKey};
    use crate::reward::TRIPLET_WIDTH;

    fn model() -> ProgressModel {
        ProgressModel::from_net(MlpParams::init(&[TRIPLET_WIDTH, 8, 2], RngKey::from_seed(2)).unwrap()).unwrap()
    }

    fn traj(obs: Vec<Observation>) -> Trajectory {
        Trajectory {
            task_id: "press".into(),
            success: true,
            observations: obs,
        }
    }

    #[test]
    fn constant_trajectory_gives_constant_trace() {
        let o = Observation([0.3, -0.1, 0.0, 0.0, 0.2, 0.0, 0.0, 1.0]);
        let tr = export_potential_trace(&model(), &traj(vec![o; 6]), &o, TraceKind::Expert).unwrap();
        assert!(tr.values.iter().all(|(_, p)| *p == tr.values[0].1));
        assert!(export_potential_trace(&model(), &traj(vec![o]), &o, TraceKind::Expert).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = model();
        let mk = |k: usize| traj((0..5).map(|t| Observation([(t * k) as f64 * 0.13; 8])).collect());
        let g = Observation([1.0; 8]);
        let traces = vec![
            export_potential_trace(&m, &mk(1), &g, TraceKind::Expert).unwrap(),
            export_potential_trace(&m, &mk(2), &g, TraceKind::AgentFailure).unwrap(),
            export_potential_trace(&m, &mk(3), &g, TraceKind::AgentFailure).unwrap(),
        ];
        assert_eq!(traces_from_csv(&traces_to_csv(&traces)).unwrap(), traces);
    }
}
