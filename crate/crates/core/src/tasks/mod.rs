//! Point-mass manipulation tasks sharing one observation and action space.
//!
//! An agent in the plane pushes on a button; while inside the button's
//! contact radius the component of its action pointing at the button moves a
//! scalar object coordinate (a button depth, a door or window angle). Tasks
//! differ in coupling sign and magnitude, button placement and the direction
//! the object has to travel.

mod demos;
mod env;
mod expert;

pub use demos::{generate_demos, read_demos_jsonl, write_demos_jsonl};
pub use env::{env_reset, env_step, step_one};
pub use expert::{expert_rollout, scripted_expert};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OBS_DIM: usize = 8;
pub const ACT_DIM: usize = 2;

pub type Action = [f64; ACT_DIM];

/// `[agent_pos(2), agent_vel(2), obj_q, button_pos(2), obj_target]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn obj_q(&self) -> f64 {
        self.0[4]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub coupling: f64,
    pub friction: f64,
    pub contact_radius: f64,
    pub object_start: f64,
    pub object_target: f64,
    pub button_pos: [f64; 2],
    pub horizon: usize,
    pub success_tol: f64,
    pub dt: f64,
}

pub const TASK_IDS: [&str; 3] = ["press", "open", "close"];

impl TaskSpec {
    fn base(task_id: &str, coupling: f64, start: f64, target: f64, button_x: f64) -> Self {
        TaskSpec {
            task_id: task_id.to_string(),
            coupling,
            friction: 0.1,
            contact_radius: 0.2,
            object_start: start,
            object_target: target,
            button_pos: [button_x, 0.0],
            horizon: 100,
            success_tol: 0.05,
            dt: 0.05,
        }
    }

    /// Centre button; pushing toward it drives the object from 0 to 1.
    pub fn press() -> Self {
        Self::base("press", 2.0, 0.0, 1.0, 0.0)
    }

    /// Button offset right with negative coupling: the agent must push away
    /// from the button while in contact to drive the object from 0 to 1.
    pub fn open() -> Self {
        Self::base("open", -4.0, 0.0, 1.0, 0.4)
    }

    /// Button offset left; pushing toward it drives the object from 1 to 0.
    pub fn close() -> Self {
        Self::base("close", -2.0, 1.0, 0.0, -0.4)
    }

    pub fn builtin(task_id: &str) -> Result<Self> {
        match task_id {
            "press" => Ok(Self::press()),
            "open" => Ok(Self::open()),
            "close" => Ok(Self::close()),
            other => Err(Error::config(format!(
                "unknown task id {other:?}; expected one of {TASK_IDS:?}"
            ))),
        }
    }

    pub fn suite() -> Vec<Self> {
        vec![Self::press(), Self::open(), Self::close()]
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::config("task horizon must be >= 1"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("task dt must be > 0"));
        }
        if !(self.success_tol > 0.0) {
            return Err(Error::config("task success_tol must be > 0"));
        }
        if !(0.0..1.0).contains(&self.friction) {
            return Err(Error::config("task friction must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn is_success(&self, obj_q: f64) -> bool {
        (obj_q - self.object_target).abs() < self.success_tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub agent_pos: [f64; 2],
    pub agent_vel: [f64; 2],
    pub obj_q: f64,
    pub t: usize,
    /// Sticky success flag: once set it stays set until reset.
    pub succeeded: bool,
}

impl EnvState {
    pub fn observe(&self, task: &TaskSpec) -> Observation {
        Observation([
            self.agent_pos[0],
            self.agent_pos[1],
            self.agent_vel[0],
            self.agent_vel[1],
            self.obj_q,
            task.button_pos[0],
            task.button_pos[1],
            task.object_target,
        ])
    }
}

/// An unlabeled state trajectory: observations only, no actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub success: bool,
    #[serde(rename = "obs")]
    pub observations: Vec<Observation>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn first(&self) -> &Observation {
        &self.observations[0]
    }

    pub fn last(&self) -> &Observation {
        self.observations.last().unwrap()
    }
}

impl AsRef<[Observation]> for Trajectory {
    fn as_ref(&self) -> &[Observation] {
        &self.observations
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: Action,
    pub next_obs: Observation,
    pub done: bool,
    pub success: bool,
}

pub fn clamp_action(a: Action) -> Action {
    [a[0].clamp(-1.0, 1.0), a[1].clamp(-1.0, 1.0)]
}
