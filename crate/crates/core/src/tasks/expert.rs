use super::{clamp_action, env_reset, step_one, Action, EnvState, TaskSpec, Trajectory};
use crate::error::Result;
use crate::numeric::RngKey;

const APPROACH_GAIN: f64 = 10.0;
const APPROACH_DAMPING: f64 = 1.0;
const OBJECT_GAIN: f64 = 10.0;

/// Two-phase controller. Outside the contact radius it drives the agent to
/// the button; inside it pushes along the button direction with the sign and
/// size that move the object toward its target. Gaussian noise of scale
/// `noise` is added before clamping to the action box.
pub fn scripted_expert(task: &TaskSpec, state: &EnvState, key: RngKey, noise: f64) -> Action {
    let d = [
        task.button_pos[0] - state.agent_pos[0],
        task.button_pos[1] - state.agent_pos[1],
    ];
    let dist = d[0].hypot(d[1]);
    let mut a = if dist >= task.contact_radius {
        [
            APPROACH_GAIN * d[0] - APPROACH_DAMPING * state.agent_vel[0],
            APPROACH_GAIN * d[1] - APPROACH_DAMPING * state.agent_vel[1],
        ]
    } else if dist > 1e-12 {
        let push = (OBJECT_GAIN * (task.object_target - state.obj_q) / task.coupling).clamp(-1.0, 1.0);
        [push * d[0] / dist, push * d[1] / dist]
    } else {
        [0.0, 0.0]
    };
    if noise > 0.0 {
        let mut s = key.stream();
        a[0] += noise * s.normal();
        a[1] += noise * s.normal();
    }
    clamp_action(a)
}

/// One expert episode. The trajectory stops at the first successful
/// observation; failed episodes run to the horizon.
pub fn expert_rollout(task: &TaskSpec, key: RngKey, noise: f64) -> Result<Trajectory> {
    let (reset_key, act_key) = key.split();
    let mut state = env_reset(task, reset_key, 1)[0];
    let mut observations = vec![state.observe(task)];
    while state.t < task.horizon && !state.succeeded {
        let a = scripted_expert(task, &state, act_key.fold_in(state.t as u64), noise);
        state = step_one(task, &state, a)?;
        observations.push(state.observe(task));
    }
    Ok(Trajectory {
        task_id: task.task_id.clone(),
        success: state.succeeded,
        observations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controller_at_setpoint_is_quiet() {
        for task in TaskSpec::suite() {
            let s = EnvState {
                agent_pos: [task.button_pos[0] + 0.01, task.button_pos[1]],
                agent_vel: [0.0, 0.0],
                obj_q: task.object_target,
                t: 0,
                succeeded: false,
            };
            let a = scripted_expert(&task, &s, RngKey::from_seed(0), 0.0);
            assert!(a[0].hypot(a[1]) < 0.05, "{a:?}");
        }
    }

    #[test]
    fn drives_right_when_left_of_button() {
        let task = TaskSpec::open();
        let s = EnvState {
            agent_pos: [-1.0, 0.0],
            agent_vel: [0.0, 0.0],
            obj_q: 0.0,
            t: 0,
            succeeded: false,
        };
        assert!(scripted_expert(&task, &s, RngKey::from_seed(0), 0.0)[0] > 0.0);
    }

    #[test]
    fn noiseless_expert_solves_every_task() {
        for task in TaskSpec::suite() {
            let ok = (0..100)
                .filter(|&i| expert_rollout(&task, RngKey::from_seed(5).fold_in(i), 0.0).unwrap().success)
                .count();
            assert!(ok >= 95, "{}: {ok}/100", task.task_id);
        }
    }

    #[test]
    fn successful_rollouts_stop_at_success() {
        let task = TaskSpec::press();
        let tr = expert_rollout(&task, RngKey::from_seed(3), 0.0).unwrap();
        assert!(tr.success);
        assert!(task.is_success(tr.last().obj_q()));
        assert!(tr.len() >= 2 && tr.len() <= task.horizon + 1);
    }
}
