use super::{clamp_action, Action, EnvState, Observation, TaskSpec};
use crate::error::{Error, Result};
use crate::numeric::objective::chunked_map;
use crate::numeric::RngKey;

/// Fresh episodes: agent uniform in `[-1, 1]^2` at rest, object at its start.
/// Row `i` draws from `key.fold_in(i)`, so rows do not depend on batch size.
pub fn env_reset(task: &TaskSpec, key: RngKey, batch: usize) -> Vec<EnvState> {
    (0..batch)
        .map(|i| {
            let mut s = key.fold_in(i as u64).stream();
            EnvState {
                agent_pos: [s.uniform_range(-1.0, 1.0), s.uniform_range(-1.0, 1.0)],
                agent_vel: [0.0, 0.0],
                obj_q: task.object_start,
                t: 0,
                succeeded: false,
            }
        })
        .collect()
}

/// One semi-implicit Euler step of a single environment row.
pub fn step_one(task: &TaskSpec, state: &EnvState, action: Action) -> Result<EnvState> {
    if state.t >= task.horizon {
        return Err(Error::EpisodeExhausted {
            t: state.t,
            horizon: task.horizon,
        });
    }
    if !(action[0].is_finite() && action[1].is_finite()) {
        return Err(Error::numerical("env_step", format!("non-finite action {action:?}")));
    }
    let a = clamp_action(action);
    let keep = 1.0 - task.friction;
    let vel = [
        keep * state.agent_vel[0] + task.dt * a[0],
        keep * state.agent_vel[1] + task.dt * a[1],
    ];
    let pos = [
        state.agent_pos[0] + task.dt * vel[0],
        state.agent_pos[1] + task.dt * vel[1],
    ];
    let to_button = [task.button_pos[0] - pos[0], task.button_pos[1] - pos[1]];
    let dist = to_button[0].hypot(to_button[1]);
    let mut obj_q = state.obj_q;
    if dist < task.contact_radius && dist > 1e-12 {
        let toward = (a[0] * to_button[0] + a[1] * to_button[1]) / dist;
        obj_q += task.dt * task.coupling * toward;
    }
    Ok(EnvState {
        agent_pos: pos,
        agent_vel: vel,
        obj_q,
        t: state.t + 1,
        succeeded: state.succeeded || task.is_success(obj_q),
    })
}

/// Batched step. Returns next states, their observations and the sticky
/// success flags, row for row.
pub fn env_step(
    task: &TaskSpec,
    states: &[EnvState],
    actions: &[Action],
) -> Result<(Vec<EnvState>, Vec<Observation>, Vec<bool>)> {
    if states.len() != actions.len() {
        return Err(Error::config(format!(
            "{} states but {} actions",
            states.len(),
            actions.len()
        )));
    }
    let rows: Vec<Result<EnvState>> = chunked_map(states.len(), |r| {
        r.map(|i| step_one(task, &states[i], actions[i])).collect()
    });
    let next = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let obs = next.iter().map(|s| s.observe(task)).collect();
    let success = next.iter().map(|s| s.succeeded).collect();
    Ok((next, obs, success))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(pos: [f64; 2], vel: [f64; 2]) -> EnvState {
        EnvState {
            agent_pos: pos,
            agent_vel: vel,
            obj_q: 0.0,
            t: 0,
            succeeded: false,
        }
    }

    #[test]
    fn reset_is_deterministic_and_initialized() {
        let task = TaskSpec::press();
        let k = RngKey::from_seed(11);
        let a = env_reset(&task, k, 1000);
        assert_eq!(a, env_reset(&task, k, 1000));
        assert!(a.iter().all(|s| s.obj_q == task.object_start && s.t == 0));
        assert!(a.iter().all(|s| s.agent_vel == [0.0, 0.0]));
        let mx = a.iter().map(|s| s.agent_pos[0]).sum::<f64>() / 1000.0;
        let my = a.iter().map(|s| s.agent_pos[1]).sum::<f64>() / 1000.0;
        assert!(mx.abs() < 0.1 && my.abs() < 0.1, "mean ({mx}, {my})");
    }

    #[test]
    fn zero_action_outside_contact_is_fixed_point() {
        let task = TaskSpec::press();
        let s = at([0.8, 0.8], [0.0, 0.0]);
        let n = step_one(&task, &s, [0.0, 0.0]).unwrap();
        assert_eq!(n.agent_pos, s.agent_pos);
        assert_eq!(n.agent_vel, s.agent_vel);
        assert_eq!(n.obj_q, s.obj_q);
        assert_eq!(n.t, 1);
    }

    #[test]
    fn euler_arithmetic() {
        let mut task = TaskSpec::press();
        task.friction = 0.0;
        task.button_pos = [5.0, 5.0];
        let n = step_one(&task, &at([0.0, 0.0], [1.0, 0.0]), [0.0, 0.0]).unwrap();
        assert!((n.agent_pos[0] - 0.05).abs() < 1e-15);
        assert_eq!(n.agent_pos[1], 0.0);
    }

    #[test]
    fn object_at_target_is_success() {
        let task = TaskSpec::press();
        let mut s = at([0.9, 0.9], [0.0, 0.0]);
        s.obj_q = task.object_target;
        let n = step_one(&task, &s, [0.0, 0.0]).unwrap();
        assert!(n.succeeded);
    }

    #[test]
    fn success_is_sticky() {
        let task = TaskSpec::press();
        let mut s = at([0.9, 0.9], [0.0, 0.0]);
        s.obj_q = 3.0;
        s.succeeded = true;
        assert!(step_one(&task, &s, [0.0, 0.0]).unwrap().succeeded);
    }

    #[test]
    fn pushing_toward_button_moves_object() {
        let task = TaskSpec::press();
        let n = step_one(&task, &at([0.1, 0.0], [0.0, 0.0]), [-1.0, 0.0]).unwrap();
        assert!(n.obj_q > 0.0);
        let open = TaskSpec::open();
        let n = step_one(&open, &at([0.5, 0.0], [0.0, 0.0]), [1.0, 0.0]).unwrap();
        assert!(n.obj_q > 0.0, "pushing away opens");
    }

    #[test]
    fn stepping_past_horizon_errors() {
        let task = TaskSpec::press();
        let mut s = at([0.0, 0.0], [0.0, 0.0]);
        s.t = task.horizon;
        assert!(matches!(
            env_step(&task, &[s], &[[0.0, 0.0]]),
            Err(Error::EpisodeExhausted { .. })
        ));
    }

    proptest! {
        #[test]
        fn batch_equals_rowwise(seed in 0u64..1000, n in 1usize..40) {
            let task = TaskSpec::open();
            let states = env_reset(&task, RngKey::from_seed(seed), n);
            let mut st = RngKey::from_seed(seed ^ 77).stream();
            let actions: Vec<Action> = (0..n).map(|_| [st.uniform_range(-2.0, 2.0), st.uniform_range(-2.0, 2.0)]).collect();
            let (batch, _, _) = env_step(&task, &states, &actions).unwrap();
            let (again, _, _) = env_step(&task, &states, &actions).unwrap();
            prop_assert_eq!(&batch, &again);
            for i in 0..n {
                prop_assert_eq!(batch[i], step_one(&task, &states[i], actions[i]).unwrap());
            }
        }

        #[test]
        fn velocity_stays_bounded(seed in 0u64..200) {
            let task = TaskSpec::close();
            let mut s = env_reset(&task, RngKey::from_seed(seed), 1)[0];
            let mut st = RngKey::from_seed(seed).stream();
            let bound = task.dt * 2.0 / task.friction;
            for _ in 0..task.horizon {
                let a = [st.uniform_range(-1.0, 1.0), st.uniform_range(-1.0, 1.0)];
                s = step_one(&task, &s, a).unwrap();
                prop_assert!(s.agent_vel[0].hypot(s.agent_vel[1]) <= bound + 1e-12);
            }
        }
    }
}
