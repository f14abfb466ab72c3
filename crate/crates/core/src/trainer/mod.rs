//! The learner loop: one pure training step (rollouts under the previous
//! reward model, reward update, policy update, importance accumulation), the
//! per-task loop and the task sequence with coreset and importance updates
//! at task boundaries.

mod config;

pub use config::{TrainConfig, Variant};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::continual::{compute_si, update_coreset, Coreset, SiAccumulator, SiRegularizer};
use crate::error::{Error, Result};
use crate::eval::{compute_ap, eval_expert, eval_policy, mean_shaped_return, EvalReport};
use crate::numeric::{cosine_lr, AdamState, RngKey};
use crate::policy::{act, policy_update, PolicyParams, RolloutBatch};
use crate::reward::{
    potentials, sample_anchored_triplets, sample_expert_triplets, sample_triplets, shaped_rewards_from_potentials, update_reward_model, ObsNorm,
    ProgressModel, RewardLoss,
};
use crate::tasks::{env_reset, env_step, generate_demos, Observation, TaskSpec, Trajectory};

const EVAL_TAG: u64 = 0x4556_414c;

/// Everything the step function threads from one step to the next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub theta: PolicyParams,
    pub phi: ProgressModel,
    pub adam_theta: AdamState,
    pub adam_phi: AdamState,
    pub si_acc: SiAccumulator,
    pub step: u64,
    /// Steps taken on the current task.
    pub task_step: u64,
    pub key: RngKey,
}

impl AgentState {
    /// Fresh learner. The progress model's input standardization is fitted
    /// on `norm_demos`.
    pub fn init(config: &TrainConfig, norm_demos: &[Trajectory], key: RngKey) -> Result<Self> {
        let (k_theta, rest) = key.split();
        let (k_phi, k_run) = rest.split();
        let theta = PolicyParams::new(&config.policy_hidden, k_theta, config.init_log_std)?;
        let phi = ProgressModel::new(&config.reward_hidden, k_phi)?.with_norm(ObsNorm::fit(norm_demos));
        let flat = theta.flatten();
        Ok(AgentState {
            adam_theta: AdamState::new(flat.len()),
            adam_phi: AdamState::new(phi.num_params()),
            si_acc: SiAccumulator::new(&flat),
            theta,
            phi,
            step: 0,
            task_step: 0,
            key: k_run,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub task_id: String,
    pub reward_loss: f64,
    pub expert_loss: f64,
    pub push_loss: f64,
    pub ppo_loss: f64,
    pub replay_loss: f64,
    pub si_loss: f64,
    pub mean_shaped_reward: f64,
    pub rollout_success_rate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
}

impl StepMetrics {
    /// `(name, value)` pairs in a fixed order.
    pub fn scalars(&self) -> [(&'static str, f64); 11] {
        [
            ("reward_loss", self.reward_loss),
            ("expert_loss", self.expert_loss),
            ("push_loss", self.push_loss),
            ("ppo_loss", self.ppo_loss),
            ("replay_loss", self.replay_loss),
            ("si_loss", self.si_loss),
            ("mean_shaped_reward", self.mean_shaped_reward),
            ("rollout_success_rate", self.rollout_success_rate),
            ("value_loss", self.value_loss),
            ("entropy", self.entropy),
            ("clip_frac", self.clip_frac),
        ]
    }
}

/// Fixed evaluation key of a task, so every checkpoint sees the same starts.
pub fn eval_key(seed: u64, task_id: &str) -> RngKey {
    task_id
        .bytes()
        .fold(RngKey::from_seed(seed).fold_in(EVAL_TAG), |k, b| k.fold_in(u64::from(b)))
}

/// `n_envs` fixed-horizon episodes under the current policy. Rewards are
/// shaped by `state.phi`; each episode's goal anchor is the last observation
/// of a demo picked uniformly from `demos`, and its own first observation is
/// the start anchor. Advantages are filled in.
pub fn collect_rollouts(
    state: &AgentState,
    task: &TaskSpec,
    demos: &[Trajectory],
    config: &TrainConfig,
    key: RngKey,
) -> Result<RolloutBatch> {
    Ok(rollouts_with_goals(state, task, demos, config, key)?.0)
}

fn rollouts_with_goals(
    state: &AgentState,
    task: &TaskSpec,
    demos: &[Trajectory],
    config: &TrainConfig,
    key: RngKey,
) -> Result<(RolloutBatch, Vec<Observation>)> {
    let goals: Vec<Observation> = demos.iter().filter(|d| d.success && !d.is_empty()).map(|d| *d.last()).collect();
    if goals.is_empty() {
        return Err(Error::config(format!("task {}: no successful demo to anchor the goal", task.task_id)));
    }
    let (n, h) = (config.n_envs, config.rollout_horizon);
    let mut task = task.clone();
    task.horizon = h;
    let (k_reset, rest) = key.split();
    let (k_goal, k_act) = rest.split();

    let mut states = env_reset(&task, k_reset, n);
    let mut cur: Vec<Observation> = states.iter().map(|s| s.observe(&task)).collect();
    let mut obs = vec![Observation([0.0; 8]); n * h];
    let mut actions = vec![[0.0; 2]; n * h];
    let mut log_probs = vec![0.0; n * h];
    let mut successes = vec![false; n * h];
    for t in 0..h {
        let (a, lp) = act(&state.theta, &cur, k_act.fold_in(t as u64));
        let (next, next_obs, succ) = env_step(&task, &states, &a)?;
        for e in 0..n {
            let i = e * h + t;
            obs[i] = cur[e];
            actions[i] = a[e];
            log_probs[i] = lp[e];
            successes[i] = succ[e];
        }
        states = next;
        cur = next_obs;
    }
    let final_obs = cur;

    let goal: Vec<Observation> = (0..n)
        .map(|e| goals[k_goal.fold_in(e as u64).stream().below(goals.len())])
        .collect();
    let rows: Vec<(Observation, Observation, Observation)> = (0..n)
        .flat_map(|e| {
            let o0 = obs[e * h];
            let (obs, final_obs, goal) = (&obs, &final_obs, &goal);
            (0..=h).map(move |t| (o0, if t < h { obs[e * h + t] } else { final_obs[e] }, goal[e]))
        })
        .collect();
    let pots = potentials(&state.phi, &rows);
    let gamma = config.reward.gamma;
    let shaped_rewards = pots
        .chunks_exact(h + 1)
        .flat_map(|p| shaped_rewards_from_potentials(p, gamma))
        .collect();

    let mut batch = RolloutBatch {
        n_envs: n,
        horizon: h,
        values: state.theta.values(&obs),
        bootstrap_values: state.theta.values(&final_obs),
        dones: (0..n * h).map(|i| i % h == h - 1).collect(),
        obs,
        final_obs,
        actions,
        log_probs,
        shaped_rewards,
        successes,
        potentials: pots,
        advantages: Vec::new(),
        returns: Vec::new(),
    };
    batch.compute_advantages(gamma, config.ppo.gae_lambda);
    Ok((batch, goal))
}

/// One step: rollouts under the current reward model, `reward_updates_per_step`
/// reward-model updates, one policy update, importance accumulation over the policy
/// update's Adam steps. Pure in its inputs.
pub fn train_step(
    state: &AgentState,
    coreset: &Coreset,
    regs: &[SiRegularizer],
    demos: &[Trajectory],
    task: &TaskSpec,
    config: &TrainConfig,
    key: RngKey,
) -> Result<(AgentState, RolloutBatch, StepMetrics)> {
    let keys = key.split_n(4);
    let (batch, goals) = rollouts_with_goals(state, task, demos, config, keys[0])?;

    let episodes: Vec<Vec<Observation>> = if config.push_back_enabled {
        (0..batch.n_envs).map(|e| batch.episode_obs(e)).collect()
    } else {
        Vec::new()
    };
    let (lr_policy, lr_reward) = if config.lr_cosine {
        let (k, n) = (state.task_step as usize, config.steps_per_task.max(1));
        (cosine_lr(config.lr_policy, k, n), cosine_lr(config.lr_reward, k, n))
    } else {
        (config.lr_policy, config.lr_reward)
    };
    let (mut phi, mut adam_phi) = (state.phi.clone(), state.adam_phi.clone());
    let mut rl = RewardLoss::default();
    for u in 0..config.reward_updates_per_step {
        let expert = sample_expert_triplets(demos, keys[1].fold_in(u as u64), config.reward_batch)?;
        let agent = if episodes.is_empty() {
            Vec::new()
        } else {
            let k = keys[2].fold_in(u as u64);
            if config.push_goal_anchor {
                sample_anchored_triplets(&episodes, &goals, k, config.reward_batch)?
            } else {
                sample_triplets(&episodes, k, config.reward_batch)?
            }
        };
        let l;
        (phi, adam_phi, l) = update_reward_model(&phi, &adam_phi, &expert, &agent, &config.reward, lr_reward)?;
        rl.total += l.total;
        rl.expert += l.expert;
        rl.push += l.push;
    }
    let k = config.reward_updates_per_step as f64;
    let rl = RewardLoss {
        total: rl.total / k,
        expert: rl.expert / k,
        push: rl.push / k,
    };

    let hyper = config.effective_ppo();
    let empty = Coreset::new(coreset.capacity_per_task);
    let (cs, rg) = if config.cl_regs_enabled { (coreset, regs) } else { (&empty, &[][..]) };
    let up = policy_update(&state.theta, &state.adam_theta, &batch, cs, rg, &hyper, lr_policy, keys[3])?;
    let mut si_acc = state.si_acc.clone();
    for (g, th) in &up.si_trace {
        si_acc.accumulate(g, th)?;
    }

    let m = StepMetrics {
        step: state.step + 1,
        task_id: task.task_id.clone(),
        reward_loss: rl.total,
        expert_loss: rl.expert,
        push_loss: rl.push,
        ppo_loss: up.metrics.ppo_loss,
        replay_loss: up.metrics.replay_loss,
        si_loss: up.metrics.si_loss,
        mean_shaped_reward: batch.mean_shaped_reward(),
        rollout_success_rate: batch.success_rate(),
        value_loss: up.metrics.value_loss,
        entropy: up.metrics.entropy,
        clip_frac: up.metrics.clip_frac,
    };
    if let Some((name, v)) = m.scalars().into_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::numerical("train_step", format!("{name} is {v}")));
    }
    let next = AgentState {
        theta: up.theta,
        phi,
        adam_theta: up.adam,
        adam_phi,
        si_acc,
        step: state.step + 1,
        task_step: state.task_step + 1,
        key: state.key,
    };
    Ok((next, batch, m))
}

/// Deterministic-evaluation success of the current task at a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: u64,
    pub task_id: String,
    pub success: f64,
}

/// Progress notifications, emitted as they happen.
pub enum RunEvent<'a> {
    Step(&'a StepMetrics),
    Eval(&'a EvalPoint),
    Boundary(&'a EvalReport),
}

pub struct TaskRun {
    pub state: AgentState,
    pub metrics: Vec<StepMetrics>,
    /// The last `n_keep` rollout batches.
    pub final_rollouts: Vec<RolloutBatch>,
    pub checkpoints: Vec<EvalPoint>,
}

/// `steps_per_task` training steps, splitting the state key once per step.
/// The importance accumulator is reset to the current parameters first.
/// Every `eval_every` steps (except the last) the current task is evaluated.
#[allow(clippy::too_many_arguments)]
pub fn train_task(
    state: &AgentState,
    task: &TaskSpec,
    coreset: &Coreset,
    regs: &[SiRegularizer],
    demos: &[Trajectory],
    config: &TrainConfig,
    sink: &mut dyn FnMut(RunEvent<'_>) -> Result<()>,
) -> Result<TaskRun> {
    let n = config.steps_per_task;
    let mut run = TaskRun {
        state: state.clone(),
        metrics: Vec::with_capacity(n),
        final_rollouts: Vec::new(),
        checkpoints: Vec::new(),
    };
    if n == 0 {
        return Ok(run);
    }
    run.state.si_acc = SiAccumulator::new(&state.theta.flatten());
    run.state.task_step = 0;
    let ekey = eval_key(config.seed, &task.task_id);
    for k in 0..n {
        let (carry, step_key) = run.state.key.split();
        run.state.key = carry;
        let (next, batch, m) = train_step(&run.state, coreset, regs, demos, task, config, step_key)?;
        run.state = next;
        sink(RunEvent::Step(&m))?;
        run.metrics.push(m);
        if run.final_rollouts.len() == config.n_keep {
            run.final_rollouts.remove(0);
        }
        run.final_rollouts.push(batch);
        if (k + 1) % config.eval_every == 0 && k + 1 < n {
            let c = EvalPoint {
                step: run.state.step,
                task_id: task.task_id.clone(),
                success: eval_policy(&run.state.theta, task, config.eval_episodes, ekey)?.success_rate,
            };
            sink(RunEvent::Eval(&c))?;
            run.checkpoints.push(c);
        }
    }
    Ok(run)
}

pub struct RunResult {
    pub state: AgentState,
    pub metrics: Vec<StepMetrics>,
    pub checkpoints: Vec<EvalPoint>,
    /// One report per task boundary.
    pub reports: Vec<EvalReport>,
    pub coreset: Coreset,
    pub regs: Vec<SiRegularizer>,
    /// Scripted-expert success per task under the evaluation protocol.
    pub oracle: BTreeMap<String, f64>,
}

/// Demos of a task in a sequence: successful noisy-expert rollouts.
pub fn task_demos(config: &TrainConfig, task: &TaskSpec, index: usize) -> Result<Vec<Trajectory>> {
    let key = RngKey::from_seed(config.seed).split().1.split().0.fold_in(index as u64);
    generate_demos(task, config.demos_per_task, key, config.demo_noise, 0.0)
}

pub fn train_sequence(config: &TrainConfig) -> Result<RunResult> {
    train_sequence_with(config, &mut |_| Ok(()))
}

/// The whole task sequence. After each task: coreset and importance updates
/// (when enabled), then a deterministic evaluation of every task seen so far.
pub fn train_sequence_with(config: &TrainConfig, sink: &mut dyn FnMut(RunEvent<'_>) -> Result<()>) -> Result<RunResult> {
    config.validate()?;
    let specs = config.task_specs()?;
    let root = RngKey::from_seed(config.seed);
    let first_demos = task_demos(config, &specs[0], 0)?;
    let mut state = AgentState::init(config, &first_demos, root.split().0)?;
    let mut coreset = Coreset::new(config.coreset_capacity);
    let mut regs = Vec::new();
    let mut metrics = Vec::new();
    let mut checkpoints = Vec::new();
    let mut reports = Vec::new();
    let mut oracle = BTreeMap::new();
    let mut goals: Vec<Observation> = Vec::new();
    let mut first = Some(first_demos);
    for (i, task) in specs.iter().enumerate() {
        let demos = match first.take() {
            Some(d) => d,
            None => task_demos(config, task, i)?,
        };
        goals.push(*demos[0].last());
        let ekey = eval_key(config.seed, &task.task_id);
        oracle.insert(task.task_id.clone(), eval_expert(task, config.eval_episodes, ekey)?.success_rate);

        let run = train_task(&state, task, &coreset, &regs, &demos, config, sink)?;
        state = run.state;
        metrics.extend(run.metrics);
        checkpoints.extend(run.checkpoints);
        if config.cl_regs_enabled && !run.final_rollouts.is_empty() {
            coreset = update_coreset(&coreset, &run.final_rollouts, &task.task_id, config.n_keep)?;
            regs.push(compute_si(&state.si_acc, &state.theta.flatten(), config.si_xi)?);
        }

        let mut per_task_success = BTreeMap::new();
        let mut shaped = 0.0;
        for (j, seen) in specs[..=i].iter().enumerate() {
            let out = eval_policy(&state.theta, seen, config.eval_episodes, eval_key(config.seed, &seen.task_id))?;
            per_task_success.insert(seen.task_id.clone(), out.success_rate);
            shaped += mean_shaped_return(&state.phi, &out.episodes, &goals[j], config.reward.gamma);
        }
        let c = EvalPoint {
            step: state.step,
            task_id: task.task_id.clone(),
            success: per_task_success[&task.task_id],
        };
        sink(RunEvent::Eval(&c))?;
        checkpoints.push(c);
        let report = EvalReport {
            ap: compute_ap(&per_task_success)?,
            regret: run_regret(&oracle, &checkpoints)?,
            eval_reward: shaped / (i + 1) as f64,
            per_task_success,
            checkpoint_step: state.step,
        };
        sink(RunEvent::Boundary(&report))?;
        reports.push(report);
    }
    Ok(RunResult {
        state,
        metrics,
        checkpoints,
        reports,
        coreset,
        regs,
        oracle,
    })
}

/// Mean shortfall to each task's oracle over all checkpoints so far.
pub fn run_regret(oracle: &BTreeMap<String, f64>, checkpoints: &[EvalPoint]) -> Result<f64> {
    if checkpoints.is_empty() {
        return Err(Error::Input("regret needs at least one checkpoint".into()));
    }
    let mut total = 0.0;
    for c in checkpoints {
        let o = oracle
            .get(&c.task_id)
            .ok_or_else(|| Error::Input(format!("no oracle for task {}", c.task_id)))?;
        total += crate::eval::compute_regret(*o, &[c.success])?;
    }
    Ok(total / checkpoints.len() as f64)
}
