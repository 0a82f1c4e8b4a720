//! Twin-delayed deterministic policy gradient: twin critics with a clipped
//! double-Q target, target policy smoothing, delayed actor and target
//! updates, and a replay buffer.
//!
//! Actions live in `[0, 1]`; the actor ends in `tanh`, mapped as `(y + 1) / 2`.

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, HetNetEnv};
use crate::error::Result;
use crate::neuro::{soft_update, Activation, AdamConfig, AdamState, Mlp, PolicyCheckpoint};
use crate::record::{EpisodeDriver, TrainingRecord};
use crate::rng::{self, SimRng};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Sum tree over leaf priorities for proportional sampling.
#[derive(Clone, Debug)]
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(capacity: usize) -> Self {
        let leaves = capacity.next_power_of_two();
        SumTree {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    fn set(&mut self, i: usize, value: f64) {
        let mut k = self.leaves + i;
        self.nodes[k] = value;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    fn find(&self, mut mass: f64) -> usize {
        let mut k = 1;
        while k < self.leaves {
            if mass < self.nodes[2 * k] || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                mass -= self.nodes[2 * k];
                k = 2 * k + 1;
            }
        }
        k - self.leaves
    }
}

/// Prioritized sampling parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityConfig {
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
}

impl Default for PriorityConfig {
    fn default() -> Self {
        PriorityConfig {
            alpha: 0.6,
            beta: 0.4,
            eps: 1e-6,
        }
    }
}

/// FIFO ring of transitions. Uniform sampling with replacement, or
/// proportional prioritized sampling when built with a [`PriorityConfig`].
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    cursor: usize,
    priority: Option<(PriorityConfig, SumTree, f64)>,
}

/// Indices drawn from a buffer with their importance weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            capacity,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
            priority: None,
        }
    }

    pub fn prioritized(capacity: usize, config: PriorityConfig) -> Self {
        ReplayBuffer {
            priority: Some((config, SumTree::new(capacity), 1.0)),
            ..Self::new(capacity)
        }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.storage[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    pub fn push(&mut self, t: Transition) {
        let slot = self.cursor;
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[slot] = t;
        }
        if let Some((cfg, tree, max_p)) = &mut self.priority {
            tree.set(slot, max_p.powf(cfg.alpha));
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Sample {
        let n = self.storage.len();
        assert!(n > 0, "sampling from an empty buffer");
        match &self.priority {
            None => Sample {
                indices: (0..batch).map(|_| rng.gen_range(0..n)).collect(),
                weights: vec![1.0; batch],
            },
            Some((cfg, tree, _)) => {
                let total = tree.total();
                let indices: Vec<usize> = (0..batch)
                    .map(|_| tree.find(rng.gen::<f64>() * total).min(n - 1))
                    .collect();
                let raw: Vec<f64> = indices
                    .iter()
                    .map(|&i| (n as f64 * tree.get(i) / total).powf(-cfg.beta))
                    .collect();
                let max_w = raw.iter().cloned().fold(0.0, f64::max);
                Sample {
                    indices,
                    weights: raw.iter().map(|w| w / max_w).collect(),
                }
            }
        }
    }

    /// Sets priorities from absolute TD errors. No-op for uniform buffers.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) {
        if let Some((cfg, tree, max_p)) = &mut self.priority {
            for (&i, &e) in indices.iter().zip(td_errors) {
                let p = e.abs() + cfg.eps;
                *max_p = max_p.max(p);
                tree.set(i, p.powf(cfg.alpha));
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: usize,
    pub target_noise_sigma: f64,
    pub target_noise_clip: f64,
    pub exploration_sigma: f64,
    pub batch_size: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub buffer_capacity: usize,
    pub warmup_steps: usize,
    pub hidden: Vec<usize>,
    /// Multiplies rewards before they enter the critic targets.
    pub reward_scale: f64,
    /// One gradient update every `train_every` environment steps.
    pub train_every: usize,
    pub prioritized_replay: bool,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            target_noise_sigma: 0.2,
            target_noise_clip: 0.5,
            exploration_sigma: 0.1,
            batch_size: 256,
            lr_actor: 2e-5,
            lr_critic: 2e-5,
            buffer_capacity: 100_000,
            warmup_steps: 1_000,
            hidden: vec![256, 256],
            reward_scale: 1.0,
            train_every: 1,
            prioritized_replay: false,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("td3.gamma", "must lie in [0, 1)"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::config("td3.tau", "must lie in (0, 1]"));
        }
        if self.policy_delay == 0 {
            return Err(Error::config("td3.policy_delay", "must be at least 1"));
        }
        if self.target_noise_clip <= 0.0 {
            return Err(Error::config("td3.target_noise_clip", "must be positive"));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.train_every == 0 {
            return Err(Error::config("td3.batch_size", "batch, capacity and train_every must be positive"));
        }
        if self.hidden.is_empty() {
            return Err(Error::config("td3.hidden", "need at least one hidden layer"));
        }
        Ok(())
    }
}

/// Maps a `tanh` output to the unit interval.
fn to_unit(y: f64) -> f64 {
    0.5 * (y + 1.0)
}

/// Actor output in `[0, 1]` for a batch of states.
pub fn actor_actions(actor: &Mlp, states: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    Ok(actor.predict_batch(states)?.mapv(to_unit))
}

fn concat<'a>(states: ArrayView2<'a, f64>, actions: ArrayView2<'a, f64>) -> Array2<f64> {
    ndarray::concatenate(ndarray::Axis(1), &[states, actions]).expect("equal row counts")
}

/// Exploratory action: actor output plus Gaussian noise, clamped to `[0, 1]`.
pub fn select_action<R: Rng + ?Sized>(actor: &Mlp, state: &[f64], exploration_sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    let mut a: Vec<f64> = actor.predict(state)?.into_iter().map(to_unit).collect();
    if exploration_sigma > 0.0 {
        let noise = Normal::new(0.0, exploration_sigma).expect("finite sigma");
        for v in &mut a {
            *v = (*v + noise.sample(rng)).clamp(0.0, 1.0);
        }
    }
    Ok(a)
}

/// Minibatch in matrix form.
#[derive(Clone, Debug)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Array2<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions<'a>(items: impl IntoIterator<Item = &'a Transition>) -> Self {
        let items: Vec<&Transition> = items.into_iter().collect();
        let n = items.len();
        let sd = items[0].state.len();
        let ad = items[0].action.len();
        let mut states = Array2::zeros((n, sd));
        let mut actions = Array2::zeros((n, ad));
        let mut next_states = Array2::zeros((n, sd));
        for (i, t) in items.iter().enumerate() {
            states.row_mut(i).assign(&ndarray::aview1(&t.state));
            actions.row_mut(i).assign(&ndarray::aview1(&t.action));
            next_states.row_mut(i).assign(&ndarray::aview1(&t.next_state));
        }
        Batch {
            states,
            actions,
            rewards: items.iter().map(|t| t.reward).collect(),
            next_states,
            dones: items.iter().map(|t| t.done).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Smoothed target actions: target actor output plus clipped Gaussian
/// noise, clamped to `[0, 1]`.
pub fn smoothed_target_actions<R: Rng + ?Sized>(
    target_actor: &Mlp,
    next_states: ArrayView2<'_, f64>,
    sigma: f64,
    clip: f64,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let mut a = actor_actions(target_actor, next_states)?;
    if sigma > 0.0 {
        a.mapv_inplace(|v| {
            let eps: f64 = StandardNormal.sample(rng);
            (v + (sigma * eps).clamp(-clip, clip)).clamp(0.0, 1.0)
        });
    }
    Ok(a)
}

/// Bellman targets `r + gamma * min(Q1', Q2')(s', a')`, or `r` at terminal steps.
pub fn bellman_targets(rewards: &[f64], dones: &[bool], q1: &[f64], q2: &[f64], gamma: f64) -> Vec<f64> {
    rewards
        .iter()
        .zip(dones)
        .zip(q1.iter().zip(q2))
        .map(|((&r, &d), (&a, &b))| if d { r } else { r + gamma * a.min(b) })
        .collect()
}

pub fn compute_target<R: Rng + ?Sized>(
    batch: &Batch,
    target_actor: &Mlp,
    target_critics: (&Mlp, &Mlp),
    cfg: &Td3Config,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let next_actions = smoothed_target_actions(
        target_actor,
        batch.next_states.view(),
        cfg.target_noise_sigma,
        cfg.target_noise_clip,
        rng,
    )?;
    let input = concat(batch.next_states.view(), next_actions.view());
    let q1 = target_critics.0.predict_batch(input.view())?;
    let q2 = target_critics.1.predict_batch(input.view())?;
    Ok(bellman_targets(
        &batch.rewards,
        &batch.dones,
        q1.as_slice().expect("contiguous"),
        q2.as_slice().expect("contiguous"),
        cfg.gamma,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UpdateOutcome {
    /// Buffer holds fewer than `batch_size` transitions.
    NotReady,
    Updated { critic_loss: f64, actor_updated: bool },
}

#[derive(Clone, Debug)]
pub struct Td3Agent {
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critics: [Mlp; 2],
    pub critic_targets: [Mlp; 2],
    actor_opt: AdamState,
    critic_opts: [AdamState; 2],
    pub config: Td3Config,
    pub updates: u64,
}

impl Td3Agent {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, config: Td3Config, rng: &mut R) -> Self {
        let mut actor_sizes = vec![state_dim];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(action_dim);
        let mut critic_sizes = vec![state_dim + action_dim];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, Activation::Relu, Activation::Tanh, rng);
        let critics = [
            Mlp::new(&critic_sizes, Activation::Relu, Activation::Linear, rng),
            Mlp::new(&critic_sizes, Activation::Relu, Activation::Linear, rng),
        ];
        let adam = AdamConfig::default();
        Td3Agent {
            actor_opt: AdamState::new(actor.n_params(), adam),
            critic_opts: [
                AdamState::new(critics[0].n_params(), adam),
                AdamState::new(critics[1].n_params(), adam),
            ],
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor,
            critics,
            config,
            updates: 0,
        }
    }

    pub fn checkpoint(&self) -> PolicyCheckpoint {
        PolicyCheckpoint::Td3(self.actor.clone())
    }

    /// One critic step on both critics; every `policy_delay`-th call also
    /// steps the actor and soft-updates all targets.
    pub fn update<R: Rng + ?Sized>(&mut self, buffer: &mut ReplayBuffer, rng: &mut R) -> Result<UpdateOutcome> {
        let cfg = self.config.clone();
        if buffer.len() < cfg.batch_size {
            return Ok(UpdateOutcome::NotReady);
        }
        let sample = buffer.sample(cfg.batch_size, rng);
        let mut batch = Batch::from_transitions(sample.indices.iter().map(|&i| buffer.get(i)));
        batch.rewards.iter_mut().for_each(|r| *r *= cfg.reward_scale);
        let y = compute_target(
            &batch,
            &self.actor_target,
            (&self.critic_targets[0], &self.critic_targets[1]),
            &cfg,
            rng,
        )?;
        let (critic_loss, td) = self.critic_step(&batch, &y, &sample.weights)?;
        buffer.update_priorities(&sample.indices, &td);

        self.updates += 1;
        let actor_updated = self.updates % cfg.policy_delay as u64 == 0;
        if actor_updated {
            self.actor_step(batch.states.view())?;
            soft_update(&mut self.actor_target, &self.actor, cfg.tau);
            for k in 0..2 {
                soft_update(&mut self.critic_targets[k], &self.critics[k], cfg.tau);
            }
        }
        Ok(UpdateOutcome::Updated {
            critic_loss,
            actor_updated,
        })
    }

    /// Weighted MSE step on both critics. Returns the mean loss of the first
    /// critic and its per-sample TD errors.
    pub fn critic_step(&mut self, batch: &Batch, targets: &[f64], weights: &[f64]) -> Result<(f64, Vec<f64>)> {
        let input = concat(batch.states.view(), batch.actions.view());
        let n = batch.len() as f64;
        let mut loss0 = 0.0;
        let mut td0 = Vec::new();
        for k in 0..2 {
            let (q, cache) = self.critics[k].forward_batch(input.view())?;
            let td: Vec<f64> = q.iter().zip(targets).map(|(q, y)| q - y).collect();
            let upstream = Array2::from_shape_fn((batch.len(), 1), |(i, _)| 2.0 * weights[i] * td[i] / n);
            let grads = self.critics[k].backward(&cache, upstream.view())?;
            self.critic_opts[k].step(self.critics[k].params_mut(), grads.flat(), self.config.lr_critic);
            if k == 0 {
                loss0 = td.iter().zip(weights).map(|(e, w)| w * e * e).sum::<f64>() / n;
                td0 = td;
            }
        }
        Ok((loss0, td0))
    }

    /// Ascends `mean Q1(s, actor(s))`.
    pub fn actor_step(&mut self, states: ArrayView2<'_, f64>) -> Result<()> {
        let n = states.nrows();
        let state_dim = states.ncols();
        let (y, actor_cache) = self.actor.forward_batch(states)?;
        let actions = y.mapv(to_unit);
        let input = ndarray::concatenate(ndarray::Axis(1), &[states.view(), actions.view()]).expect("equal row counts");
        let (_, critic_cache) = self.critics[0].forward_batch(input.view())?;
        let upstream = Array2::from_elem((n, 1), -1.0 / n as f64);
        let critic_grads = self.critics[0].backward(&critic_cache, upstream.view())?;
        let d_action = critic_grads.input.slice(s![.., state_dim..]).mapv(|g| 0.5 * g);
        let actor_grads = self.actor.backward(&actor_cache, d_action.view())?;
        self.actor_opt.step(self.actor.params_mut(), actor_grads.flat(), self.config.lr_actor);
        Ok(())
    }
}

/// Off-policy training loop: uniform-random warmup, then noisy actor actions
/// with one update every `train_every` steps.
pub fn train(env_config: &EnvConfig, cfg: &Td3Config, total_steps: usize, seed: u64) -> Result<(Td3Agent, TrainingRecord)> {
    cfg.validate()?;
    let env = HetNetEnv::new(env_config.clone())?;
    let (sd, ad) = (env.state_len(), env.action_len());
    let mut init_rng = rng::stream(seed, "td3-init");
    let mut agent = Td3Agent::new(sd, ad, cfg.clone(), &mut init_rng);
    let mut rng: SimRng = rng::stream(seed, "td3-train");
    let mut buffer = if cfg.prioritized_replay {
        ReplayBuffer::prioritized(cfg.buffer_capacity, PriorityConfig::default())
    } else {
        ReplayBuffer::new(cfg.buffer_capacity)
    };
    let mut driver = EpisodeDriver::new(env, seed);
    for step in 0..total_steps {
        let state = driver.state().to_vec();
        let action = if step < cfg.warmup_steps {
            (0..ad).map(|_| rng.gen::<f64>()).collect()
        } else {
            select_action(&agent.actor, &state, cfg.exploration_sigma, &mut rng)?
        };
        let outcome = driver.step(&action)?;
        buffer.push(Transition {
            state,
            action,
            reward: outcome.reward,
            next_state: outcome.next_state,
            done: outcome.done,
        });
        if step >= cfg.warmup_steps && (step + 1) % cfg.train_every == 0 {
            agent.update(&mut buffer, &mut rng)?;
        }
    }
    Ok((agent, driver.into_record()))
}
