//! Proximal policy optimization: on-policy rollouts, GAE advantages and the
//! clipped surrogate objective, optimized over several minibatch epochs.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, HetNetEnv};
use crate::error::{Error, Result};
use crate::neuro::{clip_grad_norm, Activation, AdamConfig, AdamState, GaussianPolicy, Mlp, PolicyCheckpoint};
use crate::record::{EpisodeDriver, TrainingRecord};
use crate::rng::{self, SimRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub clip_eps: f64,
    pub gae_lambda: f64,
    pub gamma: f64,
    pub rollout_t: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Multiplies rewards before advantage and return computation.
    pub reward_scale: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_eps: 0.2,
            gae_lambda: 0.95,
            gamma: 0.99,
            rollout_t: 2048,
            epochs: 10,
            minibatch: 64,
            lr: 2e-5,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            hidden: vec![256, 256],
            init_log_std: -0.5,
            reward_scale: 1.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::config("ppo.clip_eps", "must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config("ppo.gae_lambda", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("ppo.gamma", "must lie in [0, 1)"));
        }
        if self.rollout_t == 0 {
            return Err(Error::config("ppo.rollout_t", "must be at least 1"));
        }
        if self.minibatch == 0 {
            return Err(Error::config("ppo.minibatch", "must be at least 1"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::config("ppo.lr", "must be positive"));
        }
        if self.max_grad_norm <= 0.0 {
            return Err(Error::config("ppo.max_grad_norm", "must be positive"));
        }
        if self.hidden.is_empty() {
            return Err(Error::config("ppo.hidden", "need at least one hidden layer"));
        }
        Ok(())
    }
}

/// T consecutive steps collected with a frozen policy.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Rollout {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Critic value of the state following the last step.
    pub next_value: f64,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Runs the stochastic policy for `t` steps; episodes restart inside the
/// rollout when they finish.
pub fn collect_rollout<R: Rng + ?Sized>(
    driver: &mut EpisodeDriver,
    policy: &GaussianPolicy,
    critic: &Mlp,
    t: usize,
    rng: &mut R,
) -> Result<Rollout> {
    let mut ro = Rollout::default();
    for _ in 0..t {
        let state = driver.state().to_vec();
        let (action, logp) = policy.sample(&state, rng)?;
        let value = critic.predict(&state)?[0];
        let outcome = driver.step(&action)?;
        ro.states.push(state);
        ro.actions.push(action);
        ro.log_probs.push(logp);
        ro.rewards.push(outcome.reward);
        ro.values.push(value);
        ro.dones.push(outcome.done);
    }
    ro.next_value = critic.predict(driver.state())?[0];
    Ok(ro)
}

/// Raw (unnormalized) GAE advantages and value targets. A `done` step does
/// not bootstrap: the horizon cut is treated as terminal.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    next_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let v_next = if t + 1 < n { values[t + 1] } else { next_value };
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * v_next * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean, unit variance (left centred if constant).
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    for a in adv.iter_mut() {
        *a = if sd > 1e-12 { (*a - mean) / sd } else { *a - mean };
    }
}

/// `min(r·A, clip(r, 1-ε, 1+ε)·A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

/// Whether the gradient flows through the ratio (the unclipped branch is
/// the active minimum).
fn ratio_branch_active(ratio: f64, advantage: f64, eps: f64) -> bool {
    if advantage >= 0.0 {
        ratio <= 1.0 + eps
    } else {
        ratio >= 1.0 - eps
    }
}

/// Mean clipped surrogate over a set of samples.
pub fn surrogate(ratios: &[f64], advantages: &[f64], eps: f64) -> f64 {
    ratios
        .iter()
        .zip(advantages)
        .map(|(&r, &a)| clipped_objective(r, a, eps))
        .sum::<f64>()
        / ratios.len() as f64
}

/// Loss value, its parts and flat gradients for one minibatch.
#[derive(Clone, Debug)]
pub struct LossOutput {
    pub loss: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub ratios: Vec<f64>,
    pub clip_fraction: f64,
    /// In [`GaussianPolicy::params`] order.
    pub policy_grads: Vec<f64>,
    pub critic_grads: Vec<f64>,
}

/// `-surrogate + c_v·mean(V - R)² - c_e·entropy` with analytic gradients.
#[allow(clippy::too_many_arguments)]
pub fn ppo_loss(
    policy: &GaussianPolicy,
    critic: &Mlp,
    states: &Array2<f64>,
    actions: &Array2<f64>,
    old_log_probs: &[f64],
    advantages: &[f64],
    returns: &[f64],
    cfg: &PpoConfig,
) -> Result<LossOutput> {
    let n = states.nrows();
    if n == 0 {
        return Err(Error::Contract("ppo_loss on an empty minibatch".into()));
    }
    let nf = n as f64;
    let (mean, cache) = policy.mean_batch(states.view())?;
    let sigma: Vec<f64> = policy.log_std.iter().map(|l| l.exp()).collect();
    let a_dim = policy.action_dim();

    let mut ratios = Vec::with_capacity(n);
    let mut d_mean = Array2::<f64>::zeros((n, a_dim));
    let mut d_log_std = vec![-cfg.entropy_coef; a_dim];
    let mut surr = 0.0;
    let mut clipped = 0usize;
    for i in 0..n {
        let mu = mean.row(i);
        let act = actions.row(i);
        let logp = policy.log_prob_given_mean(mu.as_slice().expect("standard layout"), act.as_slice().expect("standard layout"));
        let r = (logp - old_log_probs[i]).exp();
        let a = advantages[i];
        surr += clipped_objective(r, a, cfg.clip_eps);
        if (r - 1.0).abs() > cfg.clip_eps {
            clipped += 1;
        }
        if ratio_branch_active(r, a, cfg.clip_eps) {
            // d(-r·A/n)/d logp
            let g = -r * a / nf;
            for j in 0..a_dim {
                let z = (act[j] - mu[j]) / sigma[j];
                d_mean[[i, j]] = g * z / sigma[j];
                d_log_std[j] += g * (z * z - 1.0);
            }
        }
        ratios.push(r);
    }
    surr /= nf;

    let policy_grads = policy.backward_mean(&cache, d_mean.view())?;
    let mut pg: Vec<f64> = policy_grads.flat().collect();
    pg.extend(d_log_std);

    let (v, vcache) = critic.forward_batch(states.view())?;
    let v = v.index_axis(Axis(1), 0).to_vec();
    let value_loss = v.iter().zip(returns).map(|(v, r)| (v - r).powi(2)).sum::<f64>() / nf;
    let upstream = Array2::from_shape_fn((n, 1), |(i, _)| 2.0 * cfg.value_coef * (v[i] - returns[i]) / nf);
    let critic_grads: Vec<f64> = critic.backward(&vcache, upstream.view())?.flat().collect();

    let entropy = policy.entropy();
    Ok(LossOutput {
        loss: -surr + cfg.value_coef * value_loss - cfg.entropy_coef * entropy,
        surrogate: surr,
        value_loss,
        entropy,
        ratios,
        clip_fraction: clipped as f64 / nf,
        policy_grads: pg,
        critic_grads,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub minibatches: usize,
    /// Ratios of the first minibatch of the first epoch (all 1 by construction).
    pub first_ratios: Vec<f64>,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    /// `mean((r - 1) - ln r)` over the whole rollout after the update.
    pub approx_kl: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

#[derive(Clone, Debug)]
pub struct PpoAgent {
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    policy_opt: AdamState,
    critic_opt: AdamState,
    pub config: PpoConfig,
    pub updates: u64,
}

fn rows(v: &[Vec<f64>], idx: &[usize]) -> Array2<f64> {
    let cols = v.first().map_or(0, |r| r.len());
    Array2::from_shape_fn((idx.len(), cols), |(i, j)| v[idx[i]][j])
}

impl PpoAgent {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, config: PpoConfig, rng: &mut R) -> Self {
        let policy = GaussianPolicy::new(state_dim, action_dim, &config.hidden, config.init_log_std, rng);
        let mut sizes = vec![state_dim];
        sizes.extend(&config.hidden);
        sizes.push(1);
        let critic = Mlp::new(&sizes, Activation::Relu, Activation::Linear, rng);
        let adam = AdamConfig::default();
        PpoAgent {
            policy_opt: AdamState::new(policy.n_params(), adam),
            critic_opt: AdamState::new(critic.n_params(), adam),
            policy,
            critic,
            config,
            updates: 0,
        }
    }

    pub fn checkpoint(&self) -> PolicyCheckpoint {
        PolicyCheckpoint::Ppo(self.policy.clone())
    }

    /// Log-probabilities of the rollout's actions under the current policy.
    pub fn log_probs(&self, rollout: &Rollout) -> Result<Vec<f64>> {
        let all: Vec<usize> = (0..rollout.states.len()).collect();
        let (mean, _) = self.policy.mean_batch(rows(&rollout.states, &all).view())?;
        Ok(mean
            .outer_iter()
            .zip(&rollout.actions)
            .map(|(mu, a)| self.policy.log_prob_given_mean(mu.as_slice().expect("standard layout"), a))
            .collect())
    }

    /// GAE once on the frozen data, then `epochs` passes of shuffled
    /// minibatch Adam steps.
    pub fn update<R: Rng + ?Sized>(&mut self, rollout: &Rollout, rng: &mut R) -> Result<UpdateStats> {
        let cfg = self.config.clone();
        let n = rollout.len();
        let mut stats = UpdateStats::default();
        if n == 0 {
            return Ok(stats);
        }
        let rewards: Vec<f64> = rollout.rewards.iter().map(|r| r * cfg.reward_scale).collect();
        let (mut adv, returns) = compute_gae(
            &rewards,
            &rollout.values,
            &rollout.dones,
            rollout.next_value,
            cfg.gamma,
            cfg.gae_lambda,
        );
        normalize_advantages(&mut adv);

        let mut order: Vec<usize> = (0..n).collect();
        let (mut ratio_sum, mut ratio_count, mut clip_sum, mut vl_sum) = (0.0, 0usize, 0.0, 0.0);
        for _ in 0..cfg.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(cfg.minibatch) {
                let s = rows(&rollout.states, chunk);
                let a = rows(&rollout.actions, chunk);
                let pick = |v: &[f64]| chunk.iter().map(|&i| v[i]).collect::<Vec<f64>>();
                let mut out = ppo_loss(
                    &self.policy,
                    &self.critic,
                    &s,
                    &a,
                    &pick(&rollout.log_probs),
                    &pick(&adv),
                    &pick(&returns),
                    &cfg,
                )?;
                if stats.minibatches == 0 {
                    stats.first_ratios = out.ratios.clone();
                }
                stats.minibatches += 1;
                ratio_sum += out.ratios.iter().sum::<f64>();
                ratio_count += out.ratios.len();
                clip_sum += out.clip_fraction;
                vl_sum += out.value_loss;
                clip_grad_norm(&mut out.policy_grads, cfg.max_grad_norm);
                clip_grad_norm(&mut out.critic_grads, cfg.max_grad_norm);
                self.policy_opt
                    .step(self.policy.params_mut(), out.policy_grads.iter().copied(), cfg.lr);
                self.policy.clamp_log_std();
                self.critic_opt
                    .step(self.critic.params_mut(), out.critic_grads.iter().copied(), cfg.lr);
            }
        }
        if stats.minibatches > 0 {
            stats.mean_ratio = ratio_sum / ratio_count as f64;
            stats.clip_fraction = clip_sum / stats.minibatches as f64;
            stats.value_loss = vl_sum / stats.minibatches as f64;
        } else {
            stats.mean_ratio = 1.0;
        }
        let new_lp = self.log_probs(rollout)?;
        stats.approx_kl = new_lp
            .iter()
            .zip(&rollout.log_probs)
            .map(|(new, old)| {
                let log_r = new - old;
                log_r.exp() - 1.0 - log_r
            })
            .sum::<f64>()
            / n as f64;
        stats.entropy = self.policy.entropy();
        self.updates += 1;
        Ok(stats)
    }
}

/// On-policy loop: `total_steps / rollout_t` collect-and-update rounds; any
/// remainder is still played (and recorded) but not trained on.
pub fn train(env_config: &EnvConfig, cfg: &PpoConfig, total_steps: usize, seed: u64) -> Result<(PpoAgent, TrainingRecord)> {
    cfg.validate()?;
    let env = HetNetEnv::new(env_config.clone())?;
    let mut init_rng = rng::stream(seed, "ppo-init");
    let mut agent = PpoAgent::new(env.state_len(), env.action_len(), cfg.clone(), &mut init_rng);
    let mut rng: SimRng = rng::stream(seed, "ppo-train");
    let mut driver = EpisodeDriver::new(env, seed);
    for round in 0..total_steps / cfg.rollout_t {
        let ro = collect_rollout(&mut driver, &agent.policy, &agent.critic, cfg.rollout_t, &mut rng)?;
        let stats = agent.update(&ro, &mut rng)?;
        log::debug!(
            "ppo round {round}: kl {:.4} clip {:.3} value_loss {:.4} entropy {:.3}",
            stats.approx_kl,
            stats.clip_fraction,
            stats.value_loss,
            stats.entropy
        );
    }
    let rest = total_steps % cfg.rollout_t;
    if rest > 0 {
        collect_rollout(&mut driver, &agent.policy, &agent.critic, rest, &mut rng)?;
    }
    Ok((agent, driver.into_record()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    #[test]
    fn gae_examples() {
        let (a, r) = compute_gae(&[2.5], &[0.0], &[true], 9.0, 0.99, 0.95);
        assert_eq!(a, vec![2.5]);
        assert_eq!(r, vec![2.5]);

        let (a, _) = compute_gae(&[1.0, 2.0], &[0.0, 0.0], &[false, false], 0.0, 1.0 - 1e-12, 1.0);
        assert!((a[0] - 3.0).abs() < 1e-9);

        let rewards = [1.0, -0.5, 2.0];
        let values = [0.3, 0.1, -0.2];
        let dones = [false, true, false];
        let (a, _) = compute_gae(&rewards, &values, &dones, 0.7, 0.9, 0.0);
        let expect = [1.0 + 0.9 * 0.1 - 0.3, -0.5 - 0.1, 2.0 + 0.9 * 0.7 + 0.2];
        for (x, y) in a.iter().zip(expect) {
            assert_eq!(*x, y);
        }
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clipped_objective(1.5, 1.0, 0.2), 1.2);
        assert_eq!(clipped_objective(0.5, -1.0, 0.2), -0.8);
        assert_eq!(surrogate(&[1.0, 1.0], &[0.5, -2.0], 0.2), -0.75);
    }

    proptest! {
        #[test]
        fn clipped_never_exceeds_unclipped(r in 0.0f64..5.0, a in -10.0f64..10.0, eps in 0.01f64..0.99) {
            prop_assert!(clipped_objective(r, a, eps) <= r * a + 1e-12);
        }
    }

    fn tiny() -> (PpoAgent, Array2<f64>, Array2<f64>) {
        let cfg = PpoConfig {
            hidden: vec![5],
            entropy_coef: 0.03,
            ..PpoConfig::default()
        };
        let mut rng = stream(1, "ppo-test");
        let agent = PpoAgent::new(3, 2, cfg, &mut rng);
        let s = Array2::from_shape_fn((4, 3), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());
        let a = Array2::from_shape_fn((4, 2), |(i, j)| 0.5 + ((i + 2 * j) as f64 * 0.91).cos() * 0.4);
        (agent, s, a)
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let (agent, s, a) = tiny();
        // Old log-probs slightly off so ratios differ from 1 but stay inside the clip band.
        let lp = {
            let mut ro = Rollout::default();
            ro.states = s.outer_iter().map(|r| r.to_vec()).collect();
            ro.actions = a.outer_iter().map(|r| r.to_vec()).collect();
            agent.log_probs(&ro).unwrap().iter().map(|l| l - 0.05).collect::<Vec<_>>()
        };
        let adv = [0.7, -1.1, 0.3, 1.4];
        let ret = [0.2, -0.4, 1.0, 0.5];
        let cfg = agent.config.clone();
        let out = ppo_loss(&agent.policy, &agent.critic, &s, &a, &lp, &adv, &ret, &cfg).unwrap();
        let h = 1e-6;
        let n_pol = agent.policy.n_params();
        for k in 0..n_pol {
            let eval = |d: f64| {
                let mut p = agent.policy.clone();
                *p.params_mut().nth(k).unwrap() += d;
                ppo_loss(&p, &agent.critic, &s, &a, &lp, &adv, &ret, &cfg).unwrap().loss
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let g = out.policy_grads[k];
            assert!((fd - g).abs() <= 1e-5 * (1.0 + fd.abs()), "policy param {k}: fd {fd} vs {g}");
        }
        for k in 0..agent.critic.n_params() {
            let eval = |d: f64| {
                let mut c = agent.critic.clone();
                *c.params_mut().nth(k).unwrap() += d;
                ppo_loss(&agent.policy, &c, &s, &a, &lp, &adv, &ret, &cfg).unwrap().loss
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let g = out.critic_grads[k];
            assert!((fd - g).abs() <= 1e-5 * (1.0 + fd.abs()), "critic param {k}: fd {fd} vs {g}");
        }
    }

    #[test]
    fn ratio_one_identity() {
        let (agent, s, a) = tiny();
        let mut ro = Rollout::default();
        ro.states = s.outer_iter().map(|r| r.to_vec()).collect();
        ro.actions = a.outer_iter().map(|r| r.to_vec()).collect();
        let lp = agent.log_probs(&ro).unwrap();
        let adv = [0.7, -1.1, 0.3, 1.4];
        let out = ppo_loss(&agent.policy, &agent.critic, &s, &a, &lp, &adv, &[0.0; 4], &agent.config).unwrap();
        assert!(out.ratios.iter().all(|&r| r == 1.0));
        assert_eq!(out.clip_fraction, 0.0);
        assert!((out.surrogate - adv.iter().sum::<f64>() / 4.0).abs() < 1e-15);
    }

    fn toy_rollout(agent: &PpoAgent, t: usize, seed: u64) -> Rollout {
        let cfg = EnvConfig::for_scenario(crate::topology::ScenarioKind::Mixed, 4, 7, 0);
        let env = HetNetEnv::new(cfg).unwrap();
        let mut driver = EpisodeDriver::new(env, seed);
        collect_rollout(&mut driver, &agent.policy, &agent.critic, t, &mut stream(seed, "c")).unwrap()
    }

    fn env_agent(cfg: PpoConfig) -> PpoAgent {
        let ecfg = EnvConfig::for_scenario(crate::topology::ScenarioKind::Mixed, 4, 7, 0);
        let env = HetNetEnv::new(ecfg).unwrap();
        PpoAgent::new(env.state_len(), env.action_len(), cfg, &mut stream(0, "a"))
    }

    #[test]
    fn rollout_dones_at_horizon_multiples_and_deterministic() {
        let agent = env_agent(PpoConfig {
            hidden: vec![8],
            ..PpoConfig::default()
        });
        let ro = toy_rollout(&agent, 20, 3);
        assert_eq!(ro.len(), 20);
        for (i, &d) in ro.dones.iter().enumerate() {
            assert_eq!(d, (i + 1) % 7 == 0, "step {i}");
        }
        assert!(ro.log_probs.iter().all(|l| l.is_finite()));
        assert_eq!(ro, toy_rollout(&agent, 20, 3));
        let one = toy_rollout(&agent, 1, 3);
        assert_eq!(one.values[0], agent.critic.predict(&one.states[0]).unwrap()[0]);
    }

    #[test]
    fn update_contracts() {
        let cfg = PpoConfig {
            hidden: vec![16],
            minibatch: 8,
            lr: 3e-4,
            ..PpoConfig::default()
        };
        let mut frozen = env_agent(PpoConfig { epochs: 0, ..cfg.clone() });
        let ro = toy_rollout(&frozen, 32, 5);
        let before = frozen.policy.clone();
        frozen.update(&ro, &mut stream(0, "u")).unwrap();
        assert_eq!(frozen.policy, before);

        let mut agent = env_agent(cfg);
        let ro = toy_rollout(&agent, 32, 5);
        let stats = agent.update(&ro, &mut stream(0, "u")).unwrap();
        assert!(stats.first_ratios.iter().all(|&r| (r - 1.0).abs() < 1e-12));
        assert!((0.0..=1.0).contains(&stats.clip_fraction));
        assert!(stats.approx_kl < 0.05, "{}", stats.approx_kl);
        assert_eq!(stats.minibatches, 40);
    }
}
