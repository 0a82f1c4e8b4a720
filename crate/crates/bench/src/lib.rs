//! Fixtures shared by the kernel benchmarks under `benches/`.

use hetnet_core::env::{EnvConfig, HetNetEnv};
use hetnet_core::rng::{stream, SimRng};
use hetnet_core::runner::ExperimentConfig;
use hetnet_core::td3::{ReplayBuffer, Transition};
use hetnet_core::ScenarioKind;
use rand::Rng;

/// Dense-urban environment at the desk or full user count.
pub fn dense_env(n_users: usize, horizon: usize) -> EnvConfig {
    EnvConfig::for_scenario(ScenarioKind::DenseUrban, n_users, horizon, 0)
}

pub fn reset_env(config: &EnvConfig, seed: u64) -> HetNetEnv {
    let mut env = HetNetEnv::new(config.clone()).expect("valid config");
    env.reset(seed);
    env
}

pub fn random_action(len: usize, rng: &mut SimRng) -> Vec<f64> {
    (0..len).map(|_| rng.gen::<f64>()).collect()
}

/// Replay buffer filled with `n` transitions from random play.
pub fn filled_buffer(config: &EnvConfig, n: usize, seed: u64) -> ReplayBuffer {
    let mut env = reset_env(config, seed);
    let mut rng = stream(seed, "bench-fill");
    let mut buf = ReplayBuffer::new(n);
    let mut state = env.state().to_vec();
    for i in 0..n {
        let action = random_action(env.action_len(), &mut rng);
        let o = env.step(&action).expect("step");
        buf.push(Transition {
            state: state.clone(),
            action,
            reward: o.reward,
            next_state: o.next_state.clone(),
            done: o.done,
        });
        state = if o.done { env.reset(seed + i as u64) } else { o.next_state };
    }
    buf
}

pub fn desk_config() -> ExperimentConfig {
    ExperimentConfig::desk()
}
