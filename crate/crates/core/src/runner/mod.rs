//! Experiment orchestration: multi-seed training, deterministic evaluation,
//! confidence intervals, comparison tables and learning curves.

mod config;
mod report;

pub use config::{ExperimentConfig, Method, Profile, DEFAULT_OUTPUT_ROOT, DESK_SEEDS, OUTPUT_ROOT_ENV, FULL_SEEDS};
pub use report::{
    aggregate, aggregate_seeds, compare_table, curve_rows, emit_learning_curve, Column, ComparisonTable, CurveRow,
    Estimate, MetricSummary, TableRow,
};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::baselines::{HeuristicController, HeuristicKind};
use crate::controller::Controller;
use crate::env::{EnvConfig, HetNetEnv};
use crate::error::{Error, Result};
use crate::neuro::PolicyCheckpoint;
use crate::record::{EpisodeAccumulator, TrainingRecord};
use crate::rng::derive_seed;
use crate::topology::{BaseStation, Bounds, NetworkTopology, ScenarioKind, Tier};
use crate::{ppo, td3};

pub fn checkpoint_path(root: &Path, scenario: ScenarioKind, method: Method, seed: u64) -> PathBuf {
    root.join("checkpoints")
        .join(scenario.slug())
        .join(method.slug())
        .join(format!("seed-{seed}.params"))
}

pub fn record_path(root: &Path, scenario: ScenarioKind, method: Method, seed: u64) -> PathBuf {
    root.join("records")
        .join(scenario.slug())
        .join(method.slug())
        .join(format!("seed-{seed}.csv"))
}

/// Trains one learned method on one seed without touching the filesystem.
pub fn train_seed(cfg: &ExperimentConfig, seed: u64) -> Result<(PolicyCheckpoint, TrainingRecord)> {
    let env = cfg.env_config();
    match cfg.method {
        Method::Td3 => {
            let (agent, rec) = td3::train(&env, &cfg.td3, cfg.total_steps(), seed)?;
            Ok((agent.checkpoint(), rec))
        }
        Method::Ppo => {
            let (agent, rec) = ppo::train(&env, &cfg.ppo, cfg.total_steps(), seed)?;
            Ok((agent.checkpoint(), rec))
        }
        m => Err(Error::Contract(format!("{} is a heuristic and is not trained", m.label()))),
    }
}

/// Trains every configured seed, writing a checkpoint and a record CSV per
/// seed under the output root.
pub fn run_training(cfg: &ExperimentConfig) -> Result<Vec<TrainingRecord>> {
    cfg.validate()?;
    if !cfg.method.is_learned() {
        return Err(Error::Contract(format!(
            "{} is a heuristic and is not trained",
            cfg.method.label()
        )));
    }
    let root = cfg.resolved_output_root();
    let mut records = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        log::info!(
            "training {} on {} with seed {seed} ({} steps)",
            cfg.method.label(),
            cfg.scenario,
            cfg.total_steps()
        );
        let (ckpt, rec) = train_seed(cfg, seed)?;
        ckpt.save(checkpoint_path(&root, cfg.scenario, cfg.method, seed))?;
        rec.write_csv(record_path(&root, cfg.scenario, cfg.method, seed))?;
        records.push(rec);
    }
    Ok(records)
}

/// Loads the training records of every configured seed.
pub fn load_records(cfg: &ExperimentConfig) -> Result<Vec<TrainingRecord>> {
    let root = cfg.resolved_output_root();
    cfg.seeds
        .iter()
        .map(|&seed| TrainingRecord::read_csv(record_path(&root, cfg.scenario, cfg.method, seed), seed))
        .collect()
}

/// Greedy controller around a trained policy.
#[derive(Clone, Debug)]
pub struct PolicyController {
    pub policy: PolicyCheckpoint,
}

impl Controller for PolicyController {
    fn name(&self) -> String {
        self.policy.kind().to_ascii_uppercase()
    }

    fn act(&mut self, _env: &HetNetEnv, state: &[f64]) -> Vec<f64> {
        self.policy
            .greedy_action(state)
            .expect("checkpoint dimensions were checked when it was loaded")
    }
}

/// Builds the controller for `method`; learned methods load their
/// checkpoint for `seed` and check it fits the environment.
pub fn controller_for(cfg: &ExperimentConfig, scenario: ScenarioKind, method: Method, seed: u64) -> Result<Box<dyn Controller>> {
    let kind = match method {
        Method::GOfdma => HeuristicKind::GOfdma,
        Method::IpPc => HeuristicKind::IpPc,
        Method::PfEq => HeuristicKind::PfEq,
        Method::Td3 | Method::Ppo => {
            let path = checkpoint_path(&cfg.resolved_output_root(), scenario, method, seed);
            if !path.is_file() {
                return Err(Error::MissingCheckpoint {
                    scenario: scenario.slug().into(),
                    method: method.slug().into(),
                    seed,
                    path,
                });
            }
            let policy = PolicyCheckpoint::load(&path)?;
            let layout = cfg.env_config_for(scenario).layout();
            let probe = vec![0.0; layout.state_len()];
            let out = policy.greedy_action(&probe)?;
            if out.len() != layout.action_len() {
                return Err(Error::Dimension {
                    context: "checkpoint action length",
                    expected: layout.action_len(),
                    got: out.len(),
                });
            }
            return Ok(Box::new(PolicyController { policy }));
        }
    };
    Ok(Box::new(HeuristicController::new(kind)))
}

/// Metrics of one evaluation episode; every field is a per-step mean.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub episode: usize,
    pub mean_band_fraction: f64,
    pub mean_power_norm: f64,
    pub mean_sched_score: f64,
    pub mean_reward: f64,
    pub mean_fairness: f64,
}

pub const EVAL_HEADER: &str = "seed,episode,mean_band_fraction,mean_power_norm,mean_sched_score,mean_reward,mean_fairness";

pub fn eval_episode_seed(seed: u64, episode: u64) -> u64 {
    derive_seed(seed ^ episode.wrapping_mul(0xD1B5_4A32_D192_ED03), "eval-episode")
}

/// Plays `n_episodes` full episodes with `controller`; episode `k` is reset
/// with [`eval_episode_seed`]`(seed, k)`.
pub fn evaluate_policy(controller: &mut dyn Controller, env_config: &EnvConfig, n_episodes: usize, seed: u64) -> Result<Vec<EvalRow>> {
    if n_episodes == 0 {
        return Err(Error::config("eval_episodes", "must be at least 1"));
    }
    let mut env = HetNetEnv::new(env_config.clone())?;
    let mut rows = Vec::with_capacity(n_episodes);
    for ep in 0..n_episodes {
        let mut state = env.reset(eval_episode_seed(seed, ep as u64));
        controller.begin_episode(&env);
        let mut acc = EpisodeAccumulator::default();
        loop {
            let action = controller.act(&env, &state);
            let outcome = env.step(&action)?;
            controller.observe(&outcome);
            acc.push(&outcome);
            if outcome.done {
                break;
            }
            state = outcome.next_state;
        }
        let s = acc.finish(ep);
        rows.push(EvalRow {
            episode: ep,
            mean_band_fraction: s.mean_band_fraction,
            mean_power_norm: s.mean_power_norm,
            mean_sched_score: s.mean_sched_score,
            mean_reward: s.mean_reward,
            mean_fairness: s.mean_fairness,
        });
    }
    Ok(rows)
}

/// Evaluation rows of every configured seed for one (scenario, method).
pub fn evaluate_method(cfg: &ExperimentConfig, scenario: ScenarioKind, method: Method) -> Result<Vec<(u64, Vec<EvalRow>)>> {
    let env = cfg.env_config_for(scenario);
    cfg.seeds
        .iter()
        .map(|&seed| {
            let mut ctrl = controller_for(cfg, scenario, method, seed)?;
            Ok((seed, evaluate_policy(ctrl.as_mut(), &env, cfg.eval_episodes, seed)?))
        })
        .collect()
}

pub fn eval_rows_csv(rows: &[(u64, Vec<EvalRow>)]) -> String {
    let mut out = format!("{EVAL_HEADER}\n");
    for (seed, rs) in rows {
        for r in rs {
            out.push_str(&format!(
                "{seed},{},{},{},{},{},{}\n",
                r.episode, r.mean_band_fraction, r.mean_power_norm, r.mean_sched_score, r.mean_reward, r.mean_fairness
            ));
        }
    }
    out
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_eval_csv(path: &Path, rows: &[(u64, Vec<EvalRow>)]) -> Result<()> {
    write_text(path, &eval_rows_csv(rows))
}

/// One macro station in the middle of the default area: the smallest
/// instance of the problem, used for learning sanity checks.
pub fn toy_env_config(n_users: usize, horizon: usize) -> EnvConfig {
    let bounds = Bounds::default();
    let station = BaseStation::with_defaults(0, Tier::Macro, bounds.center());
    let topology = NetworkTopology::new(vec![station], Vec::new(), bounds).expect("single-station topology is valid");
    EnvConfig::new(topology, n_users, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ConstantController;

    fn tiny_cfg(root: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk();
        cfg.output_root = Some(root.to_path_buf());
        cfg.seeds = vec![1, 2];
        cfg.episodes = 2;
        cfg.horizon = 10;
        cfg.n_users = 5;
        cfg.eval_episodes = 2;
        cfg.td3.hidden = vec![8];
        cfg.td3.warmup_steps = 5;
        cfg.td3.batch_size = 4;
        cfg.ppo.hidden = vec![8];
        cfg.ppo.rollout_t = 8;
        cfg.ppo.minibatch = 4;
        cfg
    }

    #[test]
    fn heuristics_are_not_trained() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(dir.path());
        cfg.method = Method::IpPc;
        assert!(matches!(run_training(&cfg), Err(Error::Contract(_))));
    }

    #[test]
    fn training_writes_one_record_per_seed_and_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        for method in [Method::Td3, Method::Ppo] {
            let mut cfg = tiny_cfg(dir.path());
            cfg.method = method;
            let recs = run_training(&cfg).unwrap();
            assert_eq!(recs.len(), 2);
            for r in &recs {
                assert_eq!(r.total_steps, cfg.total_steps());
                assert_eq!(r.episodes.len(), cfg.episodes);
                assert!(checkpoint_path(dir.path(), cfg.scenario, method, r.seed).is_file());
            }
            let again = train_seed(&cfg, 1).unwrap().1;
            assert_eq!(again, recs[0]);
            let loaded = load_records(&cfg).unwrap();
            assert_eq!(loaded[0].episodes.len(), recs[0].episodes.len());
        }
    }

    #[test]
    fn missing_checkpoint_names_the_cell() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(dir.path());
        let err = controller_for(&cfg, ScenarioKind::Hotspot, Method::Td3, 2).err().unwrap();
        let msg = err.to_string();
        assert!(msg.contains("hotspot") && msg.contains("td3") && msg.contains("seed 2"), "{msg}");
    }

    #[test]
    fn evaluation_is_deterministic_and_zero_band_for_zero_action() {
        let env = toy_env_config(3, 12);
        let mut zero = ConstantController {
            action: vec![0.0; env.layout().action_len()],
        };
        let rows = evaluate_policy(&mut zero, &env, 3, 4).unwrap();
        assert!(rows.iter().all(|r| r.mean_band_fraction == 0.0));
        let mut g = HeuristicController::new(HeuristicKind::GOfdma);
        let a = evaluate_policy(&mut g, &env, 2, 9).unwrap();
        let b = evaluate_policy(&mut HeuristicController::new(HeuristicKind::GOfdma), &env, 2, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| (r.mean_power_norm - 0.98).abs() < 1e-12));
    }
}
