//! Per-episode training statistics and the episode driver shared by both
//! agents' training loops.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::env::{HetNetEnv, StepOutcome};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Step-averaged statistics of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_fairness: f64,
    pub mean_power_norm: f64,
    pub mean_band_fraction: f64,
    pub mean_sched_score: f64,
}

#[derive(Clone, Debug, Default)]
pub struct EpisodeAccumulator {
    steps: usize,
    reward: f64,
    fairness: f64,
    power: f64,
    band: f64,
    sched: f64,
}

impl EpisodeAccumulator {
    pub fn push(&mut self, outcome: &StepOutcome) {
        self.steps += 1;
        self.reward += outcome.reward;
        self.fairness += outcome.info.fairness;
        self.power += outcome.info.mean_power_norm;
        self.band += outcome.info.mean_band_fraction;
        self.sched += outcome.info.mean_sched_score;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn finish(&self, episode: usize) -> EpisodeStats {
        let n = self.steps.max(1) as f64;
        EpisodeStats {
            episode,
            mean_reward: self.reward / n,
            mean_fairness: self.fairness / n,
            mean_power_norm: self.power / n,
            mean_band_fraction: self.band / n,
            mean_sched_score: self.sched / n,
        }
    }
}

/// Learning trace of one training run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingRecord {
    pub seed: u64,
    pub total_steps: usize,
    pub episodes: Vec<EpisodeStats>,
}

pub const RECORD_HEADER: &str = "episode,mean_reward,mean_fairness,mean_power_norm,mean_band_fraction,mean_sched_score";

impl TrainingRecord {
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.mean_reward).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(RECORD_HEADER);
        out.push('\n');
        for e in &self.episodes {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.episode, e.mean_reward, e.mean_fairness, e.mean_power_norm, e.mean_band_fraction, e.mean_sched_score
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>, seed: u64) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut episodes = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(parse_err(format!("expected 6 fields, found {}", f.len())));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| parse_err(format!("bad number `{s}`")));
            episodes.push(EpisodeStats {
                episode: f[0].trim().parse().map_err(|_| parse_err(format!("bad episode `{}`", f[0])))?,
                mean_reward: num(f[1])?,
                mean_fairness: num(f[2])?,
                mean_power_norm: num(f[3])?,
                mean_band_fraction: num(f[4])?,
                mean_sched_score: num(f[5])?,
            });
        }
        Ok(TrainingRecord {
            seed,
            total_steps: 0,
            episodes,
        })
    }
}

/// Runs consecutive episodes on one environment, re-seeding each reset from
/// `(seed, episode index)` and collecting per-episode statistics.
pub struct EpisodeDriver {
    pub env: HetNetEnv,
    seed: u64,
    episode: usize,
    state: Vec<f64>,
    acc: EpisodeAccumulator,
    pub record: TrainingRecord,
}

impl EpisodeDriver {
    pub fn new(mut env: HetNetEnv, seed: u64) -> Self {
        let state = env.reset(episode_seed(seed, 0));
        EpisodeDriver {
            env,
            seed,
            episode: 0,
            state,
            acc: EpisodeAccumulator::default(),
            record: TrainingRecord {
                seed,
                total_steps: 0,
                episodes: Vec::new(),
            },
        }
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Steps the environment; on episode end the statistics are stored and
    /// the next episode starts immediately.
    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        let outcome = self.env.step(action)?;
        self.acc.push(&outcome);
        self.record.total_steps += 1;
        if outcome.done {
            self.record.episodes.push(self.acc.finish(self.episode));
            self.acc = EpisodeAccumulator::default();
            self.episode += 1;
            self.state = self.env.reset(episode_seed(self.seed, self.episode as u64));
        } else {
            self.state = outcome.next_state.clone();
        }
        Ok(outcome)
    }

    pub fn into_record(self) -> TrainingRecord {
        self.record
    }
}

pub fn episode_seed(seed: u64, episode: u64) -> u64 {
    derive_seed(seed ^ episode.wrapping_mul(0x9E37_79B9_7F4A_7C15), "train-episode")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let rec = TrainingRecord {
            seed: 3,
            total_steps: 0,
            episodes: vec![EpisodeStats {
                episode: 0,
                mean_reward: 1.25,
                mean_fairness: 0.5,
                mean_power_norm: 0.1,
                mean_band_fraction: 0.2,
                mean_sched_score: 0.3,
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        rec.write_csv(&p).unwrap();
        assert_eq!(TrainingRecord::read_csv(&p, 3).unwrap(), rec);
    }
}
