//! Downlink resource allocation for heterogeneous cellular networks.
//!
//! The crate bundles a stochastic HetNet simulator (topology, channel and
//! MDP environment), a small dense-network toolkit, TD3 and PPO agents built
//! on it, three heuristic baselines, and the experiment runner that trains,
//! evaluates and compares them across four deployment scenarios.

pub mod baselines;
pub mod bridge;
pub mod channel;
pub mod controller;
pub mod env;
pub mod error;
pub mod neuro;
pub mod ppo;
pub mod record;
pub mod runner;
pub mod rng;
pub mod td3;
pub mod topology;

pub use error::{Error, Result};

pub use channel::ChannelParams;
pub use controller::Controller;
pub use env::{EnvConfig, HetNetEnv, Layout, RewardWeights, StepInfo, StepOutcome};
pub use neuro::PolicyCheckpoint;
pub use record::{EpisodeStats, TrainingRecord};
pub use runner::{ExperimentConfig, Method, MetricSummary};
pub use topology::{BaseStation, Bounds, NetworkTopology, Point, ScenarioKind, Tier};
