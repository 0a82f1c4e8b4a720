use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::env::{EnvConfig, RewardWeights};
use crate::error::{Error, Result};
use crate::ppo::PpoConfig;
use crate::td3::Td3Config;
use crate::topology::ScenarioKind;

/// Environment variable naming the default output root directory.
pub const OUTPUT_ROOT_ENV: &str = "HETNET_OUTPUT";
pub const DEFAULT_OUTPUT_ROOT: &str = "results";

/// Seed set of the full-scale protocol.
pub const FULL_SEEDS: [u64; 10] = [0, 10, 18, 28, 42, 64, 128, 256, 512, 1024];
pub const DESK_SEEDS: [u64; 3] = [0, 10, 18];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Td3,
    Ppo,
    GOfdma,
    IpPc,
    PfEq,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Td3, Method::Ppo, Method::GOfdma, Method::IpPc, Method::PfEq];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Td3 => "TD3",
            Method::Ppo => "PPO",
            Method::GOfdma => "G-OFDMA",
            Method::IpPc => "IP-PC",
            Method::PfEq => "PF-EQ",
        }
    }

    pub fn slug(&self) -> &'static str {
        match self {
            Method::Td3 => "td3",
            Method::Ppo => "ppo",
            Method::GOfdma => "g-ofdma",
            Method::IpPc => "ip-pc",
            Method::PfEq => "pf-eq",
        }
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, Method::Td3 | Method::Ppo)
    }

    /// Parses a comma-separated list; `all` expands to every method.
    pub fn parse_list(s: &str) -> std::result::Result<Vec<Method>, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                out.extend(Method::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        if out.is_empty() {
            return Err("empty method list".into());
        }
        let mut seen = HashSet::new();
        out.retain(|m| seen.insert(*m));
        Ok(out)
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match norm.as_str() {
            "td3" => Ok(Method::Td3),
            "ppo" => Ok(Method::Ppo),
            "gofdma" => Ok(Method::GOfdma),
            "ippc" => Ok(Method::IpPc),
            "pfeq" => Ok(Method::PfEq),
            _ => Err(format!("unknown method `{s}` (expected td3, ppo, g-ofdma, ip-pc or pf-eq)")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Desk,
    Full,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            _ => Err(format!("unknown profile `{s}` (expected desk or full)")),
        }
    }
}

/// Everything that determines a training or evaluation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub horizon: usize,
    pub n_users: usize,
    pub eval_episodes: usize,
    /// Seeds the station placement of the scenarios that randomize it.
    pub layout_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_root: Option<PathBuf>,
    pub channel: ChannelParams,
    pub weights: RewardWeights,
    pub td3: Td3Config,
    pub ppo: PpoConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// Scaled-down protocol: 3 seeds, 200 episodes of 200 steps, 20 users.
    ///
    /// Agent settings are resized for a 40k-step budget: small networks,
    /// larger learning rates and short PPO rollouts. Both agents also
    /// score actions by the immediate reward alone (γ = 0, λ = 0). The channel evolves
    /// independently of the actions, so every γ has the same optimal policy,
    /// while the bootstrapped future-value term only adds action-independent
    /// noise. Within this budget that noise stalls TD3 entirely and slows PPO.
    pub fn desk() -> Self {
        ExperimentConfig {
            scenario: ScenarioKind::DenseUrban,
            method: Method::Ppo,
            seeds: DESK_SEEDS.to_vec(),
            episodes: 200,
            horizon: 200,
            n_users: 20,
            eval_episodes: 20,
            layout_seed: 0,
            output_root: None,
            channel: ChannelParams::default(),
            weights: RewardWeights::default(),
            td3: Td3Config {
                hidden: vec![64, 64],
                batch_size: 64,
                lr_actor: 3e-4,
                lr_critic: 1e-3,
                reward_scale: 1e-3,
                gamma: 0.0,
                ..Td3Config::default()
            },
            ppo: PpoConfig {
                hidden: vec![64, 64],
                rollout_t: 250,
                lr: 6e-4,
                gamma: 0.0,
                gae_lambda: 0.0,
                entropy_coef: 0.0,
                init_log_std: -1.0,
                reward_scale: 1e-3,
                ..PpoConfig::default()
            },
        }
    }

    /// Full protocol: 10 seeds, 1000 episodes of 1000 steps, 50 users.
    pub fn full() -> Self {
        ExperimentConfig {
            seeds: FULL_SEEDS.to_vec(),
            episodes: 1000,
            horizon: 1000,
            n_users: 50,
            td3: Td3Config::default(),
            ppo: PpoConfig::default(),
            ..Self::desk()
        }
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => Self::desk(),
            Profile::Full => Self::full(),
        }
    }

    /// Parses TOML on top of the desk profile; see [`Self::from_toml_with_base`].
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        Self::from_toml_with_base(text, origin, Profile::Desk)
    }

    /// Parses TOML. Keys left out fall back to `base`, unless the file names
    /// its own top-level `profile = "desk" | "full"`.
    pub fn from_toml_with_base(text: &str, origin: &Path, base: Profile) -> Result<Self> {
        let mut value: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            path: origin.to_path_buf(),
            line: line_of(text, e.span()),
            msg: e.message().to_string(),
        })?;
        let profile = match value.remove("profile") {
            None => base,
            Some(toml::Value::String(s)) => s.parse().map_err(|m: String| Error::config("profile", m))?,
            Some(_) => return Err(Error::config("profile", "must be a string")),
        };
        let base = toml::Table::try_from(Self::for_profile(profile)).expect("config serializes");
        let merged = merge(base, value);
        let cfg: ExperimentConfig = toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| {
            let msg = e.message().to_string();
            Error::config(offending_key(&msg).unwrap_or_else(|| "config".into()), msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_base(path, Profile::Desk)
    }

    pub fn load_with_base(path: impl AsRef<Path>, base: Profile) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_with_base(&text, path, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        let mut seen = HashSet::new();
        for s in &self.seeds {
            if !seen.insert(s) {
                return Err(Error::config("seeds", format!("seed {s} listed twice")));
            }
        }
        if self.episodes == 0 {
            return Err(Error::config("episodes", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.n_users == 0 {
            return Err(Error::config("n_users", "must be at least 1"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes", "must be at least 1"));
        }
        self.td3.validate()?;
        self.ppo.validate()?;
        self.env_config().validate()
    }

    pub fn total_steps(&self) -> usize {
        self.episodes * self.horizon
    }

    pub fn env_config(&self) -> EnvConfig {
        self.env_config_for(self.scenario)
    }

    pub fn env_config_for(&self, scenario: ScenarioKind) -> EnvConfig {
        EnvConfig {
            channel: self.channel,
            weights: self.weights,
            ..EnvConfig::for_scenario(scenario, self.n_users, self.horizon, self.layout_seed)
        }
    }

    /// Config value, else the environment variable, else `results`.
    pub fn resolved_output_root(&self) -> PathBuf {
        self.output_root
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
    }
}

fn merge(mut base: toml::Table, over: toml::Table) -> toml::Table {
    for (k, v) in over {
        match (base.remove(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                base.insert(k, toml::Value::Table(merge(b, o)));
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}

fn line_of(text: &str, span: Option<std::ops::Range<usize>>) -> usize {
    span.map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1)
}

/// Pulls the field name out of serde's "unknown field `x`" / "invalid type
/// ... for key `x`" style messages.
fn offending_key(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}
