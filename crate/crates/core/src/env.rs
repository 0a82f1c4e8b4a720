//! The downlink resource-allocation MDP.
//!
//! State layout (all entries in `[0, 1]`):
//! `[power (N_B) | interference (N_U) | allocation (N_B*N_U, row-major) | station xy (2*N_B) | user xy (2*N_U)]`
//!
//! Action layout (entries clamped to `[0, 1]`):
//! `[power adjustment (N_B) | bandwidth fraction (N_B) | scheduling score (N_U)]`

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelParams, ChannelRealization};
use crate::error::{Error, Result};
use crate::rng::{self, SimRng};
use crate::topology::{NetworkTopology, ScenarioKind, UserLayout};

/// Floor added to every scheduling score before shares are formed.
pub const SCORE_EPS: f64 = 1e-6;

/// Bandwidth over which the interference squashing reference is measured.
pub const NOISE_REF_BAND_HZ: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub kappa: f64,
    pub beta: f64,
    pub phi: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            kappa: 1.0,
            beta: 0.01,
            phi: 0.96,
        }
    }
}

/// Vector layout for a given number of stations and users.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n_stations: usize,
    pub n_users: usize,
}

impl Layout {
    pub fn new(n_stations: usize, n_users: usize) -> Self {
        Layout { n_stations, n_users }
    }

    pub fn state_len(&self) -> usize {
        let (b, u) = (self.n_stations, self.n_users);
        b + u + b * u + 2 * b + 2 * u
    }

    pub fn action_len(&self) -> usize {
        2 * self.n_stations + self.n_users
    }

    pub fn power_adj<'a>(&self, action: &'a [f64]) -> &'a [f64] {
        &action[..self.n_stations]
    }

    pub fn band_alloc<'a>(&self, action: &'a [f64]) -> &'a [f64] {
        &action[self.n_stations..2 * self.n_stations]
    }

    pub fn sched_scores<'a>(&self, action: &'a [f64]) -> &'a [f64] {
        &action[2 * self.n_stations..]
    }

    /// Packs the three action blocks into one vector.
    pub fn pack_action(&self, power_adj: &[f64], band_alloc: &[f64], scores: &[f64]) -> Vec<f64> {
        debug_assert_eq!(power_adj.len(), self.n_stations);
        debug_assert_eq!(band_alloc.len(), self.n_stations);
        debug_assert_eq!(scores.len(), self.n_users);
        let mut a = Vec::with_capacity(self.action_len());
        a.extend_from_slice(power_adj);
        a.extend_from_slice(band_alloc);
        a.extend_from_slice(scores);
        a
    }
}

pub fn clamp_action(raw: &[f64]) -> Vec<f64> {
    raw.iter().map(|&v| clamp_unit(v)).collect()
}

/// Clamp to `[0, 1]`, sending NaN to 0.
pub fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Station layout and bounds; any users stored here are ignored because
    /// users are re-drawn on every reset.
    pub topology: NetworkTopology,
    pub user_layout: UserLayout,
    pub n_users: usize,
    pub channel: ChannelParams,
    pub horizon: usize,
    pub weights: RewardWeights,
    pub gamma: f64,
}

impl EnvConfig {
    pub fn new(topology: NetworkTopology, n_users: usize, horizon: usize) -> Self {
        EnvConfig {
            topology,
            user_layout: UserLayout::Uniform,
            n_users,
            channel: ChannelParams::default(),
            horizon,
            weights: RewardWeights::default(),
            gamma: 0.99,
        }
    }

    /// Environment for one of the evaluation scenarios. `layout_seed` only
    /// matters for scenarios with randomly placed stations.
    pub fn for_scenario(kind: ScenarioKind, n_users: usize, horizon: usize, layout_seed: u64) -> Self {
        EnvConfig {
            user_layout: kind.user_layout(),
            ..Self::new(crate::topology::scenario_stations(kind, layout_seed), n_users, horizon)
        }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.topology.n_stations(), self.n_users)
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.channel.validate()?;
        if self.n_users == 0 {
            return Err(Error::config("env.n_users", "at least one user is required"));
        }
        if self.horizon == 0 {
            return Err(Error::config("env.horizon", "must be at least 1"));
        }
        let w = &self.weights;
        if !(w.kappa >= 0.0 && w.beta >= 0.0 && w.phi >= 0.0) {
            return Err(Error::config("env.weights", "kappa, beta and phi must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("env.gamma", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Decoded physical controls for one timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalAllocation {
    /// Transmit power per station, mW.
    pub powers: Vec<f64>,
    pub band_fractions: Vec<f64>,
    /// Serving station index per user.
    pub serving: Vec<usize>,
    /// Allocated bandwidth per user, Hz.
    pub user_bands: Vec<f64>,
}

impl PhysicalAllocation {
    /// Association as a `{0, 1}` station-by-user matrix.
    pub fn association(&self) -> Array2<u8> {
        let mut a = Array2::zeros((self.powers.len(), self.serving.len()));
        for (u, &b) in self.serving.iter().enumerate() {
            a[[b, u]] = 1;
        }
        a
    }

    /// Bandwidth actually handed to users by each station over its carrier width.
    pub fn delivered_band_fractions(&self, topology: &NetworkTopology) -> Vec<f64> {
        let mut used = vec![0.0; self.powers.len()];
        for (u, &b) in self.serving.iter().enumerate() {
            used[b] += self.user_bands[u];
        }
        used.iter()
            .zip(&topology.stations)
            .map(|(&hz, s)| (hz / s.band_total).min(1.0))
            .collect()
    }
}

/// Serving station per user: strongest received power, ties to the lowest id.
pub fn associate(powers: &[f64], gains: &Array2<f64>, topology: &NetworkTopology) -> Vec<usize> {
    let order = topology.station_index_by_id();
    (0..gains.ncols())
        .map(|u| {
            let mut best = order[0];
            let mut best_rx = powers[best] * gains[[best, u]];
            for &b in &order[1..] {
                let rx = powers[b] * gains[[b, u]];
                if rx > best_rx {
                    best = b;
                    best_rx = rx;
                }
            }
            best
        })
        .collect()
}

/// Maps a normalized action onto powers, bandwidths and per-user shares.
pub fn decode_action(raw: &[f64], topology: &NetworkTopology, gains: &Array2<f64>) -> Result<PhysicalAllocation> {
    let layout = Layout::new(topology.n_stations(), gains.ncols());
    if raw.len() != layout.action_len() {
        return Err(Error::Dimension {
            context: "action",
            expected: layout.action_len(),
            got: raw.len(),
        });
    }
    let a = clamp_action(raw);
    let powers: Vec<f64> = layout
        .power_adj(&a)
        .iter()
        .zip(&topology.stations)
        .map(|(&p, s)| s.p_min + p * (s.p_max - s.p_min))
        .collect();
    let band_fractions = layout.band_alloc(&a).to_vec();
    let serving = associate(&powers, gains, topology);

    let scores = layout.sched_scores(&a);
    let mut cell_weight = vec![0.0; topology.n_stations()];
    for (u, &b) in serving.iter().enumerate() {
        cell_weight[b] += scores[u] + SCORE_EPS;
    }
    let user_bands = serving
        .iter()
        .enumerate()
        .map(|(u, &b)| {
            let share = (scores[u] + SCORE_EPS) / cell_weight[b];
            band_fractions[b] * topology.stations[b].band_total * share
        })
        .collect();

    Ok(PhysicalAllocation {
        powers,
        band_fractions,
        serving,
        user_bands,
    })
}

/// Jain's index; the all-zero vector counts as perfectly fair.
pub fn jain_fairness(z: &[f64]) -> f64 {
    assert!(!z.is_empty(), "fairness of an empty allocation");
    let sum: f64 = z.iter().sum();
    let sum_sq: f64 = z.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        return 1.0;
    }
    (sum * sum / (z.len() as f64 * sum_sq)).min(1.0)
}

/// Weighted reward with throughput in Mbit/s and power in W.
pub fn compute_reward(throughputs_bps: &[f64], powers_mw: &[f64], weights: &RewardWeights) -> f64 {
    let sum_mbps: f64 = throughputs_bps.iter().sum::<f64>() / 1e6;
    let sum_w: f64 = powers_mw.iter().sum::<f64>() / 1e3;
    weights.kappa * sum_mbps - weights.beta * sum_w + weights.phi * jain_fairness(throughputs_bps)
}

/// Interference squashing `i / (i + noise_ref)`.
pub fn squash_interference(interference_mw: f64, noise_ref_mw: f64) -> f64 {
    interference_mw / (interference_mw + noise_ref_mw)
}

/// Aggregate interference at every user from all non-serving stations.
pub fn interference_per_user(powers: &[f64], gains: &Array2<f64>, serving: &[usize]) -> Vec<f64> {
    serving
        .iter()
        .enumerate()
        .map(|(u, &sb)| {
            (0..powers.len())
                .filter(|&b| b != sb)
                .map(|b| powers[b] * gains[[b, u]])
                .sum()
        })
        .collect()
}

/// Assembles the normalized observation vector.
pub fn build_state(
    powers: &[f64],
    interference: &[f64],
    serving: &[usize],
    user_bands: &[f64],
    topology: &NetworkTopology,
    noise_ref_mw: f64,
) -> Result<Vec<f64>> {
    let nb = topology.n_stations();
    let nu = topology.n_users();
    for (context, expected, got) in [
        ("state.powers", nb, powers.len()),
        ("state.interference", nu, interference.len()),
        ("state.serving", nu, serving.len()),
        ("state.user_bands", nu, user_bands.len()),
    ] {
        if expected != got {
            return Err(Error::Dimension { context, expected, got });
        }
    }
    let layout = Layout::new(nb, nu);
    let mut s = Vec::with_capacity(layout.state_len());
    s.extend(
        powers
            .iter()
            .zip(&topology.stations)
            .map(|(&p, st)| clamp_unit((p - st.p_min) / st.power_span())),
    );
    s.extend(interference.iter().map(|&i| squash_interference(i, noise_ref_mw)));
    let alloc_start = s.len();
    s.resize(alloc_start + nb * nu, 0.0);
    for (u, &b) in serving.iter().enumerate() {
        s[alloc_start + b * nu + u] = clamp_unit(user_bands[u] / topology.stations[b].band_total);
    }
    for st in &topology.stations {
        let (x, y) = topology.bounds.normalize(&st.position);
        s.push(x);
        s.push(y);
    }
    for p in &topology.users {
        let (x, y) = topology.bounds.normalize(p);
        s.push(x);
        s.push(y);
    }
    debug_assert_eq!(s.len(), layout.state_len());
    Ok(s)
}

/// Per-step diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub per_user_throughput: Vec<f64>,
    pub total_power_mw: f64,
    pub fairness: f64,
    /// Mean over stations of delivered bandwidth over carrier width.
    pub mean_band_fraction: f64,
    /// Mean over stations of `(P - p_min) / (p_max - p_min)`.
    pub mean_power_norm: f64,
    pub mean_sched_score: f64,
}

impl StepInfo {
    pub fn sum_throughput_mbps(&self) -> f64 {
        self.per_user_throughput.iter().sum::<f64>() / 1e6
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One environment instance. Single caller; see [`HetNetEnv::reset`] for seeding.
#[derive(Clone, Debug)]
pub struct HetNetEnv {
    config: EnvConfig,
    topology: NetworkTopology,
    channel: Option<ChannelRealization>,
    step_rng: SimRng,
    step_index: usize,
    done: bool,
    noise_ref_mw: f64,
    state: Vec<f64>,
}

impl HetNetEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let mut topology = config.topology.clone();
        topology.users.clear();
        let noise_ref_mw = config.channel.noise_mw(NOISE_REF_BAND_HZ);
        Ok(HetNetEnv {
            config,
            topology,
            channel: None,
            step_rng: rng::stream(0, "unused"),
            step_index: 0,
            done: false,
            noise_ref_mw,
            state: Vec::new(),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn layout(&self) -> Layout {
        self.config.layout()
    }

    pub fn state_len(&self) -> usize {
        self.layout().state_len()
    }

    pub fn action_len(&self) -> usize {
        self.layout().action_len()
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    /// Current layout including this episode's users.
    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn noise_ref_mw(&self) -> f64 {
        self.noise_ref_mw
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Channel gains the next `step` will act on.
    pub fn current_gains(&self) -> Option<&Array2<f64>> {
        self.channel.as_ref().map(|c| &c.gains)
    }

    pub fn current_channel(&self) -> Option<&ChannelRealization> {
        self.channel.as_ref()
    }

    /// Starts an episode: redraws users and shadowing, sets every station to
    /// its minimum power with no bandwidth allocated, and associates users to
    /// the strongest gain. Deterministic in `seed`.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut episode_rng = rng::stream(seed, "episode");
        self.step_rng = rng::stream(seed, "step");
        self.topology.users = self
            .config
            .user_layout
            .sample(&self.topology, self.config.n_users, &mut episode_rng);
        let realization = channel::sample_channel_state(
            &self.topology,
            &self.config.channel,
            &mut episode_rng,
            &mut self.step_rng,
        );
        let powers: Vec<f64> = self.topology.stations.iter().map(|s| s.p_min).collect();
        let ones = vec![1.0; powers.len()];
        let serving = associate(&ones, &realization.gains, &self.topology);
        let interference = interference_per_user(&powers, &realization.gains, &serving);
        let user_bands = vec![0.0; self.config.n_users];
        self.state = build_state(&powers, &interference, &serving, &user_bands, &self.topology, self.noise_ref_mw)
            .expect("reset dimensions are consistent");
        self.channel = Some(realization);
        self.step_index = 0;
        self.done = false;
        self.state.clone()
    }

    /// Applies one action to the current channel, then advances fading.
    pub fn step(&mut self, raw_action: &[f64]) -> Result<StepOutcome> {
        let realization = self
            .channel
            .as_ref()
            .ok_or_else(|| Error::Contract("step called before reset".into()))?;
        if self.done {
            return Err(Error::Contract("step called after the episode finished".into()));
        }
        let alloc = decode_action(raw_action, &self.topology, &realization.gains)?;
        let gains = &realization.gains;
        let params = &self.config.channel;
        let interference = interference_per_user(&alloc.powers, gains, &alloc.serving);
        let throughputs: Vec<f64> = alloc
            .serving
            .iter()
            .enumerate()
            .map(|(u, &b)| {
                let band = alloc.user_bands[u];
                let sinr = alloc.powers[b] * gains[[b, u]] / (interference[u] + params.noise_mw(band));
                channel::throughput(band, sinr)
            })
            .collect();
        let reward = compute_reward(&throughputs, &alloc.powers, &self.config.weights);
        let fairness = jain_fairness(&throughputs);

        let layout = self.layout();
        let clamped = clamp_action(raw_action);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let info = StepInfo {
            total_power_mw: alloc.powers.iter().sum(),
            fairness,
            mean_band_fraction: mean(&alloc.delivered_band_fractions(&self.topology)),
            mean_power_norm: mean(layout.power_adj(&clamped)),
            mean_sched_score: mean(layout.sched_scores(&clamped)),
            per_user_throughput: throughputs,
        };

        let next_state = build_state(
            &alloc.powers,
            &interference,
            &alloc.serving,
            &alloc.user_bands,
            &self.topology,
            self.noise_ref_mw,
        )?;
        let next_channel = realization.refade(params.eta, &mut self.step_rng);
        self.channel = Some(next_channel);
        self.step_index += 1;
        self.done = self.step_index >= self.config.horizon;
        self.state = next_state.clone();
        Ok(StepOutcome {
            next_state,
            reward,
            done: self.done,
            info,
        })
    }
}

/// Per-step CSV trace: `episode,step,reward,fairness,total_power_mW,sum_throughput_Mbps`.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "episode,step,reward,fairness,total_power_mW,sum_throughput_Mbps")?;
        Ok(TraceWriter { out })
    }

    pub fn record(&mut self, episode: usize, step: usize, outcome: &StepOutcome) -> std::io::Result<()> {
        writeln!(
            self.out,
            "{episode},{step},{},{},{},{}",
            outcome.reward,
            outcome.info.fairness,
            outcome.info.total_power_mw,
            outcome.info.sum_throughput_mbps()
        )
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{BaseStation, Bounds, Point, Tier};
    use proptest::prelude::*;

    fn single_cell(n_users: usize) -> EnvConfig {
        let topo = NetworkTopology::new(
            vec![BaseStation::with_defaults(0, Tier::Macro, Point::new(1000.0, 1000.0))],
            Vec::new(),
            Bounds::default(),
        )
        .unwrap();
        EnvConfig::new(topo, n_users, 5)
    }

    #[test]
    fn fairness_examples() {
        assert_eq!(jain_fairness(&[3.0; 7]), 1.0);
        assert!((jain_fairness(&[5.0, 0.0, 0.0, 0.0]) - 0.25).abs() < 1e-15);
        assert!((jain_fairness(&[1.0, 2.0, 3.0]) - 6.0 / 7.0).abs() < 1e-12);
        assert_eq!(jain_fairness(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn reward_examples() {
        let w = RewardWeights {
            kappa: 0.0,
            beta: 0.0,
            phi: 0.0,
        };
        assert_eq!(compute_reward(&[0.0, 0.0], &[0.0], &w), 0.0);
        let w = RewardWeights {
            kappa: 1.0,
            beta: 0.0,
            phi: 0.0,
        };
        assert!((compute_reward(&[1e6, 2e6], &[500.0], &w) - 3.0).abs() < 1e-12);
        let w = RewardWeights {
            kappa: 0.0,
            beta: 0.01,
            phi: 0.0,
        };
        assert!((compute_reward(&[1.0], &[30_000.0, 10_000.0], &w) + 0.4).abs() < 1e-12);
    }

    #[test]
    fn state_length_formula() {
        assert_eq!(Layout::new(13, 50).state_len(), 839);
        assert_eq!(Layout::new(13, 50).action_len(), 76);
    }

    #[test]
    fn affine_power_decoding() {
        let cfg = single_cell(2);
        let mut env = HetNetEnv::new(cfg).unwrap();
        env.reset(1);
        let gains = env.current_gains().unwrap().clone();
        let s = &env.topology().stations[0];
        for (adj, expect) in [(0.0, s.p_min), (1.0, s.p_max), (0.5, 0.5 * (s.p_min + s.p_max))] {
            let alloc = decode_action(&[adj, 1.0, 0.3, 0.3], env.topology(), &gains).unwrap();
            assert_eq!(alloc.powers[0], expect);
        }
        let alloc = decode_action(&[0.2, 1.0, 0.7, 0.7], env.topology(), &gains).unwrap();
        assert_eq!(alloc.user_bands, vec![s.band_total / 2.0; 2]);
    }

    #[test]
    fn decode_rejects_wrong_length() {
        let cfg = single_cell(2);
        let mut env = HetNetEnv::new(cfg).unwrap();
        env.reset(1);
        let gains = env.current_gains().unwrap().clone();
        assert!(matches!(
            decode_action(&[0.0; 3], env.topology(), &gains),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let topo = NetworkTopology::new(
            vec![
                BaseStation::with_defaults(7, Tier::Macro, Point::new(0.0, 0.0)),
                BaseStation::with_defaults(2, Tier::Macro, Point::new(10.0, 0.0)),
            ],
            vec![Point::new(5.0, 0.0)],
            Bounds::square(10.0),
        )
        .unwrap();
        let gains = Array2::from_elem((2, 1), 1e-3);
        assert_eq!(associate(&[1.0, 1.0], &gains, &topo), vec![1]);
    }

    #[test]
    fn reset_state_shape_and_determinism() {
        let cfg = EnvConfig::for_scenario(ScenarioKind::DenseUrban, 50, 10, 0);
        let mut env = HetNetEnv::new(cfg).unwrap();
        let s1 = env.reset(3);
        let s2 = env.reset(3);
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 839);
        assert!(s1.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(s1[..13].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn build_state_normalization() {
        let topo = NetworkTopology::new(
            vec![BaseStation::with_defaults(0, Tier::Micro, Point::new(0.0, 0.0))],
            vec![Point::new(100.0, 50.0)],
            Bounds::square(100.0),
        )
        .unwrap();
        let noise_ref = 2e-12;
        let s = build_state(&[1_000.0], &[noise_ref], &[0], &[2.5e6], &topo, noise_ref).unwrap();
        assert_eq!(s, vec![1.0, 0.5, 0.25, 0.0, 0.0, 1.0, 0.5]);
        assert!(matches!(
            build_state(&[1.0, 2.0], &[0.0], &[0], &[0.0], &topo, 1.0),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn zero_action_reward() {
        let cfg = EnvConfig::for_scenario(ScenarioKind::SparseSuburban, 6, 3, 0);
        let weights = cfg.weights;
        let mut env = HetNetEnv::new(cfg).unwrap();
        env.reset(2);
        let out = env.step(&vec![0.0; env.action_len()]).unwrap();
        assert!(out.info.per_user_throughput.iter().all(|&t| t == 0.0));
        let p_min_w: f64 = env.topology().stations.iter().map(|s| s.p_min).sum::<f64>() / 1e3;
        assert!((out.reward - (-weights.beta * p_min_w + weights.phi)).abs() < 1e-12);
        assert_eq!(out.info.mean_band_fraction, 0.0);
    }

    #[test]
    fn episode_contract() {
        let mut env = HetNetEnv::new(single_cell(2)).unwrap();
        assert!(matches!(env.step(&[0.5; 4]), Err(Error::Contract(_))));
        env.reset(0);
        for t in 0..5 {
            let out = env.step(&[0.5; 4]).unwrap();
            assert_eq!(out.done, t == 4);
        }
        assert!(matches!(env.step(&[0.5; 4]), Err(Error::Contract(_))));
    }

    #[test]
    fn single_cell_power_monotone() {
        let mut env = HetNetEnv::new(single_cell(3)).unwrap();
        env.reset(4);
        let mut prev: Option<Vec<f64>> = None;
        for p in [0.0, 0.3, 0.6, 1.0] {
            let mut e = env.clone();
            let out = e.step(&[p, 1.0, 0.2, 0.5, 0.9]).unwrap();
            if let Some(prev) = &prev {
                for (a, b) in prev.iter().zip(&out.info.per_user_throughput) {
                    assert!(b >= a);
                }
            }
            prev = Some(out.info.per_user_throughput);
        }
    }

    #[test]
    fn trace_rows() {
        let mut env = HetNetEnv::new(single_cell(2)).unwrap();
        env.reset(0);
        let mut w = TraceWriter::new(Vec::new()).unwrap();
        let out = env.step(&[0.5; 4]).unwrap();
        w.record(0, 0, &out).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("episode,step,reward"));
    }

    proptest! {
        #[test]
        fn fairness_bounds_and_scale(z in proptest::collection::vec(0.0..1e3f64, 1..20), c in 1e-3..1e3f64) {
            prop_assume!(z.iter().any(|&v| v > 0.0));
            let j = jain_fairness(&z);
            let n = z.len() as f64;
            prop_assert!(j >= 1.0 / n - 1e-12 && j <= 1.0);
            let zc: Vec<f64> = z.iter().map(|v| v * c).collect();
            prop_assert!((jain_fairness(&zc) - j).abs() < 1e-12);
        }

        #[test]
        fn decode_is_idempotent_under_clamp(a in proptest::collection::vec(-2.0..3.0f64, 4)) {
            let mut env = HetNetEnv::new(single_cell(2)).unwrap();
            env.reset(9);
            let gains = env.current_gains().unwrap().clone();
            let direct = decode_action(&a, env.topology(), &gains).unwrap();
            let clamped = decode_action(&clamp_action(&a), env.topology(), &gains).unwrap();
            prop_assert_eq!(direct, clamped);
        }

        #[test]
        fn reward_with_only_throughput(t in proptest::collection::vec(0.0..1e8f64, 1..10), kappa in 0.0..5.0f64) {
            let w = RewardWeights { kappa, beta: 0.0, phi: 0.0 };
            let r = compute_reward(&t, &[1.0], &w);
            prop_assert_eq!(r, kappa * (t.iter().sum::<f64>() / 1e6));
        }
    }
}
