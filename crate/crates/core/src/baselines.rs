//! Single-objective heuristic policies: throughput-first (G-OFDMA),
//! power-first (IP-PC) and fairness-first (PF-EQ).
//!
//! Each policy emits an ordinary normalized action, so it passes through the
//! same decoding path as the learned agents.

use ndarray::Array2;

use crate::controller::Controller;
use crate::env::{associate, HetNetEnv, Layout, StepOutcome};
use crate::topology::NetworkTopology;

pub const G_OFDMA_POWER: f64 = 0.98;
pub const IP_PC_POWER_FLOOR: f64 = 0.01;
pub const IP_PC_POWER_CAP: f64 = 0.3;
pub const IP_PC_BAND: f64 = 0.25;
pub const PF_EQ_POWER: f64 = 0.3;
pub const PF_RATE_FLOOR: f64 = 1e-6;
pub const PF_DEFAULT_EWMA: f64 = 0.99;

fn decoded_powers(topology: &NetworkTopology, adj: &[f64]) -> Vec<f64> {
    topology
        .stations
        .iter()
        .zip(adj)
        .map(|(s, &a)| s.p_min + a * s.power_span())
        .collect()
}

/// Every station runs near its budget, uses its whole carrier and gives it
/// to its best-link attached user.
pub fn g_ofdma_policy(gains: &Array2<f64>, topology: &NetworkTopology) -> Vec<f64> {
    let layout = Layout::new(topology.n_stations(), gains.ncols());
    let adj = vec![G_OFDMA_POWER; layout.n_stations];
    let serving = associate(&decoded_powers(topology, &adj), gains, topology);
    let mut best: Vec<Option<usize>> = vec![None; layout.n_stations];
    for (u, &b) in serving.iter().enumerate() {
        match best[b] {
            Some(v) if gains[[b, v]] >= gains[[b, u]] => {}
            _ => best[b] = Some(u),
        }
    }
    let mut scores = vec![0.0; layout.n_users];
    for u in best.into_iter().flatten() {
        scores[u] = 1.0;
    }
    layout.pack_action(&adj, &vec![1.0; layout.n_stations], &scores)
}

/// Leakage price per station: total gain towards users it does not serve,
/// under gain-only (strongest-BS) association.
pub fn interference_prices(gains: &Array2<f64>, topology: &NetworkTopology) -> Vec<f64> {
    let serving = associate(&vec![1.0; topology.n_stations()], gains, topology);
    (0..topology.n_stations())
        .map(|b| {
            serving
                .iter()
                .enumerate()
                .filter(|&(_, &sb)| sb != b)
                .map(|(u, _)| gains[[b, u]])
                .sum()
        })
        .collect()
}

/// Stations leaking more than average back off towards the power floor.
pub fn ip_pc_policy(gains: &Array2<f64>, topology: &NetworkTopology) -> Vec<f64> {
    let layout = Layout::new(topology.n_stations(), gains.ncols());
    let prices = interference_prices(gains, topology);
    let mean_price = prices.iter().sum::<f64>() / prices.len() as f64;
    let adj: Vec<f64> = prices
        .iter()
        .map(|&p| {
            let level = if mean_price > 0.0 { (-p / mean_price).exp() } else { 1.0 };
            level.clamp(IP_PC_POWER_FLOOR, IP_PC_POWER_CAP)
        })
        .collect();
    let scores = vec![1.0 / layout.n_users as f64; layout.n_users];
    layout.pack_action(&adj, &vec![IP_PC_BAND; layout.n_stations], &scores)
}

/// Proportional-fair memory: EWMA of served rate per user, Mbit/s.
#[derive(Clone, Debug, PartialEq)]
pub struct PfState {
    pub avg_rate: Vec<f64>,
    pub ewma_factor: f64,
}

impl PfState {
    pub fn new(n_users: usize, ewma_factor: f64) -> Self {
        assert!(ewma_factor > 0.0 && ewma_factor < 1.0);
        PfState {
            avg_rate: vec![PF_RATE_FLOOR; n_users],
            ewma_factor,
        }
    }

    pub fn updated(&self, last_throughputs_mbps: &[f64]) -> PfState {
        let a = self.ewma_factor;
        PfState {
            avg_rate: self
                .avg_rate
                .iter()
                .zip(last_throughputs_mbps)
                .map(|(&avg, &t)| (a * avg + (1.0 - a) * t).max(PF_RATE_FLOOR))
                .collect(),
            ewma_factor: a,
        }
    }
}

/// Moderate power, full carrier split near-evenly, with PF priority tilting
/// the split toward users whose recent service has been poor.
pub fn pf_eq_policy(
    gains: &Array2<f64>,
    last_throughputs_mbps: &[f64],
    pf: &PfState,
    topology: &NetworkTopology,
    noise_ref_mw: f64,
) -> (Vec<f64>, PfState) {
    let layout = Layout::new(topology.n_stations(), gains.ncols());
    let next = pf.updated(last_throughputs_mbps);
    let adj = vec![PF_EQ_POWER; layout.n_stations];
    let powers = decoded_powers(topology, &adj);
    let serving = associate(&powers, gains, topology);

    let priority: Vec<f64> = serving
        .iter()
        .enumerate()
        .map(|(u, &b)| {
            let proxy = (1.0 + powers[b] * gains[[b, u]] / noise_ref_mw).log2();
            proxy / next.avg_rate[u].max(PF_RATE_FLOOR)
        })
        .collect();
    let mut cell_total = vec![0.0; layout.n_stations];
    let mut cell_size = vec![0usize; layout.n_stations];
    for (u, &b) in serving.iter().enumerate() {
        cell_total[b] += priority[u];
        cell_size[b] += 1;
    }
    let scores: Vec<f64> = serving
        .iter()
        .enumerate()
        .map(|(u, &b)| {
            let uniform = 1.0 / cell_size[b] as f64;
            let pf_share = if cell_total[b] > 0.0 { priority[u] / cell_total[b] } else { uniform };
            0.5 * pf_share + 0.5 * uniform
        })
        .collect();
    (layout.pack_action(&adj, &vec![1.0; layout.n_stations], &scores), next)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeuristicKind {
    GOfdma,
    IpPc,
    PfEq,
}

impl HeuristicKind {
    pub fn label(&self) -> &'static str {
        match self {
            HeuristicKind::GOfdma => "G-OFDMA",
            HeuristicKind::IpPc => "IP-PC",
            HeuristicKind::PfEq => "PF-EQ",
        }
    }
}

/// A heuristic wired to the environment's observables.
#[derive(Clone, Debug)]
pub struct HeuristicController {
    kind: HeuristicKind,
    pf: Option<PfState>,
    last_mbps: Vec<f64>,
}

impl HeuristicController {
    pub fn new(kind: HeuristicKind) -> Self {
        HeuristicController {
            kind,
            pf: None,
            last_mbps: Vec::new(),
        }
    }
}

impl Controller for HeuristicController {
    fn name(&self) -> String {
        self.kind.label().into()
    }

    fn begin_episode(&mut self, env: &HetNetEnv) {
        let n = env.config().n_users;
        self.pf = Some(PfState::new(n, PF_DEFAULT_EWMA));
        self.last_mbps = vec![0.0; n];
    }

    fn act(&mut self, env: &HetNetEnv, _state: &[f64]) -> Vec<f64> {
        let gains = env.current_gains().expect("act called after reset");
        let topo = env.topology();
        match self.kind {
            HeuristicKind::GOfdma => g_ofdma_policy(gains, topo),
            HeuristicKind::IpPc => ip_pc_policy(gains, topo),
            HeuristicKind::PfEq => {
                let pf = self
                    .pf
                    .get_or_insert_with(|| PfState::new(topo.n_users(), PF_DEFAULT_EWMA));
                let (action, next) = pf_eq_policy(gains, &self.last_mbps, pf, topo, env.noise_ref_mw());
                *pf = next;
                action
            }
        }
    }

    fn observe(&mut self, outcome: &StepOutcome) {
        self.last_mbps = outcome.info.per_user_throughput.iter().map(|t| t / 1e6).collect();
    }
}
