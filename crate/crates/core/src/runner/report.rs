use std::path::Path;

use super::config::{ExperimentConfig, Method};
use super::{evaluate_method, write_text, EvalRow};
use crate::error::{Error, Result};
use crate::record::TrainingRecord;
use crate::topology::ScenarioKind;

/// Mean over seeds with a normal-approximation 95% half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub ci95: f64,
}

/// `1.96 · sd / √n` over the values, with the sample standard deviation.
/// Values are summed in sorted order so the result does not depend on the
/// order they are given in. A single value gets a zero half-width.
pub fn aggregate(values: &[f64]) -> Estimate {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    if v.is_empty() {
        return Estimate { mean: f64::NAN, ci95: 0.0 };
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return Estimate { mean, ci95: 0.0 };
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate {
        mean,
        ci95: 1.96 * var.sqrt() / n.sqrt(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSummary {
    pub mean_band_fraction: Estimate,
    pub mean_power_norm: Estimate,
    pub mean_sched_score: Estimate,
    pub mean_reward: Estimate,
    pub mean_fairness: Estimate,
    pub n_seeds: usize,
    /// Set when only one seed contributed, so every half-width is zero.
    pub single_seed: bool,
}

/// Averages each seed's episodes, then aggregates the seed means.
pub fn aggregate_seeds(rows: &[(u64, Vec<EvalRow>)]) -> MetricSummary {
    let seed_means = |f: fn(&EvalRow) -> f64| -> Vec<f64> {
        rows.iter()
            .map(|(_, rs)| rs.iter().map(f).sum::<f64>() / rs.len().max(1) as f64)
            .collect()
    };
    let single_seed = rows.len() < 2;
    if single_seed {
        log::warn!("only one seed: confidence half-widths are reported as 0");
    }
    MetricSummary {
        mean_band_fraction: aggregate(&seed_means(|r| r.mean_band_fraction)),
        mean_power_norm: aggregate(&seed_means(|r| r.mean_power_norm)),
        mean_sched_score: aggregate(&seed_means(|r| r.mean_sched_score)),
        mean_reward: aggregate(&seed_means(|r| r.mean_reward)),
        mean_fairness: aggregate(&seed_means(|r| r.mean_fairness)),
        n_seeds: rows.len(),
        single_seed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    Band,
    Power,
    Sched,
    Reward,
    Fairness,
}

impl Column {
    pub const ALL: [Column; 5] = [Column::Band, Column::Power, Column::Sched, Column::Reward, Column::Fairness];

    pub fn key(&self) -> &'static str {
        match self {
            Column::Band => "bandwidth",
            Column::Power => "power",
            Column::Sched => "sched_score",
            Column::Reward => "reward",
            Column::Fairness => "fairness",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            Column::Band => "Bandwidth allocation",
            Column::Power => "Transmit power",
            Column::Sched => "Scheduling score",
            Column::Reward => "Reward",
            Column::Fairness => "Fairness",
        }
    }

    pub fn higher_is_better(&self) -> bool {
        !matches!(self, Column::Power)
    }

    pub fn arrow(&self) -> &'static str {
        if self.higher_is_better() {
            "↑"
        } else {
            "↓"
        }
    }

    pub fn get(&self, s: &MetricSummary) -> Estimate {
        match self {
            Column::Band => s.mean_band_fraction,
            Column::Power => s.mean_power_norm,
            Column::Sched => s.mean_sched_score,
            Column::Reward => s.mean_reward,
            Column::Fairness => s.mean_fairness,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub scenario: ScenarioKind,
    pub method: Method,
    pub summary: MetricSummary,
    /// Per column: 1 = best, 2 = second best within the scenario, 0 otherwise.
    pub ranks: [u8; 5],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<TableRow>,
}

impl ComparisonTable {
    /// Builds the table and marks best and second best per scenario and column.
    pub fn from_summaries(cells: Vec<(ScenarioKind, Method, MetricSummary)>) -> Self {
        let mut rows: Vec<TableRow> = cells
            .into_iter()
            .map(|(scenario, method, summary)| TableRow {
                scenario,
                method,
                summary,
                ranks: [0; 5],
            })
            .collect();
        let scenarios: Vec<ScenarioKind> = rows.iter().fold(Vec::new(), |mut acc, r| {
            if !acc.contains(&r.scenario) {
                acc.push(r.scenario);
            }
            acc
        });
        for sc in scenarios {
            for (ci, col) in Column::ALL.iter().enumerate() {
                let mut idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].scenario == sc).collect();
                idx.sort_by(|&a, &b| {
                    let (x, y) = (col.get(&rows[a].summary).mean, col.get(&rows[b].summary).mean);
                    if col.higher_is_better() {
                        y.total_cmp(&x)
                    } else {
                        x.total_cmp(&y)
                    }
                });
                for (rank, &i) in idx.iter().take(2).enumerate() {
                    rows[i].ranks[ci] = rank as u8 + 1;
                }
            }
        }
        ComparisonTable { rows }
    }

    pub fn row(&self, scenario: ScenarioKind, method: Method) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.scenario == scenario && r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,method,n_seeds");
        for c in Column::ALL {
            out.push_str(&format!(",{k}_mean,{k}_ci95,{k}_rank", k = c.key()));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{}", r.scenario, r.method, r.summary.n_seeds));
            for (ci, c) in Column::ALL.iter().enumerate() {
                let e = c.get(&r.summary);
                out.push_str(&format!(",{},{},{}", e.mean, e.ci95, r.ranks[ci]));
            }
            out.push('\n');
        }
        out
    }

    /// Markdown table; best values in bold, second best underlined.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Scenario | Method |");
        for c in Column::ALL {
            out.push_str(&format!(" {} {} |", c.title(), c.arrow()));
        }
        out.push_str("\n|---|---|");
        out.push_str(&"---|".repeat(Column::ALL.len()));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("| {} | {} |", r.scenario, r.method.label()));
            for (ci, c) in Column::ALL.iter().enumerate() {
                let e = c.get(&r.summary);
                let cell = format!("{:.2} ± {:.2}", e.mean, e.ci95);
                let cell = match r.ranks[ci] {
                    1 => format!("**{cell}**"),
                    2 => format!("<u>{cell}</u>"),
                    _ => cell,
                };
                out.push_str(&format!(" {cell} |"));
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluates every (scenario, method) cell over the configured seeds.
pub fn compare_table(cfg: &ExperimentConfig, scenarios: &[ScenarioKind], methods: &[Method]) -> Result<ComparisonTable> {
    let mut cells = Vec::new();
    for &sc in scenarios {
        for &m in methods {
            log::info!("evaluating {} on {sc}", m.label());
            let rows = evaluate_method(cfg, sc, m)?;
            cells.push((sc, m, aggregate_seeds(&rows)));
        }
    }
    Ok(ComparisonTable::from_summaries(cells))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveRow {
    pub episode: usize,
    pub mean: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
}

/// Per-episode reward aggregated over seeds, up to the shortest record.
pub fn curve_rows(records: &[TrainingRecord]) -> Vec<CurveRow> {
    let n = records.iter().map(|r| r.episodes.len()).min().unwrap_or(0);
    (0..n)
        .map(|ep| {
            let vals: Vec<f64> = records.iter().map(|r| r.episodes[ep].mean_reward).collect();
            let e = aggregate(&vals);
            CurveRow {
                episode: ep,
                mean: e.mean,
                ci95_lo: e.mean - e.ci95,
                ci95_hi: e.mean + e.ci95,
            }
        })
        .collect()
}

pub fn emit_learning_curve(records: &[TrainingRecord], path: impl AsRef<Path>) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Contract("learning curve needs at least one record".into()));
    }
    let mut out = String::from("episode,mean_over_seeds,ci95_lo,ci95_hi\n");
    for r in curve_rows(records) {
        out.push_str(&format!("{},{},{},{}\n", r.episode, r.mean, r.ci95_lo, r.ci95_hi));
    }
    write_text(path.as_ref(), &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::EpisodeStats;

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(&[0.5, 0.5, 0.5]), Estimate { mean: 0.5, ci95: 0.0 });
        let e = aggregate(&[0.0, 1.0]);
        assert_eq!(e.mean, 0.5);
        assert!((e.ci95 - 1.96 * 0.5f64.sqrt() / 2f64.sqrt()).abs() < 1e-15);
        assert!((e.ci95 - 0.98).abs() < 1e-3);
        assert_eq!(aggregate(&[0.3, 0.9, 0.1]), aggregate(&[0.9, 0.1, 0.3]));
        assert_eq!(aggregate(&[0.7]).ci95, 0.0);
    }

    fn row(v: f64) -> EvalRow {
        EvalRow {
            episode: 0,
            mean_band_fraction: v,
            mean_power_norm: v,
            mean_sched_score: v,
            mean_reward: v,
            mean_fairness: v,
        }
    }

    #[test]
    fn single_seed_is_flagged() {
        let s = aggregate_seeds(&[(3, vec![row(0.2), row(0.4)])]);
        assert!(s.single_seed);
        assert!((s.mean_reward.mean - 0.3).abs() < 1e-15);
        assert_eq!(s.mean_reward.ci95, 0.0);
    }

    #[test]
    fn ranks_follow_arrows() {
        let summary = |v| aggregate_seeds(&[(0, vec![row(v)]), (1, vec![row(v)])]);
        let t = ComparisonTable::from_summaries(vec![
            (ScenarioKind::Mixed, Method::Td3, summary(0.5)),
            (ScenarioKind::Mixed, Method::Ppo, summary(0.9)),
            (ScenarioKind::Mixed, Method::IpPc, summary(0.1)),
        ]);
        let ppo = t.row(ScenarioKind::Mixed, Method::Ppo).unwrap();
        let ippc = t.row(ScenarioKind::Mixed, Method::IpPc).unwrap();
        assert_eq!(ppo.ranks, [1, 0, 1, 1, 1]);
        assert_eq!(ippc.ranks, [0, 1, 0, 0, 0]);
        assert_eq!(t.to_csv().lines().count(), 4);
        assert!(t.to_markdown().contains("**0.90 ± 0.00**"));

        let one = ComparisonTable::from_summaries(vec![(ScenarioKind::Hotspot, Method::PfEq, summary(0.4))]);
        assert_eq!(one.rows.len(), 1);
    }

    #[test]
    fn curve_matches_aggregate() {
        let rec = |seed, rewards: &[f64]| TrainingRecord {
            seed,
            total_steps: 0,
            episodes: rewards
                .iter()
                .enumerate()
                .map(|(i, &r)| EpisodeStats {
                    episode: i,
                    mean_reward: r,
                    mean_fairness: 0.0,
                    mean_power_norm: 0.0,
                    mean_band_fraction: 0.0,
                    mean_sched_score: 0.0,
                })
                .collect(),
        };
        let rows = curve_rows(&[rec(0, &[1.0, 2.0, 3.0]), rec(1, &[3.0, 2.0, 1.0])]);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].mean, aggregate(&[1.0, 3.0]).mean);
        assert_eq!(rows[1].ci95_lo, rows[1].ci95_hi);
        let single = curve_rows(&[rec(0, &[1.5])]);
        assert_eq!((single[0].ci95_lo, single[0].ci95_hi), (1.5, 1.5));

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        emit_learning_curve(&[rec(0, &[1.0; 7])], &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 8);
    }
}
