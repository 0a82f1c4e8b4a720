use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hetnet_core::runner::{self, ExperimentConfig, Method, Profile};
use hetnet_core::topology::{scenario_stations, ScenarioKind};

#[derive(Parser, Debug)]
#[command(name = "hetnet", version, about = "HetNet downlink resource allocation: simulate, train, evaluate, compare")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a scenario's station layout as CSV.
    GenTopology {
        #[arg(long)]
        scenario: ScenarioKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a learned method on every seed; writes checkpoints and records.
    Train(Common),
    /// Evaluate methods from checkpoints (or heuristics directly); writes per-episode metrics.
    Eval(Common),
    /// Evaluate methods across scenarios and write a comparison table (CSV and markdown).
    Compare(Common),
    /// Aggregate training records into a learning-curve CSV.
    Curve(Common),
    /// Serve one environment over line-delimited JSON on stdin/stdout.
    ServeEnv(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base profile used for keys the config file leaves out.
    #[arg(long)]
    profile: Option<Profile>,
    /// Scenario, or `all` (compare only).
    #[arg(long)]
    scenario: Option<String>,
    /// Method; compare and eval also accept a comma list or `all`.
    #[arg(long, alias = "method")]
    methods: Option<String>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    #[arg(long)]
    layout_seed: Option<u64>,
    /// Output root (default: $HETNET_OUTPUT, else ./results).
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Common {
    /// Resolved config plus the scenario and method lists named on the command line.
    fn resolve(&self) -> Result<(ExperimentConfig, Vec<ScenarioKind>, Vec<Method>)> {
        let base = self.profile.unwrap_or(Profile::Desk);
        let mut cfg = match &self.config {
            Some(path) => {
                if !path.is_file() {
                    bail!("config file not found: {}", path.display());
                }
                ExperimentConfig::load_with_base(path, base)?
            }
            None => ExperimentConfig::for_profile(base),
        };
        let scenarios = match self.scenario.as_deref() {
            None => vec![cfg.scenario],
            Some(s) if s.eq_ignore_ascii_case("all") => ScenarioKind::ALL.to_vec(),
            Some(s) => s
                .split(',')
                .map(|x| x.parse::<ScenarioKind>().map_err(anyhow::Error::msg))
                .collect::<Result<_>>()?,
        };
        let methods = match self.methods.as_deref() {
            None => vec![cfg.method],
            Some(m) => Method::parse_list(m).map_err(anyhow::Error::msg)?,
        };
        cfg.scenario = scenarios[0];
        cfg.method = methods[0];
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(v) = self.episodes {
            cfg.episodes = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.users {
            cfg.n_users = v;
        }
        if let Some(v) = self.eval_episodes {
            cfg.eval_episodes = v;
        }
        if let Some(v) = self.layout_seed {
            cfg.layout_seed = v;
        }
        if let Some(v) = &self.output {
            cfg.output_root = Some(v.clone());
        }
        cfg.validate().context("invalid configuration")?;
        log::info!("resolved config (seeds {:?}):\n{}", cfg.seeds, cfg.to_toml());
        Ok((cfg, scenarios, methods))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenTopology {
            scenario,
            seed,
            out,
        } => {
            log::info!("generating {scenario} stations, seed {seed}");
            scenario_stations(scenario, seed).write_csv(&out)?;
            println!("{}", out.display());
        }
        Command::Train(c) => {
            let (mut cfg, scenarios, methods) = c.resolve()?;
            for &sc in &scenarios {
                for &m in &methods {
                    cfg.scenario = sc;
                    cfg.method = m;
                    let recs = runner::run_training(&cfg)?;
                    let root = cfg.resolved_output_root();
                    for r in &recs {
                        println!("{}", runner::checkpoint_path(&root, sc, m, r.seed).display());
                    }
                }
            }
        }
        Command::Eval(c) => {
            let (cfg, scenarios, methods) = c.resolve()?;
            let root = cfg.resolved_output_root();
            for &sc in &scenarios {
                for &m in &methods {
                    let rows = runner::evaluate_method(&cfg, sc, m)?;
                    let path = root.join("eval").join(sc.slug()).join(format!("{}.csv", m.slug()));
                    runner::write_eval_csv(&path, &rows)?;
                    let s = runner::aggregate_seeds(&rows);
                    println!(
                        "{sc} {}: band {:.3} power {:.3} sched {:.3} reward {:.3} fairness {:.3} -> {}",
                        m.label(),
                        s.mean_band_fraction.mean,
                        s.mean_power_norm.mean,
                        s.mean_sched_score.mean,
                        s.mean_reward.mean,
                        s.mean_fairness.mean,
                        path.display()
                    );
                }
            }
        }
        Command::Compare(c) => {
            let (cfg, scenarios, methods) = c.resolve()?;
            let table = runner::compare_table(&cfg, &scenarios, &methods)?;
            let dir = cfg.resolved_output_root().join("compare");
            write(&dir.join("table.csv"), &table.to_csv())?;
            write(&dir.join("table.md"), &table.to_markdown())?;
            print!("{}", table.to_markdown());
        }
        Command::Curve(c) => {
            let (mut cfg, scenarios, methods) = c.resolve()?;
            for &sc in &scenarios {
                for &m in &methods {
                    cfg.scenario = sc;
                    cfg.method = m;
                    let records = runner::load_records(&cfg)?;
                    let path = cfg
                        .resolved_output_root()
                        .join("curves")
                        .join(sc.slug())
                        .join(format!("{}.csv", m.slug()));
                    runner::emit_learning_curve(&records, &path)?;
                    println!("{}", path.display());
                }
            }
        }
        Command::ServeEnv(c) => {
            let (cfg, _, _) = c.resolve()?;
            let stdin = io::stdin();
            hetnet_core::bridge::serve(cfg.env_config(), BufReader::new(stdin.lock()), io::stdout().lock())?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
