//! Plain-text parameter files.
//!
//! ```text
//! hetnet-params v1
//! policy td3|ppo
//! mlp <n_layers>
//! layer <n_out> <n_in> <activation>
//! <weights, row-major, space separated>
//! <biases>
//! ...
//! log_std <values>        (ppo only)
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a
//! write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::gaussian::GaussianPolicy;
use super::mlp::{Activation, Dense, Mlp};
use crate::error::{Error, Result};

const MAGIC: &str = "hetnet-params v1";

/// A saved greedy policy.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyCheckpoint {
    /// Deterministic actor with `tanh` output mapped to `[0, 1]`.
    Td3(Mlp),
    Ppo(GaussianPolicy),
}

fn join(values: impl Iterator<Item = f64>) -> String {
    let mut s = String::new();
    for (i, v) in values.enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v:e}").unwrap();
    }
    s
}

pub fn mlp_to_string(net: &Mlp) -> String {
    let mut out = format!("mlp {}\n", net.layers.len());
    for (layer, act) in net.layers.iter().zip(&net.activations) {
        writeln!(out, "layer {} {} {}", layer.n_out(), layer.n_in(), act.name()).unwrap();
        writeln!(out, "{}", join(layer.weight.iter().copied())).unwrap();
        writeln!(out, "{}", join(layer.bias.iter().copied())).unwrap();
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))
    }
}

fn parse_values(line_no: usize, line: &str, expected: usize) -> Result<Vec<f64>> {
    let vals = line
        .split_ascii_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Checkpoint(format!("line {line_no}: {e}")))?;
    if vals.len() != expected {
        return Err(Error::Checkpoint(format!(
            "line {line_no}: expected {expected} values, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn parse_mlp(lines: &mut Lines<'_>) -> Result<Mlp> {
    let (n, header) = lines.next()?;
    let n_layers: usize = header
        .strip_prefix("mlp ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Checkpoint(format!("line {n}: expected `mlp <layers>`")))?;
    let mut layers = Vec::with_capacity(n_layers);
    let mut activations = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let (n, head) = lines.next()?;
        let parts: Vec<&str> = head.split_ascii_whitespace().collect();
        if parts.len() != 4 || parts[0] != "layer" {
            return Err(Error::Checkpoint(format!("line {n}: expected `layer <out> <in> <activation>`")));
        }
        let n_out: usize = parts[1].parse().map_err(|_| Error::Checkpoint(format!("line {n}: bad size")))?;
        let n_in: usize = parts[2].parse().map_err(|_| Error::Checkpoint(format!("line {n}: bad size")))?;
        let act = Activation::from_name(parts[3])
            .ok_or_else(|| Error::Checkpoint(format!("line {n}: unknown activation {}", parts[3])))?;
        if let Some(prev) = layers.last().map(|l: &Dense| l.n_out()) {
            if prev != n_in {
                return Err(Error::Checkpoint(format!("line {n}: layer input {n_in} does not chain from {prev}")));
            }
        }
        let (wn, wl) = lines.next()?;
        let w = parse_values(wn, wl, n_out * n_in)?;
        let (bn, bl) = lines.next()?;
        let b = parse_values(bn, bl, n_out)?;
        layers.push(Dense {
            weight: Array2::from_shape_vec((n_out, n_in), w).expect("length checked"),
            bias: Array1::from_vec(b),
        });
        activations.push(act);
    }
    if layers.is_empty() {
        return Err(Error::Checkpoint("network without layers".into()));
    }
    Ok(Mlp { layers, activations })
}

impl PolicyCheckpoint {
    pub fn kind(&self) -> &'static str {
        match self {
            PolicyCheckpoint::Td3(_) => "td3",
            PolicyCheckpoint::Ppo(_) => "ppo",
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC}\npolicy {}\n", self.kind());
        match self {
            PolicyCheckpoint::Td3(actor) => out.push_str(&mlp_to_string(actor)),
            PolicyCheckpoint::Ppo(policy) => {
                out.push_str(&mlp_to_string(&policy.mean_net));
                writeln!(out, "log_std {}", join(policy.log_std.iter().copied())).unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines {
            inner: text.lines().enumerate(),
        };
        let (_, magic) = lines.next()?;
        if magic.trim() != MAGIC {
            return Err(Error::Checkpoint(format!("bad header `{magic}`")));
        }
        let (n, kind) = lines.next()?;
        match kind.trim() {
            "policy td3" => Ok(PolicyCheckpoint::Td3(parse_mlp(&mut lines)?)),
            "policy ppo" => {
                let mean_net = parse_mlp(&mut lines)?;
                let (ln, l) = lines.next()?;
                let rest = l
                    .strip_prefix("log_std")
                    .ok_or_else(|| Error::Checkpoint(format!("line {ln}: expected log_std")))?;
                let log_std = parse_values(ln, rest, mean_net.n_out())?;
                Ok(PolicyCheckpoint::Ppo(GaussianPolicy { mean_net, log_std }))
            }
            other => Err(Error::Checkpoint(format!("line {n}: unknown policy kind `{other}`"))),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Deterministic action in `[0, 1]`.
    pub fn greedy_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        match self {
            PolicyCheckpoint::Td3(actor) => Ok(actor.predict(state)?.into_iter().map(|y| 0.5 * (y + 1.0)).collect()),
            PolicyCheckpoint::Ppo(policy) => policy.mean(state),
        }
    }
}
