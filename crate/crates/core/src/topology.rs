//! Network layouts: base-station tiers and positions, user placement, and the
//! CSV interchange format for station lists.
//!
//! Topology CSV:
//!
//! ```text
//! #bounds,xmin,ymin,xmax,ymax
//! #tier,Macro,p_min_mW,p_max_mW,band_Hz      (optional, per tier)
//! id,tier,x_m,y_m
//! ```

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tier {
    Macro,
    Micro,
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "Macro" | "macro" => Ok(Tier::Macro),
            "Micro" | "micro" => Ok(Tier::Micro),
            other => Err(format!("unknown tier `{other}` (expected Macro or Micro)")),
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Macro => "Macro",
            Tier::Micro => "Micro",
        })
    }
}

/// Power limits (mW) and carrier width (Hz) applied to every station of a tier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TierLimits {
    pub p_min: f64,
    pub p_max: f64,
    pub band_total: f64,
}

impl TierLimits {
    pub const MACRO: TierLimits = TierLimits {
        p_min: 1_000.0,
        p_max: 40_000.0,
        band_total: 20e6,
    };
    pub const MICRO: TierLimits = TierLimits {
        p_min: 100.0,
        p_max: 1_000.0,
        band_total: 10e6,
    };

    pub fn default_for(tier: Tier) -> Self {
        match tier {
            Tier::Macro => Self::MACRO,
            Tier::Micro => Self::MICRO,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned deployment area in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Bounds {
    pub const fn square(side: f64) -> Self {
        Bounds {
            xmin: 0.0,
            ymin: 0.0,
            xmax: side,
            ymax: side,
        }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn clip(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.xmin, self.xmax), p.y.clamp(self.ymin, self.ymax))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(
            rng.gen_range(self.xmin..=self.xmax),
            rng.gen_range(self.ymin..=self.ymax),
        )
    }

    /// Maps a position to the unit square.
    pub fn normalize(&self, p: &Point) -> (f64, f64) {
        (
            (p.x - self.xmin) / self.width(),
            (p.y - self.ymin) / self.height(),
        )
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds::square(2_000.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: u32,
    pub tier: Tier,
    pub position: Point,
    pub p_min: f64,
    pub p_max: f64,
    pub band_total: f64,
}

impl BaseStation {
    pub fn with_defaults(id: u32, tier: Tier, position: Point) -> Self {
        Self::with_limits(id, tier, position, TierLimits::default_for(tier))
    }

    pub fn with_limits(id: u32, tier: Tier, position: Point, limits: TierLimits) -> Self {
        BaseStation {
            id,
            tier,
            position,
            p_min: limits.p_min,
            p_max: limits.p_max,
            band_total: limits.band_total,
        }
    }

    pub fn power_span(&self) -> f64 {
        self.p_max - self.p_min
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub stations: Vec<BaseStation>,
    pub users: Vec<Point>,
    pub bounds: Bounds,
}

impl NetworkTopology {
    /// Builds and validates a topology.
    pub fn new(stations: Vec<BaseStation>, users: Vec<Point>, bounds: Bounds) -> Result<Self> {
        let topo = NetworkTopology {
            stations,
            users,
            bounds,
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn count_tier(&self, tier: Tier) -> usize {
        self.stations.iter().filter(|s| s.tier == tier).count()
    }

    /// Checks every structural invariant. User count may be zero here;
    /// environments require at least one user.
    pub fn validate(&self) -> Result<()> {
        let b = &self.bounds;
        if !(b.xmax > b.xmin && b.ymax > b.ymin) || ![b.xmin, b.ymin, b.xmax, b.ymax].iter().all(|v| v.is_finite()) {
            return Err(Error::Topology(format!("degenerate bounds {b:?}")));
        }
        if self.stations.is_empty() {
            return Err(Error::Topology("at least one base station is required".into()));
        }
        let mut ids = HashSet::new();
        let mut positions = HashSet::new();
        for s in &self.stations {
            if !ids.insert(s.id) {
                return Err(Error::Topology(format!("duplicate station id {}", s.id)));
            }
            if !b.contains(&s.position) {
                return Err(Error::Topology(format!(
                    "station {} at ({}, {}) lies outside bounds",
                    s.id, s.position.x, s.position.y
                )));
            }
            if !positions.insert((s.position.x.to_bits(), s.position.y.to_bits())) {
                return Err(Error::Topology(format!("station {} shares its position with another station", s.id)));
            }
            if !(s.p_min > 0.0 && s.p_max > s.p_min && s.p_max.is_finite()) {
                return Err(Error::Topology(format!(
                    "station {}: power limits must satisfy 0 < p_min < p_max (got {}, {})",
                    s.id, s.p_min, s.p_max
                )));
            }
            if !(s.band_total > 0.0 && s.band_total.is_finite()) {
                return Err(Error::Topology(format!("station {}: band_total must be positive", s.id)));
            }
        }
        let min_macro = self
            .stations
            .iter()
            .filter(|s| s.tier == Tier::Macro)
            .map(|s| s.p_max)
            .fold(f64::INFINITY, f64::min);
        let max_micro = self
            .stations
            .iter()
            .filter(|s| s.tier == Tier::Micro)
            .map(|s| s.p_max)
            .fold(f64::NEG_INFINITY, f64::max);
        if min_macro < max_micro {
            return Err(Error::Topology(format!(
                "macro p_max ({min_macro}) below micro p_max ({max_micro})"
            )));
        }
        if let Some(u) = self.users.iter().position(|p| !b.contains(p)) {
            return Err(Error::Topology(format!("user {u} lies outside bounds")));
        }
        Ok(())
    }

    /// Copy with `n_users` positions drawn uniformly in bounds.
    pub fn place_users(&self, n_users: usize, seed: u64) -> NetworkTopology {
        let mut rng = rng::stream(seed, "place-users");
        let users = (0..n_users).map(|_| self.bounds.sample(&mut rng)).collect();
        NetworkTopology {
            users,
            ..self.clone()
        }
    }

    /// Station ordering by id, used for tie-breaking.
    pub fn station_index_by_id(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.stations.len()).collect();
        idx.sort_by_key(|&i| self.stations[i].id);
        idx
    }

    pub fn to_csv(&self) -> String {
        let b = &self.bounds;
        let mut out = format!("#bounds,{},{},{},{}\n", b.xmin, b.ymin, b.xmax, b.ymax);
        for tier in [Tier::Macro, Tier::Micro] {
            if let Some(s) = self.stations.iter().find(|s| s.tier == tier) {
                out.push_str(&format!("#tier,{tier},{},{},{}\n", s.p_min, s.p_max, s.band_total));
            }
        }
        for s in &self.stations {
            out.push_str(&format!("{},{},{},{}\n", s.id, s.tier, s.position.x, s.position.y));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Reads a station list. The returned topology has no users.
pub fn load_topology(path: impl AsRef<Path>) -> Result<NetworkTopology> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_topology(&text, path)
}

pub fn parse_topology(text: &str, origin: &Path) -> Result<NetworkTopology> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let num = |line: usize, field: &str, what: &str| -> Result<f64> {
        field
            .trim()
            .parse::<f64>()
            .map_err(|_| parse_err(line, format!("{what}: `{}` is not a number", field.trim())))
    };

    let mut bounds = None;
    let mut macro_limits = TierLimits::MACRO;
    let mut micro_limits = TierLimits::MICRO;
    let mut rows: Vec<(usize, u32, Tier, Point)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if let Some(tag) = fields[0].strip_prefix('#') {
            match tag.trim() {
                "bounds" => {
                    if fields.len() != 5 {
                        return Err(parse_err(line_no, "bounds line needs 4 values".into()));
                    }
                    bounds = Some(Bounds {
                        xmin: num(line_no, fields[1], "xmin")?,
                        ymin: num(line_no, fields[2], "ymin")?,
                        xmax: num(line_no, fields[3], "xmax")?,
                        ymax: num(line_no, fields[4], "ymax")?,
                    });
                }
                "tier" => {
                    if fields.len() != 5 {
                        return Err(parse_err(line_no, "tier line needs tier,p_min,p_max,band".into()));
                    }
                    let tier: Tier = fields[1].parse().map_err(|m| parse_err(line_no, m))?;
                    let limits = TierLimits {
                        p_min: num(line_no, fields[2], "p_min")?,
                        p_max: num(line_no, fields[3], "p_max")?,
                        band_total: num(line_no, fields[4], "band")?,
                    };
                    match tier {
                        Tier::Macro => macro_limits = limits,
                        Tier::Micro => micro_limits = limits,
                    }
                }
                // any other `#` line is a comment
                _ => {}
            }
            continue;
        }
        if fields.len() != 4 {
            return Err(parse_err(line_no, format!("expected id,tier,x,y but found {} fields", fields.len())));
        }
        let id = fields[0]
            .trim()
            .parse::<u32>()
            .map_err(|_| parse_err(line_no, format!("bad station id `{}`", fields[0].trim())))?;
        let tier: Tier = fields[1].parse().map_err(|m| parse_err(line_no, m))?;
        let p = Point::new(num(line_no, fields[2], "x")?, num(line_no, fields[3], "y")?);
        rows.push((line_no, id, tier, p));
    }

    let bounds = bounds.ok_or_else(|| parse_err(1, "missing `#bounds` header".into()))?;
    let stations = rows
        .into_iter()
        .map(|(_, id, tier, p)| {
            let limits = match tier {
                Tier::Macro => macro_limits,
                Tier::Micro => micro_limits,
            };
            BaseStation::with_limits(id, tier, p, limits)
        })
        .collect();
    NetworkTopology::new(stations, Vec::new(), bounds)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    DenseUrban,
    SparseSuburban,
    Hotspot,
    Mixed,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::DenseUrban,
        ScenarioKind::SparseSuburban,
        ScenarioKind::Hotspot,
        ScenarioKind::Mixed,
    ];

    pub fn slug(&self) -> &'static str {
        match self {
            ScenarioKind::DenseUrban => "dense-urban",
            ScenarioKind::SparseSuburban => "sparse-suburban",
            ScenarioKind::Hotspot => "hotspot",
            ScenarioKind::Mixed => "mixed",
        }
    }

    /// How users are drawn for this scenario, both at generation time and on
    /// every environment reset.
    pub fn user_layout(&self) -> UserLayout {
        match self {
            ScenarioKind::Hotspot => UserLayout::Hotspot {
                clustered_fraction: HOTSPOT_FRACTION,
                sigma: HOTSPOT_SIGMA,
            },
            _ => UserLayout::Uniform,
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match norm.as_str() {
            "denseurban" | "dense" => Ok(ScenarioKind::DenseUrban),
            "sparsesuburban" | "sparse" => Ok(ScenarioKind::SparseSuburban),
            "hotspot" => Ok(ScenarioKind::Hotspot),
            "mixed" => Ok(ScenarioKind::Mixed),
            _ => Err(format!(
                "unknown scenario `{s}` (expected dense-urban, sparse-suburban, hotspot or mixed)"
            )),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

pub const HOTSPOT_FRACTION: f64 = 0.9;
pub const HOTSPOT_SIGMA: f64 = 50.0;

const MACRO_TRIANGLE_SIDE: f64 = 800.0;

/// User placement law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum UserLayout {
    Uniform,
    /// `clustered_fraction` of the users are drawn from isotropic Gaussians
    /// (std. dev. `sigma`) centred on micro stations, the rest uniformly.
    Hotspot { clustered_fraction: f64, sigma: f64 },
}

impl UserLayout {
    pub fn sample<R: Rng + ?Sized>(&self, topology: &NetworkTopology, n_users: usize, rng: &mut R) -> Vec<Point> {
        let bounds = topology.bounds;
        match *self {
            UserLayout::Uniform => (0..n_users).map(|_| bounds.sample(rng)).collect(),
            UserLayout::Hotspot {
                clustered_fraction,
                sigma,
            } => {
                let centres: Vec<Point> = topology
                    .stations
                    .iter()
                    .filter(|s| s.tier == Tier::Micro)
                    .map(|s| s.position)
                    .collect();
                if centres.is_empty() {
                    return (0..n_users).map(|_| bounds.sample(rng)).collect();
                }
                let n_clustered = ((clustered_fraction * n_users as f64).ceil() as usize).min(n_users);
                let offset = Normal::new(0.0, sigma).expect("sigma is finite and nonnegative");
                let mut users = Vec::with_capacity(n_users);
                for _ in 0..n_clustered {
                    let c = centres[rng.gen_range(0..centres.len())];
                    let p = Point::new(c.x + offset.sample(rng), c.y + offset.sample(rng));
                    users.push(bounds.clip(p));
                }
                for _ in n_clustered..n_users {
                    users.push(bounds.sample(rng));
                }
                users
            }
        }
    }
}

/// Vertices of an equilateral triangle centred in `bounds`.
pub fn macro_triangle(bounds: &Bounds, side: f64) -> [Point; 3] {
    let c = bounds.center();
    let r = side / 3f64.sqrt();
    let mut out = [c; 3];
    for (k, p) in out.iter_mut().enumerate() {
        let theta = std::f64::consts::FRAC_PI_2 + k as f64 * 2.0 * std::f64::consts::PI / 3.0;
        *p = Point::new(c.x + r * theta.cos(), c.y + r * theta.sin());
    }
    out
}

/// Fixed micro layout: five stations on an inner ring and five on an outer
/// ring, rotated against each other.
fn micro_rings(bounds: &Bounds) -> Vec<Point> {
    let c = bounds.center();
    let scale = bounds.width().min(bounds.height()) / 2_000.0;
    let mut out = Vec::with_capacity(10);
    for (radius, phase) in [(350.0, 0.0), (750.0, std::f64::consts::PI / 5.0)] {
        for k in 0..5 {
            let theta = phase + k as f64 * 2.0 * std::f64::consts::PI / 5.0;
            out.push(bounds.clip(Point::new(
                c.x + scale * radius * theta.cos(),
                c.y + scale * radius * theta.sin(),
            )));
        }
    }
    out
}

/// Station layout for a scenario without users. Only `Mixed` depends on the seed.
pub fn scenario_stations(kind: ScenarioKind, seed: u64) -> NetworkTopology {
    let bounds = Bounds::default();
    let macros = macro_triangle(&bounds, MACRO_TRIANGLE_SIDE);
    let mut stations: Vec<BaseStation> = macros
        .iter()
        .enumerate()
        .map(|(i, p)| BaseStation::with_defaults(i as u32, Tier::Macro, *p))
        .collect();
    let micros: Vec<Point> = match kind {
        ScenarioKind::SparseSuburban => Vec::new(),
        ScenarioKind::DenseUrban | ScenarioKind::Hotspot => micro_rings(&bounds),
        ScenarioKind::Mixed => {
            let mut rng = rng::stream(seed, "mixed-micro");
            (0..10).map(|_| bounds.sample(&mut rng)).collect()
        }
    };
    stations.extend(
        micros
            .into_iter()
            .enumerate()
            .map(|(i, p)| BaseStation::with_defaults(3 + i as u32, Tier::Micro, p)),
    );
    NetworkTopology {
        stations,
        users: Vec::new(),
        bounds,
    }
}

/// Full scenario layout, deterministic in `(kind, n_users, seed)`.
pub fn generate_scenario(kind: ScenarioKind, n_users: usize, seed: u64) -> NetworkTopology {
    assert!(n_users >= 1, "a scenario needs at least one user");
    let mut topo = scenario_stations(kind, seed);
    let mut rng = rng::stream(seed, "scenario-users");
    topo.users = kind.user_layout().sample(&topo, n_users, &mut rng);
    debug_assert!(topo.validate().is_ok());
    topo
}
