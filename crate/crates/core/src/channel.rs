//! Downlink link model: log-normal shadowing, Rayleigh power fading,
//! distance path loss, SINR and Shannon rate.
//!
//! All powers are linear mW, distances meters, bandwidths Hz.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::topology::NetworkTopology;

/// Links shorter than this are evaluated at this distance.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Thermal noise density at room temperature.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Path-loss exponent.
    pub eta: f64,
    /// Standard deviation of the dB-domain shadowing Gaussian.
    pub sigma_sh_db: f64,
    pub noise_density_dbm_per_hz: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            eta: 3.5,
            sigma_sh_db: 8.0,
            noise_density_dbm_per_hz: THERMAL_NOISE_DBM_PER_HZ,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(crate::Error::config("channel.eta", "must be positive"));
        }
        if !(self.sigma_sh_db >= 0.0 && self.sigma_sh_db.is_finite()) {
            return Err(crate::Error::config("channel.sigma_sh_db", "must be nonnegative"));
        }
        if !self.noise_density_dbm_per_hz.is_finite() {
            return Err(crate::Error::config("channel.noise_density_dbm_per_hz", "must be finite"));
        }
        Ok(())
    }

    /// Noise power (mW) over `band_hz`, floored at 1 Hz.
    pub fn noise_mw(&self, band_hz: f64) -> f64 {
        dbm_to_mw(self.noise_density_dbm_per_hz + 10.0 * band_hz.max(1.0).log10())
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Converts a dB-domain shadowing draw into the linear attenuation factor.
pub fn shadowing_from_db(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

/// Draws a log-normal shadowing factor with a zero-mean dB Gaussian.
pub fn draw_shadowing<R: Rng + ?Sized>(rng: &mut R, sigma_sh_db: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    shadowing_from_db(sigma_sh_db * z)
}

/// Unit-mean exponential power fading.
pub fn draw_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let s: f64 = Exp1.sample(rng);
    // Exp1 can return exactly 0; keep gains strictly positive.
    s.max(f64::MIN_POSITIVE)
}

/// Effective power gain `fading / (d^eta * shadowing)`; `d` is floored at [`MIN_DISTANCE_M`].
pub fn effective_gain(fading: f64, distance: f64, eta: f64, shadowing: f64) -> f64 {
    fading / (distance.max(MIN_DISTANCE_M).powf(eta) * shadowing)
}

/// Received signal over aggregate interference plus noise.
pub fn compute_sinr(
    serving_power: f64,
    serving_gain: f64,
    interferer_powers: &[f64],
    interferer_gains: &[f64],
    noise_mw: f64,
) -> f64 {
    debug_assert_eq!(interferer_powers.len(), interferer_gains.len());
    debug_assert!(noise_mw > 0.0);
    let interference: f64 = interferer_powers
        .iter()
        .zip(interferer_gains)
        .map(|(p, g)| p * g)
        .sum();
    serving_power * serving_gain / (interference + noise_mw)
}

/// Shannon rate in bit/s.
pub fn throughput(band_hz: f64, sinr: f64) -> f64 {
    if band_hz <= 0.0 {
        return 0.0;
    }
    band_hz * (1.0 + sinr).log2()
}

/// One timestep's link state for every (station, user) pair. Rows are
/// stations, columns users.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub gains: Array2<f64>,
    pub distances: Array2<f64>,
    pub shadowing: Array2<f64>,
    pub fading: Array2<f64>,
}

impl ChannelRealization {
    /// Assembles gains from the components. `distances` are stored unclamped.
    pub fn assemble(distances: Array2<f64>, shadowing: Array2<f64>, fading: Array2<f64>, eta: f64) -> Self {
        let mut gains = Array2::zeros(distances.raw_dim());
        ndarray::Zip::from(&mut gains)
            .and(&distances)
            .and(&shadowing)
            .and(&fading)
            .for_each(|h, &d, &psi, &s| *h = effective_gain(s, d, eta, psi));
        ChannelRealization {
            gains,
            distances,
            shadowing,
            fading,
        }
    }

    /// Same links with fresh fading.
    pub fn refade<R: Rng + ?Sized>(&self, eta: f64, step_rng: &mut R) -> Self {
        let fading = Array2::from_shape_simple_fn(self.distances.raw_dim(), || draw_fading(step_rng));
        Self::assemble(self.distances.clone(), self.shadowing.clone(), fading, eta)
    }
}

pub fn distance_matrix(topology: &NetworkTopology) -> Array2<f64> {
    Array2::from_shape_fn((topology.n_stations(), topology.n_users()), |(b, u)| {
        topology.stations[b].position.distance(&topology.users[u])
    })
}

pub fn draw_shadowing_matrix<R: Rng + ?Sized>(n_stations: usize, n_users: usize, sigma_sh_db: f64, rng: &mut R) -> Array2<f64> {
    // row-major draw order keeps realizations reproducible
    Array2::from_shape_simple_fn((n_stations, n_users), || draw_shadowing(rng, sigma_sh_db))
}

/// Composes distances, per-episode shadowing and per-step fading over all links.
pub fn sample_channel_state<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    topology: &NetworkTopology,
    params: &ChannelParams,
    episode_rng: &mut R1,
    step_rng: &mut R2,
) -> ChannelRealization {
    let distances = distance_matrix(topology);
    let (nb, nu) = distances.dim();
    let shadowing = draw_shadowing_matrix(nb, nu, params.sigma_sh_db, episode_rng);
    let fading = Array2::from_shape_simple_fn((nb, nu), || draw_fading(step_rng));
    ChannelRealization::assemble(distances, shadowing, fading, params.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::topology::{BaseStation, Bounds, Point, Tier};
    use proptest::prelude::*;

    #[test]
    fn zero_sigma_shadowing_is_unity() {
        let mut rng = stream(1, "t");
        for _ in 0..100 {
            assert_eq!(draw_shadowing(&mut rng, 0.0), 1.0);
        }
        assert_eq!(shadowing_from_db(10.0), 10.0);
    }

    #[test]
    fn shadowing_db_is_zero_mean() {
        let mut rng = stream(2, "t");
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| 10.0 * draw_shadowing(&mut rng, 8.0).log10()).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn gain_examples() {
        assert_eq!(effective_gain(1.0, 1.0, 3.5, 1.0), 1.0);
        assert!((effective_gain(1.0, 10.0, 2.0, 1.0) - 0.01).abs() < 1e-15);
        let g1 = effective_gain(0.7, 120.0, 3.5, 1.0);
        let g10 = effective_gain(0.7, 120.0, 3.5, 10.0);
        assert!((g1 / g10 - 10.0).abs() < 1e-12);
        // floor
        assert_eq!(effective_gain(1.0, 0.0, 3.5, 1.0), 1.0);
    }

    #[test]
    fn sinr_examples() {
        let noise = 1e-9;
        assert!((compute_sinr(2.0, noise, &[], &[], noise) - 2.0).abs() < 1e-12);
        assert_eq!(compute_sinr(0.0, 5.0, &[1.0], &[1.0], noise), 0.0);
        let prod = 3.0 * 0.25;
        let s = compute_sinr(3.0, 0.25, &[1.5], &[0.5], 1e-12 * prod);
        assert!((s - 1.0).abs() < 1e-6);
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(throughput(1.0, 1.0), 1.0);
        assert_eq!(throughput(1.0, 3.0), 2.0);
        assert_eq!(throughput(0.0, 1e9), 0.0);
    }

    #[test]
    fn noise_over_band() {
        let p = ChannelParams::default();
        // -174 dBm/Hz + 60 dB = -114 dBm
        assert!((p.noise_mw(1e6) / 10f64.powf(-11.4) - 1.0).abs() < 1e-12);
        assert_eq!(p.noise_mw(0.0), p.noise_mw(1.0));
    }

    fn toy_topology() -> NetworkTopology {
        NetworkTopology::new(
            vec![
                BaseStation::with_defaults(0, Tier::Macro, Point::new(0.0, 0.0)),
                BaseStation::with_defaults(1, Tier::Micro, Point::new(50.0, 80.0)),
            ],
            vec![Point::new(3.0, 4.0), Point::new(90.0, 10.0), Point::new(0.0, 0.0)],
            Bounds::square(100.0),
        )
        .unwrap()
    }

    #[test]
    fn channel_state_is_reproducible_and_consistent() {
        let topo = toy_topology();
        let params = ChannelParams::default();
        let a = sample_channel_state(&topo, &params, &mut stream(5, "ep"), &mut stream(5, "st"));
        let b = sample_channel_state(&topo, &params, &mut stream(5, "ep"), &mut stream(5, "st"));
        assert_eq!(a, b);
        assert_eq!(a.distances[[0, 0]], 5.0);
        for ((b, u), &h) in a.gains.indexed_iter() {
            let expect = a.fading[[b, u]] / (a.distances[[b, u]].max(MIN_DISTANCE_M).powf(params.eta) * a.shadowing[[b, u]]);
            assert_eq!(h, expect);
            assert!(h.is_finite() && h > 0.0);
        }
    }

    #[test]
    fn fading_is_unit_mean() {
        let mut rng = stream(8, "fade");
        let n = 100_000;
        let mean = (0..n).map(|_| draw_fading(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    proptest! {
        #[test]
        fn throughput_is_monotone(b in 0.0..1e7f64, s in 0.0..1e6f64, db in 0.0..1e6f64, ds in 0.0..1e3f64) {
            prop_assert!(throughput(b + db, s) >= throughput(b, s));
            prop_assert!(throughput(b, s + ds) >= throughput(b, s));
        }

        #[test]
        fn sinr_is_scale_covariant(
            p in 0.0..1e4f64, g in 1e-12..1.0f64,
            ip in proptest::collection::vec(0.0..1e4f64, 0..5),
            noise in 1e-12..1e-3f64, c in 1e-3..1e3f64,
        ) {
            let ig: Vec<f64> = ip.iter().enumerate().map(|(k, _)| 1e-6 * (k as f64 + 1.0)).collect();
            let base = compute_sinr(p, g, &ip, &ig, noise);
            let ipc: Vec<f64> = ip.iter().map(|v| v * c).collect();
            let scaled = compute_sinr(p * c, g, &ipc, &ig, noise * c);
            prop_assert!((base - scaled).abs() <= 1e-9 * base.abs().max(1e-300));
        }
    }
}
