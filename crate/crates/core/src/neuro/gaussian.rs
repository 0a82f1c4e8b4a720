use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::mlp::{Activation, ForwardCache, Mlp, MlpGrads};
use crate::error::Result;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LOG_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian with a state-dependent mean and state-independent
/// log standard deviation. The mean network ends in `tanh`, mapped onto
/// `[0, 1]` as `(y + 1) / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPolicy {
    pub mean_net: Mlp,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, hidden: &[usize], init_log_std: f64, rng: &mut R) -> Self {
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        GaussianPolicy {
            mean_net: Mlp::new(&sizes, Activation::Relu, Activation::Tanh, rng),
            log_std: vec![init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); action_dim],
        }
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn clamp_log_std(&mut self) {
        for l in &mut self.log_std {
            *l = l.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn mean(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mean_net.predict(state)?.into_iter().map(|y| 0.5 * (y + 1.0)).collect())
    }

    /// Means for a batch, plus the cache needed to backpropagate into the mean network.
    pub fn mean_batch(&self, states: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
        let (y, cache) = self.mean_net.forward_batch(states)?;
        Ok((y.mapv(|v| 0.5 * (v + 1.0)), cache))
    }

    pub fn log_prob_given_mean(&self, mean: &[f64], action: &[f64]) -> f64 {
        mean.iter()
            .zip(action)
            .zip(&self.log_std)
            .map(|((&mu, &a), &ls)| {
                let z = (a - mu) / ls.exp();
                -0.5 * z * z - ls - HALF_LOG_TWO_PI
            })
            .sum()
    }

    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.log_prob_given_mean(&self.mean(state)?, action))
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 + HALF_LOG_TWO_PI).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean(state)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(&mu, &ls)| {
                let xi: f64 = StandardNormal.sample(rng);
                mu + ls.exp() * xi
            })
            .collect();
        let lp = self.log_prob_given_mean(&mean, &action);
        Ok((action, lp))
    }

    /// Backpropagates `dL/d(mean)` (in `[0, 1]` units) into the mean network.
    pub fn backward_mean(&self, cache: &ForwardCache, d_mean: ArrayView2<'_, f64>) -> Result<MlpGrads> {
        let upstream = d_mean.mapv(|g| 0.5 * g);
        self.mean_net.backward(cache, upstream.view())
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.mean_net.params().chain(self.log_std.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.mean_net.params_mut().chain(self.log_std.iter_mut())
    }

    pub fn n_params(&self) -> usize {
        self.mean_net.n_params() + self.log_std.len()
    }
}
