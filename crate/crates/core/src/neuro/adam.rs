use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam over a flat parameter ordering. The caller supplies
/// parameters and gradients in the same fixed order on every call.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            config,
        }
    }

    /// One descent step on `params` along `grads` (gradients of a loss).
    pub fn step<'a, P, G>(&mut self, params: P, grads: G, lr: f64)
    where
        P: IntoIterator<Item = &'a mut f64>,
        G: IntoIterator<Item = f64>,
    {
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let mut count = 0;
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
            count += 1;
        }
        debug_assert_eq!(count, self.m.len(), "parameter count changed between Adam steps");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut params = vec![1.0, -2.0, 0.5];
        let grads = [3.0, -0.01, 1e3];
        let mut opt = AdamState::new(3, AdamConfig::default());
        let lr = 1e-3;
        let before = params.clone();
        opt.step(params.iter_mut(), grads.iter().copied(), lr);
        for i in 0..3 {
            let delta = params[i] - before[i];
            assert!((delta + lr * grads[i].signum()).abs() < lr * 1e-5, "{delta}");
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut params = vec![0.3; 4];
        let mut opt = AdamState::new(4, AdamConfig::default());
        for _ in 0..50 {
            opt.step(params.iter_mut(), std::iter::repeat(0.0), 0.1);
        }
        assert_eq!(params, vec![0.3; 4]);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = vec![0.1, 0.2];
            let mut opt = AdamState::new(2, AdamConfig::default());
            for k in 0..10 {
                opt.step(p.iter_mut(), [k as f64, -1.0], 0.01);
            }
            (p, opt)
        };
        assert_eq!(run(), run());
    }
}
