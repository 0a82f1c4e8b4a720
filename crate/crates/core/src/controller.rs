//! Anything that can drive a [`HetNetEnv`]: trained agents and heuristics
//! share this interface so evaluation treats them identically.

use crate::env::{HetNetEnv, StepOutcome};

pub trait Controller {
    fn name(&self) -> String;

    /// Called after every reset, before the first action.
    fn begin_episode(&mut self, _env: &HetNetEnv) {}

    /// Raw action for the current step; the environment clamps it.
    fn act(&mut self, env: &HetNetEnv, state: &[f64]) -> Vec<f64>;

    fn observe(&mut self, _outcome: &StepOutcome) {}
}

/// Always emits the same action.
#[derive(Clone, Debug)]
pub struct ConstantController {
    pub action: Vec<f64>,
}

impl Controller for ConstantController {
    fn name(&self) -> String {
        "constant".into()
    }

    fn act(&mut self, _env: &HetNetEnv, _state: &[f64]) -> Vec<f64> {
        self.action.clone()
    }
}

/// Uniform random actions in the unit box.
#[derive(Clone, Debug)]
pub struct RandomController {
    rng: crate::rng::SimRng,
}

impl RandomController {
    pub fn new(seed: u64) -> Self {
        RandomController {
            rng: crate::rng::stream(seed, "random-controller"),
        }
    }
}

impl Controller for RandomController {
    fn name(&self) -> String {
        "random".into()
    }

    fn act(&mut self, env: &HetNetEnv, _state: &[f64]) -> Vec<f64> {
        use rand::Rng;
        (0..env.action_len()).map(|_| self.rng.gen::<f64>()).collect()
    }
}
