//! Small dense-network toolkit: MLP forward/backward, Adam, a diagonal
//! Gaussian policy head, soft target updates and text checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod gaussian;
pub mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::PolicyCheckpoint;
pub use gaussian::GaussianPolicy;
pub use mlp::{soft_update, Activation, Dense, ForwardCache, Mlp, MlpGrads};

/// Rescales gradients so their joint L2 norm is at most `max_norm`. Returns
/// the norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let c = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= c);
    }
    norm
}
