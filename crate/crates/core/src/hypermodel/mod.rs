//! Part A: a point-cloud autoencoder whose decoder is a small target network
//! with weights emitted by a hypernetwork.
//!
//! The encoder is a per-point MLP followed by a coordinatewise max over
//! points. The hypernetwork maps the embedding to the full parameter vector
//! of the target network, which maps points of the unit sphere onto the
//! object surface.

mod latent;
mod model;
mod train;

pub use latent::{interpolate, sample_latent, Embedding, LatentPrior};
pub use model::{sphere_prior_samples, ModelA, ModelAConfig};
pub use train::{
    batch_loss_grad, composite_grad_check, normalize_dataset, train_part_a, BatchGrad, TrainAConfig, TrainAReport,
    TrainedA, NORMALIZED_RADIUS,
};

#[cfg(test)]
mod tests;
