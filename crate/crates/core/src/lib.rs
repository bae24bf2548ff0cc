//! Variational autoencoder with an automatic relevance determination prior
//! on the latent axes, built on a small reverse-mode autodiff engine.

pub mod cli;
pub mod datasets;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod prior;
pub mod relevance;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use tensor::Tensor;
