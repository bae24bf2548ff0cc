//! Fully connected layers, Adam and the reduce-on-plateau scheduler.

mod adam;
mod layer;
mod scheduler;

pub use adam::{Adam, AdamConfig};
pub use layer::{mlp_forward, mlp_forward_taped, mlp_jacobian, Activation, LayerVars, LinearLayer};
pub use scheduler::{PlateauConfig, PlateauScheduler};
