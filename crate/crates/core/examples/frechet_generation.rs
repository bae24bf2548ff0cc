//! Generates from a trained model with only the active axes and with every
//! axis, and compares both against held-out data with the Fréchet distance.
//!
//! cargo run --release --example frechet_generation -- [epochs]

use ardvae::datasets::{gen_linear_manifold, SyntheticSpec};
use ardvae::metrics::{frechet_gaussian, mse_per_element};
use ardvae::model::{generate_with_variances, reconstruct};
use ardvae::relevance::{analyze, VarianceSource, DEFAULT_PROBES, DEFAULT_THRESHOLD};
use ardvae::trainer::{train, TrainConfig};

fn main() -> ardvae::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(30);
    let data = gen_linear_manifold(&SyntheticSpec::linear(4, 32, 10_000, 0.01, 3))?;
    let mut config = TrainConfig::new(0.5, 10);
    config.epochs = epochs;
    config.encoder_hidden = vec![128, 64];
    config.decoder_hidden = vec![64, 128];
    let outcome = train(&config, &data)?;
    let prior = outcome.prior.as_ref().expect("relevance-prior run");
    let val = data.select_rows(&outcome.val_indices);
    let report = analyze(&outcome.params, VarianceSource::Prior(prior), &val, DEFAULT_THRESHOLD, DEFAULT_PROBES)?;
    println!("active axes {:?}", report.active_set);
    println!("reconstruction mse {:.4e}", mse_per_element(&val, &reconstruct(&outcome.params, &val)?)?);

    let all: Vec<usize> = (0..config.latent_dim).collect();
    for (label, axes) in [("active", &report.active_set), ("all", &all)] {
        let samples = generate_with_variances(&outcome.params, &prior.sigma_hat_sq, axes, 5000, 1)?;
        let fd = frechet_gaussian(&samples, &val)?;
        println!("{label:>6} axes: frechet {:.4}", fd.distance);
    }
    Ok(())
}
