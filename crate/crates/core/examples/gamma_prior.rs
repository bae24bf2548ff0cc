//! Fits the learned prior to latent samples with known per-axis variances
//! and compares the resulting Student's t marginal with its Gaussian
//! approximation.
//!
//! cargo run --release --example gamma_prior

use ardvae::model::sample_latents;
use ardvae::prior::{kl_gaussian_approx, kl_standard_normal, student_t_logpdf, LatentPrior};

fn main() -> ardvae::Result<()> {
    let truth = [2.0, 0.5, 1e-3, 1e-6];
    let axes: Vec<usize> = (0..truth.len()).collect();
    for n in [20, 1000, 20_000] {
        let dz = sample_latents(&truth, &axes, n, 1);
        let prior = LatentPrior::fit(&dz)?;
        println!("n = {n}");
        for l in 0..truth.len() {
            println!(
                "  axis {l}: true {:.1e}  estimated {:.3e}  dof {:.0}",
                truth[l], prior.sigma_hat_sq[l], prior.nu[l]
            );
        }
        // density gap between the Student's t marginal and N(0, σ̂²) on axis 0
        let v = prior.sigma_hat_sq[0];
        let mut rest = prior.clone();
        rest.sigma_hat_sq.truncate(1);
        rest.nu.truncate(1);
        rest.scale.truncate(1);
        rest.gamma.shape.truncate(1);
        rest.gamma.rate.truncate(1);
        rest.gamma.mean.truncate(1);
        let gap = (0..=400)
            .map(|i| {
                let z = (i as f64 / 40.0 - 5.0) * v.sqrt();
                let t = student_t_logpdf(&[z], &rest).unwrap().exp();
                let g = (-0.5 * z * z / v).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
                (t - g).abs()
            })
            .fold(0.0, f64::max);
        println!("  max pdf gap to the Gaussian approximation: {gap:.2e}");
    }

    let (mu, var) = ([0.3, 0.0], [0.8, 0.01]);
    let learned = [1.0, 0.01];
    println!(
        "KL to learned prior {:.4}, KL to N(0, I) {:.4}",
        kl_gaussian_approx(&mu, &var, &learned)?,
        kl_standard_normal(&mu, &var)?
    );
    Ok(())
}
