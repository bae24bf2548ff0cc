//! Sweeps the β weight on a small linear manifold and writes ablation.csv
//! to the temp directory.
//!
//! cargo run --release --example ablation -- [beta,beta,...]

use ardvae::cli::{cmd_ablate, AblationAxis, DataConfig, RunConfig, RunSection, ABLATION_HEADER};
use ardvae::trainer::TrainConfig;

fn main() -> ardvae::Result<()> {
    let values: Vec<f64> = std::env::args()
        .nth(1)
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect())
        .unwrap_or_else(|| vec![0.1, 0.5, 2.0, 8.0]);

    let mut train = TrainConfig::new(0.5, 8);
    train.epochs = 20;
    train.encoder_hidden = vec![64];
    train.decoder_hidden = vec![64];
    let config = RunConfig {
        run: RunSection {
            generate_count: 2000,
            ..RunSection::default()
        },
        data: DataConfig::Linear {
            intrinsic_dim: 4,
            ambient_dim: 16,
            samples: 5000,
            noise_std: 0.01,
            seed: 4,
            variance_range: [4.0, 1.2],
        },
        train,
    };
    let out = std::env::temp_dir().join("ardvae-ablation");
    let rows = cmd_ablate(&config, AblationAxis::Beta, &values, &out)?;
    println!("{ABLATION_HEADER}");
    for r in rows {
        println!("{}", r.csv_row());
    }
    println!("wrote {}", out.join("ablation.csv").display());
    Ok(())
}
