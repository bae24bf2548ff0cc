//! Ranks latent axes of a relevance-prior model and of a fixed-prior model
//! trained on the same three-factor manifold.
//!
//! cargo run --release --example relevance_ranking -- [epochs]

use ardvae::datasets::{gen_linear_manifold, SyntheticSpec};
use ardvae::relevance::{analyze, VarianceSource, DEFAULT_PROBES, DEFAULT_THRESHOLD};
use ardvae::trainer::{train, ModelKind, TrainConfig};

fn main() -> ardvae::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(30);
    let data = gen_linear_manifold(&SyntheticSpec::linear(3, 24, 6000, 0.01, 2))?;

    for kind in [ModelKind::Ard, ModelKind::Vanilla] {
        let mut config = TrainConfig::new(0.5, 8);
        config.kind = kind;
        config.epochs = epochs;
        config.encoder_hidden = vec![64, 32];
        config.decoder_hidden = vec![32, 64];
        let outcome = train(&config, &data)?;
        let probe = data.select_rows(&outcome.val_indices);
        let source = match &outcome.prior {
            Some(p) => VarianceSource::Prior(p),
            None => VarianceSource::EncodedMeans,
        };
        let report = analyze(&outcome.params, source, &probe, DEFAULT_THRESHOLD, DEFAULT_PROBES)?;
        println!("{kind:?}: {} active {:?}", report.active_set.len(), report.active_set);
        for &l in &report.ranking {
            println!(
                "  axis {l}  variance {:.3e}  weight {:.3e}  score {:.3e}",
                report.variances[l], report.weights[l], report.scores[l]
            );
        }
    }
    Ok(())
}
