use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, ModelParams};
use crate::error::{Error, Result};
use crate::nn::LinearLayer;
use crate::prior::{GammaPosterior, LatentPrior};
use crate::tensor::Tensor;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub name: String,
    /// `[out, in]`
    pub shape: [usize; 2],
    pub activation: crate::nn::Activation,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// On-disk model state. Serialized as JSON; floats are written in
/// shortest round-trip form, so reading back is bit-exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    #[serde(rename = "L")]
    pub latent_dim: usize,
    #[serde(rename = "D")]
    pub input_dim: usize,
    pub architecture: Architecture,
    pub layers: Vec<LayerRecord>,
    /// Gamma shape parameters `a_L`; absent for the fixed-prior baseline.
    pub prior_a: Option<Vec<f64>>,
    pub prior_b: Option<Vec<f64>>,
    pub config: serde_json::Value,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, prior: Option<&LatentPrior>, config: serde_json::Value) -> Self {
        let layers = params
            .layer_names()
            .into_iter()
            .zip(params.layers())
            .map(|(name, l)| LayerRecord {
                name,
                shape: [l.output_dim(), l.input_dim()],
                activation: l.activation,
                weight: l.weight.data().to_vec(),
                bias: l.bias.data().to_vec(),
            })
            .collect();
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            latent_dim: params.latent_dim(),
            input_dim: params.input_dim(),
            architecture: params.arch.clone(),
            layers,
            prior_a: prior.map(|p| p.gamma.shape.clone()),
            prior_b: prior.map(|p| p.gamma.rate.clone()),
            config,
        }
    }

    pub fn model(&self) -> Result<ModelParams> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for rec in &self.layers {
            let [out, inp] = rec.shape;
            layers.push(LinearLayer::from_parts(
                Tensor::matrix(out, inp, rec.weight.clone())?,
                Tensor::new(vec![out], rec.bias.clone())?,
                rec.activation,
            )?);
        }
        let n_enc = self.architecture.encoder_hidden.len();
        let n_dec = self.architecture.decoder_hidden.len() + 1;
        if layers.len() != n_enc + 2 + n_dec {
            return Err(Error::InvalidArgument(format!(
                "checkpoint has {} layers, architecture needs {}",
                layers.len(),
                n_enc + 2 + n_dec
            )));
        }
        let decoder = layers.split_off(n_enc + 2);
        let sigma_head = layers.pop().expect("checked length");
        let mu_head = layers.pop().expect("checked length");
        let params = ModelParams {
            arch: self.architecture.clone(),
            encoder: layers,
            mu_head,
            sigma_head,
            decoder,
        };
        // layer chaining is validated by a dry forward pass
        super::encode(&params, &Tensor::zeros(&[1, self.input_dim]))?;
        super::decode(&params, &Tensor::zeros(&[1, self.latent_dim]))?;
        Ok(params)
    }

    pub fn prior(&self) -> Result<Option<LatentPrior>> {
        match (&self.prior_a, &self.prior_b) {
            (Some(a), Some(b)) => {
                if a.len() != self.latent_dim || b.len() != self.latent_dim {
                    return Err(Error::InvalidArgument("prior length differs from L".into()));
                }
                let mut gamma = GammaPosterior::uninformative(self.latent_dim);
                gamma.n = a.first().map_or(0, |a| (2.0 * a).round() as usize);
                gamma.shape = a.clone();
                gamma.rate = b.clone();
                Ok(Some(LatentPrior::from_gamma(gamma)?))
            }
            (None, None) => Ok(None),
            _ => Err(Error::InvalidArgument("checkpoint has only one of prior_a / prior_b".into())),
        }
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let text = serde_json::to_string_pretty(ckpt)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let version = raw.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    Ok(serde_json::from_value(raw)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let arch = Architecture {
            input_dim: 6,
            latent_dim: 3,
            encoder_hidden: vec![7, 5],
            decoder_hidden: vec![4],
            hidden_activation: Activation::Tanh,
            output_activation: Activation::Sigmoid,
        };
        let params = ModelParams::init(arch, &mut ChaCha8Rng::seed_from_u64(1));
        let dz = crate::model::standard_normal(20, 3, &mut ChaCha8Rng::seed_from_u64(2));
        let prior = LatentPrior::fit(&dz).unwrap();
        let ckpt = Checkpoint::new(&params, Some(&prior), serde_json::json!({"beta": 0.5}));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_checkpoint(&path, &ckpt).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.model().unwrap(), params);
        assert_eq!(back.prior().unwrap().unwrap(), prior);
    }

    #[test]
    fn version_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("old.json");
        fs::write(&path, r#"{"format_version": 7}"#).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::CheckpointVersion { found: 7, expected: 1 })
        ));
    }
}
