//! Training loop with a lagged prior refresh.
//!
//! The training split is divided into minibatch samples `X_sgd` and a small
//! held-aside subset `X_α`. Every `prior_lag` epochs a fresh `X_α` is drawn,
//! encoded into latent samples `D_z`, and the Gamma posterior is refit from
//! them; minibatch updates then optimize the loss against that fixed prior.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{encode, loss_and_gradients, loss_with_target, standard_normal, Architecture, KlTarget, ModelParams};
use crate::nn::{Activation, Adam, AdamConfig, PlateauConfig, PlateauScheduler};
use crate::prior::LatentPrior;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Ard,
    Vanilla,
}

/// How the KL term against the learned prior is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KlMode {
    /// Closed form against `N(0, σ̂²)`.
    #[default]
    Gaussian,
    /// Single-sample estimate against the Student's t marginal.
    SampledStudentT,
}

fn default_latent_dim() -> usize {
    10
}
fn default_alpha_subset_size() -> usize {
    10_000
}
fn default_prior_lag() -> usize {
    1
}
fn default_epochs() -> usize {
    50
}
fn default_batch_size() -> usize {
    100
}
fn default_lr() -> f64 {
    5e-4
}
fn default_scheduler_factor() -> f64 {
    0.5
}
fn default_scheduler_patience() -> usize {
    10
}
fn default_val_fraction() -> f64 {
    0.1
}
fn default_encoder_hidden() -> Vec<usize> {
    vec![256, 128]
}
fn default_decoder_hidden() -> Vec<usize> {
    vec![128, 256]
}
fn default_hidden_activation() -> Activation {
    Activation::Tanh
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub beta: f64,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    /// Requested `|X_α|`; capped at 20% of the training split.
    #[serde(default = "default_alpha_subset_size")]
    pub alpha_subset_size: usize,
    /// Epochs between prior refreshes.
    #[serde(default = "default_prior_lag")]
    pub prior_lag: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_scheduler_factor")]
    pub scheduler_factor: f64,
    #[serde(default = "default_scheduler_patience")]
    pub scheduler_patience: usize,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub kind: ModelKind,
    #[serde(default)]
    pub kl_mode: KlMode,
    #[serde(default = "default_encoder_hidden")]
    pub encoder_hidden: Vec<usize>,
    #[serde(default = "default_decoder_hidden")]
    pub decoder_hidden: Vec<usize>,
    #[serde(default = "default_hidden_activation")]
    pub hidden_activation: Activation,
    #[serde(default)]
    pub output_activation: Activation,
}

impl TrainConfig {
    pub fn new(beta: f64, latent_dim: usize) -> Self {
        TrainConfig {
            beta,
            latent_dim,
            alpha_subset_size: default_alpha_subset_size(),
            prior_lag: default_prior_lag(),
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            lr: default_lr(),
            scheduler_factor: default_scheduler_factor(),
            scheduler_patience: default_scheduler_patience(),
            val_fraction: default_val_fraction(),
            seed: 0,
            kind: ModelKind::Ard,
            kl_mode: KlMode::Gaussian,
            encoder_hidden: default_encoder_hidden(),
            decoder_hidden: default_decoder_hidden(),
            hidden_activation: default_hidden_activation(),
            output_activation: Activation::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.prior_lag == 0 {
            return bad("prior_lag must be at least 1".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction));
        }
        if !(self.scheduler_factor > 0.0 && self.scheduler_factor < 1.0) {
            return bad(format!("scheduler_factor must lie in (0, 1), got {}", self.scheduler_factor));
        }
        if !(self.lr >= 0.0) {
            return bad(format!("lr must be non-negative, got {}", self.lr));
        }
        Ok(())
    }

    pub fn architecture(&self, input_dim: usize) -> Architecture {
        Architecture {
            input_dim,
            latent_dim: self.latent_dim,
            encoder_hidden: self.encoder_hidden.clone(),
            decoder_hidden: self.decoder_hidden.clone(),
            hidden_activation: self.hidden_activation,
            output_activation: self.output_activation,
        }
    }

    /// The `|X_α|` actually used for a training split of `n_train` samples.
    pub fn effective_alpha_size(&self, n_train: usize) -> usize {
        self.alpha_subset_size.min(n_train / 5)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub recon: f64,
    pub kl: f64,
    /// Smallest estimated prior variance; absent for the fixed-prior baseline.
    pub min_var: Option<f64>,
    pub max_var: Option<f64>,
    pub lr: f64,
    pub seconds: f64,
}

pub const EPOCH_CSV_HEADER: &str = "epoch,train_loss,val_loss,recon,kl,min_var,max_var,lr,seconds";

impl EpochRecord {
    /// One CSV row; `with_timing = false` writes `0` in the seconds column so
    /// the row depends only on config and seed.
    pub fn csv_row(&self, with_timing: bool) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.train_loss,
            self.val_loss,
            self.recon,
            self.kl,
            opt(self.min_var),
            opt(self.max_var),
            self.lr,
            if with_timing { self.seconds } else { 0.0 }
        )
    }
}

pub fn write_epoch_csv(out: &mut impl Write, records: &[EpochRecord], with_timing: bool) -> std::io::Result<()> {
    writeln!(out, "{EPOCH_CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row(with_timing))?;
    }
    Ok(())
}

/// Splits `0..n` into `(sgd, alpha)` index sets with `|alpha| = alpha_size`,
/// drawn uniformly without replacement.
pub fn split_indices(indices: &[usize], alpha_size: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if alpha_size >= indices.len() {
        return Err(Error::InvalidArgument(format!(
            "alpha subset of {alpha_size} does not fit in {} samples",
            indices.len()
        )));
    }
    let mut perm = indices.to_vec();
    perm.shuffle(rng);
    let sgd = perm.split_off(alpha_size);
    Ok((sgd, perm))
}

/// Returns `(X_sgd, X_α)`.
pub fn split_dataset(x: &Tensor, alpha_subset_size: usize, seed: u64) -> Result<(Tensor, Tensor)> {
    let all: Vec<usize> = (0..x.rows()).collect();
    let (sgd, alpha) = split_indices(&all, alpha_subset_size, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok((x.select_rows(&sgd), x.select_rows(&alpha)))
}

/// Encodes each row of `x_alpha` and draws one reparameterized sample per row.
pub fn build_latent_dataset(params: &ModelParams, x_alpha: &Tensor, rng: &mut ChaCha8Rng) -> Result<Tensor> {
    let post = encode(params, x_alpha)?;
    let noise = standard_normal(x_alpha.rows(), params.latent_dim(), rng);
    crate::model::reparameterize(&post, &noise)
}

/// Seeded variant of [`build_latent_dataset`].
pub fn build_latent_dataset_seeded(params: &ModelParams, x_alpha: &Tensor, seed: u64) -> Result<Tensor> {
    build_latent_dataset(params, x_alpha, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Last refreshed prior; `None` for the fixed-prior baseline.
    pub prior: Option<LatentPrior>,
    pub records: Vec<EpochRecord>,
    pub prior_refreshes: usize,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub alpha_size: usize,
}

pub fn train(config: &TrainConfig, data: &Tensor) -> Result<TrainOutcome> {
    train_with(config, data, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(config: &TrainConfig, data: &Tensor, mut on_epoch: impl FnMut(&EpochRecord)) -> Result<TrainOutcome> {
    config.validate()?;
    if data.shape().len() != 2 {
        return Err(Error::InvalidArgument(format!("dataset must be a matrix, got {:?}", data.shape())));
    }
    let n = data.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let n_val = ((n as f64 * config.val_fraction).round() as usize).max(1);
    if n_val >= n {
        return Err(Error::InvalidArgument(format!("dataset of {n} samples is too small")));
    }
    let val_indices = perm[..n_val].to_vec();
    let train_indices = perm[n_val..].to_vec();
    let ard = config.kind == ModelKind::Ard;
    let alpha_size = if ard {
        config.effective_alpha_size(train_indices.len())
    } else {
        0
    };
    if ard && alpha_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "training split of {} samples leaves no room for a prior subset",
            train_indices.len()
        )));
    }
    if train_indices.len() < alpha_size + config.batch_size {
        return Err(Error::InvalidArgument(format!(
            "training split of {} samples cannot hold |X_α| = {alpha_size} plus one batch of {}",
            train_indices.len(),
            config.batch_size
        )));
    }

    let x_val = data.select_rows(&val_indices);
    let mut params = ModelParams::init(config.architecture(data.cols()), &mut rng);
    let mut adam = Adam::new(
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
        &params.parameters(),
        params.parameter_names(),
    );
    let mut scheduler = PlateauScheduler::new(
        config.lr,
        PlateauConfig {
            factor: config.scheduler_factor,
            patience: config.scheduler_patience,
        },
    );

    let mut prior: Option<LatentPrior> = None;
    let mut refreshes = 0;
    let mut sgd_indices = train_indices.clone();
    let mut refresh = |params: &ModelParams, rng: &mut ChaCha8Rng| -> Result<(LatentPrior, Vec<usize>)> {
        let (sgd, alpha) = split_indices(&train_indices, alpha_size, rng)?;
        let dz = build_latent_dataset(params, &data.select_rows(&alpha), rng)?;
        refreshes += 1;
        Ok((LatentPrior::fit(&dz)?, sgd))
    };

    if ard {
        let (p, sgd) = refresh(&params, &mut rng)?;
        prior = Some(p);
        sgd_indices = sgd;
    }

    let mut records = Vec::with_capacity(config.epochs);
    let latent = config.latent_dim;
    for epoch in 0..config.epochs {
        let started = Instant::now();
        if ard && epoch % config.prior_lag == 0 {
            let (p, sgd) = refresh(&params, &mut rng)?;
            prior = Some(p);
            sgd_indices = sgd;
        }
        sgd_indices.shuffle(&mut rng);

        let target = match (&prior, config.kl_mode) {
            (None, _) => KlTarget::StandardNormal,
            (Some(p), KlMode::Gaussian) => KlTarget::Gaussian(&p.sigma_hat_sq),
            (Some(p), KlMode::SampledStudentT) => KlTarget::StudentT(p),
        };

        let mut sums = (0.0, 0.0, 0.0);
        let mut steps = 0;
        for (step, chunk) in sgd_indices.chunks_exact(config.batch_size).enumerate() {
            let wrap = |e: Error| Error::Diverged {
                epoch,
                step,
                source: Box::new(e),
            };
            let x = data.select_rows(chunk);
            let noise = standard_normal(chunk.len(), latent, &mut rng);
            let (parts, grads) = loss_and_gradients(&params, &x, &noise, target, config.beta).map_err(wrap)?;
            if !parts.total.is_finite() {
                return Err(wrap(Error::NonFinite { op: "loss" }));
            }
            adam.step(&mut params.parameters_mut(), &grads).map_err(wrap)?;
            sums.0 += parts.total;
            sums.1 += parts.recon;
            sums.2 += parts.kl;
            steps += 1;
        }
        let steps_f = steps as f64;

        let val_noise = standard_normal(x_val.rows(), latent, &mut rng);
        let val = loss_with_target(&params, &x_val, &val_noise, target, config.beta).map_err(|e| Error::Diverged {
            epoch,
            step: steps,
            source: Box::new(e),
        })?;
        let lr = scheduler.step(val.total);
        adam.set_lr(lr);

        let spread = prior.as_ref().map(LatentPrior::variance_spread);
        let record = EpochRecord {
            epoch,
            train_loss: sums.0 / steps_f,
            val_loss: val.total,
            recon: sums.1 / steps_f,
            kl: sums.2 / steps_f,
            min_var: spread.map(|s| s.0),
            max_var: spread.map(|s| s.1),
            lr,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        records.push(record);
    }

    Ok(TrainOutcome {
        params,
        prior,
        records,
        prior_refreshes: refreshes,
        train_indices: perm[n_val..].to_vec(),
        val_indices,
        alpha_size,
    })
}
