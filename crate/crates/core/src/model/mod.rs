//! Probabilistic encoder/decoder, reparameterized sampling and the two
//! training objectives (learned relevance prior vs. fixed `N(0, I)`).

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, LayerRecord, CHECKPOINT_VERSION};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{mlp_forward, mlp_forward_taped, Activation, LayerVars, LinearLayer};
use crate::prior::{student_t_log_norm, LatentPrior};
use crate::tensor::{Tape, Tensor, Var};

/// Added to `softplus(raw)` so posterior variances stay strictly positive.
pub const POSTERIOR_VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl Architecture {
    /// `D→256→128→(μ, raw σ)` encoder and `L→128→256→D` decoder with tanh.
    pub fn mlp(input_dim: usize, latent_dim: usize) -> Self {
        Architecture {
            input_dim,
            latent_dim,
            encoder_hidden: vec![256, 128],
            decoder_hidden: vec![128, 256],
            hidden_activation: Activation::Tanh,
            output_activation: Activation::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub arch: Architecture,
    /// Shared trunk feeding both heads.
    pub encoder: Vec<LinearLayer>,
    pub mu_head: LinearLayer,
    pub sigma_head: LinearLayer,
    pub decoder: Vec<LinearLayer>,
}

/// Posterior `q(z|x) = N(μ, diag σ²)` for a batch, each `[batch×L]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorParams {
    pub mu: Tensor,
    pub sigma_sq: Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Prior the KL term is measured against.
#[derive(Clone, Copy, Debug)]
pub enum KlTarget<'a> {
    /// Fixed `N(0, I)`.
    StandardNormal,
    /// Closed-form KL to `N(0, diag σ̂²)`.
    Gaussian(&'a [f64]),
    /// Single-sample estimate of the KL to the per-axis Student's t.
    StudentT(&'a LatentPrior),
}

struct ModelVars {
    encoder: Vec<LayerVars>,
    mu: LayerVars,
    sigma: LayerVars,
    decoder: Vec<LayerVars>,
}

impl ModelVars {
    fn ordered(&self) -> Vec<Var> {
        let mut out = Vec::new();
        let all = self
            .encoder
            .iter()
            .chain([&self.mu, &self.sigma])
            .chain(self.decoder.iter());
        for lv in all {
            out.push(lv.weight);
            out.push(lv.bias);
        }
        out
    }
}

impl ModelParams {
    pub fn init(arch: Architecture, rng: &mut impl rand::Rng) -> Self {
        let act = arch.hidden_activation;
        let mut encoder = Vec::new();
        let mut width = arch.input_dim;
        for &h in &arch.encoder_hidden {
            encoder.push(LinearLayer::init(width, h, act, rng));
            width = h;
        }
        let mu_head = LinearLayer::init(width, arch.latent_dim, Activation::None, rng);
        let sigma_head = LinearLayer::init(width, arch.latent_dim, Activation::None, rng);

        let mut decoder = Vec::new();
        let mut width = arch.latent_dim;
        for &h in &arch.decoder_hidden {
            decoder.push(LinearLayer::init(width, h, act, rng));
            width = h;
        }
        decoder.push(LinearLayer::init(width, arch.input_dim, arch.output_activation, rng));

        ModelParams {
            arch,
            encoder,
            mu_head,
            sigma_head,
            decoder,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    fn layers(&self) -> impl Iterator<Item = &LinearLayer> {
        self.encoder
            .iter()
            .chain([&self.mu_head, &self.sigma_head])
            .chain(self.decoder.iter())
    }

    pub fn layer_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.encoder.len()).map(|i| format!("encoder.{i}")).collect();
        names.push("encoder.mu".into());
        names.push("encoder.sigma".into());
        names.extend((0..self.decoder.len()).map(|i| format!("decoder.{i}")));
        names
    }

    /// Weights and biases in a fixed order (per layer: weight, bias).
    pub fn parameters(&self) -> Vec<&Tensor> {
        self.layers().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.encoder
            .iter_mut()
            .chain([&mut self.mu_head, &mut self.sigma_head])
            .chain(self.decoder.iter_mut())
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.layer_names()
            .into_iter()
            .flat_map(|n| [format!("{n}.weight"), format!("{n}.bias")])
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|t| t.len()).sum()
    }

    /// Rebuilds a model from a flat parameter list in [`parameters`](Self::parameters) order.
    pub fn with_parameters(&self, params: Vec<Tensor>) -> Result<Self> {
        let mut out = self.clone();
        let slots = out.parameters_mut();
        if slots.len() != params.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameter tensors, got {}",
                slots.len(),
                params.len()
            )));
        }
        for (slot, p) in slots.into_iter().zip(params) {
            if slot.shape() != p.shape() {
                return Err(Error::ShapeMismatch {
                    op: "with_parameters",
                    left: slot.shape().to_vec(),
                    right: p.shape().to_vec(),
                });
            }
            *slot = p;
        }
        Ok(out)
    }

    fn attach(&self, tape: &mut Tape) -> ModelVars {
        ModelVars {
            encoder: self.encoder.iter().map(|l| l.attach(tape)).collect(),
            mu: self.mu_head.attach(tape),
            sigma: self.sigma_head.attach(tape),
            decoder: self.decoder.iter().map(|l| l.attach(tape)).collect(),
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != 2 || x.cols() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                op: "encode",
                left: x.shape().to_vec(),
                right: vec![0, self.input_dim()],
            });
        }
        Ok(())
    }
}

/// `μ, σ² ← E(x)` with `σ² = softplus(raw) + 1e-8`.
pub fn encode(params: &ModelParams, x: &Tensor) -> Result<PosteriorParams> {
    params.check_input(x)?;
    let h = mlp_forward(&params.encoder, x)?;
    let mu = params.mu_head.forward(&h)?;
    let sigma_sq = params
        .sigma_head
        .affine(&h)?
        .map(|r| crate::tensor::softplus(r) + POSTERIOR_VARIANCE_FLOOR);
    Ok(PosteriorParams { mu, sigma_sq })
}

pub fn decode(params: &ModelParams, z: &Tensor) -> Result<Tensor> {
    if z.shape().len() != 2 || z.cols() != params.latent_dim() {
        return Err(Error::ShapeMismatch {
            op: "decode",
            left: z.shape().to_vec(),
            right: vec![0, params.latent_dim()],
        });
    }
    mlp_forward(&params.decoder, z)
}

/// Decodes the posterior means (no sampling noise).
pub fn reconstruct(params: &ModelParams, x: &Tensor) -> Result<Tensor> {
    decode(params, &encode(params, x)?.mu)
}

/// `z = μ + ε ⊙ σ`.
pub fn reparameterize(post: &PosteriorParams, noise: &Tensor) -> Result<Tensor> {
    if noise.shape() != post.mu.shape() {
        return Err(Error::ShapeMismatch {
            op: "reparameterize",
            left: post.mu.shape().to_vec(),
            right: noise.shape().to_vec(),
        });
    }
    let data = post
        .mu
        .data()
        .iter()
        .zip(post.sigma_sq.data())
        .zip(noise.data())
        .map(|((&m, &s2), &e)| m + e * s2.sqrt())
        .collect();
    Tensor::new(post.mu.shape().to_vec(), data)
}

/// Mean over the batch of `½‖x − x̂‖²` (unit-variance Gaussian likelihood).
pub fn reconstruction_loss(x: &Tensor, x_hat: &Tensor) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(Error::ShapeMismatch {
            op: "reconstruction_loss",
            left: x.shape().to_vec(),
            right: x_hat.shape().to_vec(),
        });
    }
    let sse: f64 = x
        .data()
        .iter()
        .zip(x_hat.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(0.5 * sse / x.rows() as f64)
}

/// Standard-normal noise `[rows×cols]`.
pub fn standard_normal(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect();
    Tensor::matrix(rows, cols, data).expect("positive dimensions")
}

struct LossVars {
    total: Var,
    recon: Var,
    kl: Var,
}

fn loss_graph(
    tape: &mut Tape,
    params: &ModelParams,
    vars: &ModelVars,
    x: &Tensor,
    noise: &Tensor,
    target: KlTarget<'_>,
    beta: f64,
) -> Result<LossVars> {
    params.check_input(x)?;
    let batch = x.rows();
    let latent = params.latent_dim();
    if noise.shape() != [batch, latent] {
        return Err(Error::ShapeMismatch {
            op: "loss",
            left: vec![batch, latent],
            right: noise.shape().to_vec(),
        });
    }
    let inv_b = 1.0 / batch as f64;

    let xv = tape.constant(x.clone());
    let h = mlp_forward_taped(tape, &params.encoder, &vars.encoder, xv)?;
    let mu = params.mu_head.forward_taped(tape, vars.mu, h)?;
    let raw = params.sigma_head.forward_taped(tape, vars.sigma, h)?;
    let sp = tape.softplus(raw)?;
    let s2 = tape.shift(sp, POSTERIOR_VARIANCE_FLOOR)?;
    let log_s2 = tape.log(s2)?;
    let half_log = tape.scale(log_s2, 0.5)?;
    let sigma = tape.exp(half_log)?;
    let eps = tape.constant(noise.clone());
    let spread = tape.mul(eps, sigma)?;
    let z = tape.add(mu, spread)?;
    let x_hat = mlp_forward_taped(tape, &params.decoder, &vars.decoder, z)?;

    let diff = tape.sub(x_hat, xv)?;
    let sq = tape.square(diff)?;
    let sse = tape.sum(sq)?;
    let recon = tape.scale(sse, 0.5 * inv_b)?;

    let kl = match target {
        KlTarget::StandardNormal => gaussian_kl(tape, mu, s2, log_s2, &vec![1.0; latent], inv_b)?,
        KlTarget::Gaussian(sigma_hat_sq) => {
            if sigma_hat_sq.len() != latent {
                return Err(Error::ShapeMismatch {
                    op: "kl",
                    left: vec![latent],
                    right: vec![sigma_hat_sq.len()],
                });
            }
            gaussian_kl(tape, mu, s2, log_s2, sigma_hat_sq, inv_b)?
        }
        KlTarget::StudentT(prior) => student_t_kl(tape, z, log_s2, noise, prior, inv_b)?,
    };

    let weighted = tape.scale(kl, beta)?;
    let total = tape.add(recon, weighted)?;
    Ok(LossVars { total, recon, kl })
}

/// Batch mean of `−L/2 − ½Σ ln σ² + ½Σ ln σ̂² + ½Σ (μ² + σ²)/σ̂²`.
fn gaussian_kl(tape: &mut Tape, mu: Var, s2: Var, log_s2: Var, sigma_hat_sq: &[f64], inv_b: f64) -> Result<Var> {
    let latent = sigma_hat_sq.len() as f64;
    let constant = 0.5 * sigma_hat_sq.iter().map(|v| v.ln()).sum::<f64>() - latent / 2.0;
    let prior_var = tape.constant(Tensor::vector(sigma_hat_sq.to_vec()));
    let mu2 = tape.square(mu)?;
    let second = tape.add(mu2, s2)?;
    let ratio = tape.div(second, prior_var)?;
    let terms = tape.sub(ratio, log_s2)?;
    let total = tape.sum(terms)?;
    let mean = tape.scale(total, 0.5 * inv_b)?;
    tape.shift(mean, constant)
}

/// Batch mean of `ln q(z|x) − ln p(z)` at the sampled `z`.
fn student_t_kl(tape: &mut Tape, z: Var, log_s2: Var, noise: &Tensor, prior: &LatentPrior, inv_b: f64) -> Result<Var> {
    let latent = prior.latent_dim();
    if tape.value(z).cols() != latent {
        return Err(Error::ShapeMismatch {
            op: "kl",
            left: vec![tape.value(z).cols()],
            right: vec![latent],
        });
    }
    if !prior.gamma.is_updated() {
        return Err(Error::PriorNotUpdated);
    }
    // ln q = Σ −½ln 2π − ½ln σ² − ½ε²; ln p = Σ C_l − (ν+1)/2 · ln(1 + z²/(νσ̂²))
    let batch = tape.value(z).rows() as f64;
    let eps_sq: f64 = noise.data().iter().map(|e| e * e).sum();
    let log_norms: f64 = (0..latent)
        .map(|l| student_t_log_norm(prior.nu[l], prior.scale[l]))
        .sum();
    let constant = -0.5 * latent as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * eps_sq / batch - log_norms;

    let inv_scale = tape.constant(Tensor::vector(
        (0..latent).map(|l| 1.0 / (prior.nu[l] * prior.sigma_hat_sq[l])).collect(),
    ));
    let power = tape.constant(Tensor::vector(prior.nu.iter().map(|n| (n + 1.0) / 2.0).collect()));
    let z2 = tape.square(z)?;
    let t = tape.mul(z2, inv_scale)?;
    let one_plus = tape.shift(t, 1.0)?;
    let log_term = tape.log(one_plus)?;
    let weighted = tape.mul(log_term, power)?;
    let half_log_s2 = tape.scale(log_s2, 0.5)?;
    let terms = tape.sub(weighted, half_log_s2)?;
    let total = tape.sum(terms)?;
    let mean = tape.scale(total, inv_b)?;
    tape.shift(mean, constant)
}

fn evaluate(params: &ModelParams, x: &Tensor, noise: &Tensor, target: KlTarget<'_>, beta: f64) -> Result<LossParts> {
    let mut tape = Tape::new();
    let vars = params.attach(&mut tape);
    let lv = loss_graph(&mut tape, params, &vars, x, noise, target, beta)?;
    Ok(LossParts {
        total: tape.value(lv.total).item(),
        recon: tape.value(lv.recon).item(),
        kl: tape.value(lv.kl).item(),
    })
}

/// Loss and gradients for every parameter, in [`ModelParams::parameters`] order.
pub fn loss_and_gradients(
    params: &ModelParams,
    x: &Tensor,
    noise: &Tensor,
    target: KlTarget<'_>,
    beta: f64,
) -> Result<(LossParts, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let vars = params.attach(&mut tape);
    let lv = loss_graph(&mut tape, params, &vars, x, noise, target, beta)?;
    let mut grads = tape.backward(lv.total)?;
    let parts = LossParts {
        total: tape.value(lv.total).item(),
        recon: tape.value(lv.recon).item(),
        kl: tape.value(lv.kl).item(),
    };
    let ordered = vars
        .ordered()
        .into_iter()
        .map(|v| {
            let shape = tape.value(v).shape().to_vec();
            grads.take(v).unwrap_or_else(|| Tensor::zeros(&shape))
        })
        .collect();
    Ok((parts, ordered))
}

/// Negated relevance-prior ELBO: `recon + β · mean KL(q ‖ N(0, σ̂²))`.
pub fn ard_loss(params: &ModelParams, prior: &LatentPrior, x: &Tensor, noise: &Tensor, beta: f64) -> Result<LossParts> {
    if !prior.gamma.is_updated() {
        return Err(Error::PriorNotUpdated);
    }
    evaluate(params, x, noise, KlTarget::Gaussian(&prior.sigma_hat_sq), beta)
}

/// Negated standard ELBO: `recon + β · mean KL(q ‖ N(0, I))`.
pub fn vanilla_loss(params: &ModelParams, x: &Tensor, noise: &Tensor, beta: f64) -> Result<LossParts> {
    evaluate(params, x, noise, KlTarget::StandardNormal, beta)
}

/// Loss under an arbitrary KL target (e.g. the sampled Student's t).
pub fn loss_with_target(
    params: &ModelParams,
    x: &Tensor,
    noise: &Tensor,
    target: KlTarget<'_>,
    beta: f64,
) -> Result<LossParts> {
    evaluate(params, x, noise, target, beta)
}

/// Samples `z_l ~ N(0, σ̂²_l)` on `active_set` (zero elsewhere) and decodes.
pub fn generate(params: &ModelParams, prior: &LatentPrior, active_set: &[usize], count: usize, seed: u64) -> Result<Tensor> {
    generate_with_variances(params, &prior.sigma_hat_sq, active_set, count, seed)
}

pub fn generate_with_variances(
    params: &ModelParams,
    variances: &[f64],
    active_set: &[usize],
    count: usize,
    seed: u64,
) -> Result<Tensor> {
    let latent = params.latent_dim();
    if active_set.is_empty() {
        return Err(Error::InvalidArgument("active set is empty".into()));
    }
    if variances.len() != latent {
        return Err(Error::ShapeMismatch {
            op: "generate",
            left: vec![latent],
            right: vec![variances.len()],
        });
    }
    if let Some(&bad) = active_set.iter().find(|&&a| a >= latent) {
        return Err(Error::InvalidArgument(format!("axis {bad} outside latent size {latent}")));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let z = sample_latents(variances, active_set, count, seed);
    decode(params, &z)
}

/// The latent draws used by [`generate_with_variances`].
pub fn sample_latents(variances: &[f64], active_set: &[usize], count: usize, seed: u64) -> Tensor {
    let latent = variances.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Tensor::zeros(&[count, latent]);
    for i in 0..count {
        let row = z.row_mut(i);
        for &l in active_set {
            let e: f64 = StandardNormal.sample(&mut rng);
            row[l] = e * variances[l].sqrt();
        }
    }
    z
}
