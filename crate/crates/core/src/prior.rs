//! Hierarchical relevance prior over latent axes.
//!
//! Each latent axis `l` has a Gaussian prior `N(0, 1/α_l)` with a Gamma
//! hyperprior on the precision `α_l`. Given a set of latent samples `D_z`,
//! the Gamma posterior is available in closed form; integrating `α` out
//! leaves a per-axis Student's t, which for large `|D_z|` is close to the
//! Gaussian `N(0, σ̂²)` with `σ̂² = b/a`.
//!
//! The hyperprior parameters `a0`, `b0` and the likelihood mean are
//! fixed at zero, so after an update with `n` samples every axis has
//! `a = n/2` and `b = ½ Σ z²`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Floor applied to estimated variances. Axes whose samples are all zero
/// would otherwise get `σ̂² = 0`.
pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPosterior {
    pub shape: Vec<f64>,
    pub rate: Vec<f64>,
    pub shape0: f64,
    pub rate0: f64,
    pub mean: Vec<f64>,
    /// Samples used by the most recent update; 0 before any update.
    pub n: usize,
}

impl GammaPosterior {
    /// Uninformative hyperprior (`a0 = b0 = 0`, zero mean), not yet updated.
    pub fn uninformative(latent_dim: usize) -> Self {
        GammaPosterior {
            shape: vec![0.0; latent_dim],
            rate: vec![0.0; latent_dim],
            shape0: 0.0,
            rate0: 0.0,
            mean: vec![0.0; latent_dim],
            n: 0,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.shape.len()
    }

    pub fn is_updated(&self) -> bool {
        self.n > 0
    }
}

/// Conjugate update from latent samples `dz` (`[n×L]`). The result replaces
/// the previous posterior rather than accumulating onto it.
pub fn update_gamma_posterior(dz: &Tensor, gp: &GammaPosterior) -> Result<GammaPosterior> {
    let l = gp.latent_dim();
    if dz.shape().len() != 2 || dz.cols() != l {
        return Err(Error::ShapeMismatch {
            op: "update_gamma_posterior",
            left: dz.shape().to_vec(),
            right: vec![0, l],
        });
    }
    let n = dz.rows();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if !dz.is_finite() {
        return Err(Error::NonFinite {
            op: "update_gamma_posterior",
        });
    }

    let mut sq = vec![0.0; l];
    for i in 0..n {
        for ((acc, &z), &m) in sq.iter_mut().zip(dz.row(i)).zip(&gp.mean) {
            let d = z - m;
            *acc += d * d;
        }
    }
    Ok(GammaPosterior {
        shape: vec![gp.shape0 + n as f64 / 2.0; l],
        rate: sq.into_iter().map(|s| gp.rate0 + s / 2.0).collect(),
        shape0: gp.shape0,
        rate0: gp.rate0,
        mean: gp.mean.clone(),
        n,
    })
}

/// `σ̂²_l = b_l / a_l`, floored at [`VARIANCE_FLOOR`].
pub fn estimated_variance(gp: &GammaPosterior) -> Result<Vec<f64>> {
    if gp.shape.iter().any(|&a| a <= 0.0) {
        return Err(Error::PriorNotUpdated);
    }
    Ok(gp
        .shape
        .iter()
        .zip(&gp.rate)
        .map(|(&a, &b)| (b / a).max(VARIANCE_FLOOR))
        .collect())
}

/// The learned prior: Gamma posterior plus derived Student's t parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentPrior {
    pub gamma: GammaPosterior,
    pub sigma_hat_sq: Vec<f64>,
    /// Degrees of freedom `ν_l = 2 a_l`.
    pub nu: Vec<f64>,
    /// Scale `s_l = √σ̂²_l`.
    pub scale: Vec<f64>,
}

impl LatentPrior {
    pub fn from_gamma(gamma: GammaPosterior) -> Result<Self> {
        let sigma_hat_sq = estimated_variance(&gamma)?;
        let nu = gamma.shape.iter().map(|a| 2.0 * a).collect();
        let scale = sigma_hat_sq.iter().map(|v| v.sqrt()).collect();
        Ok(LatentPrior {
            gamma,
            sigma_hat_sq,
            nu,
            scale,
        })
    }

    /// Fits the prior to latent samples with the uninformative hyperprior.
    pub fn fit(dz: &Tensor) -> Result<Self> {
        let gp = update_gamma_posterior(dz, &GammaPosterior::uninformative(dz.cols()))?;
        Self::from_gamma(gp)
    }

    pub fn latent_dim(&self) -> usize {
        self.sigma_hat_sq.len()
    }

    /// Smallest and largest estimated variance.
    pub fn variance_spread(&self) -> (f64, f64) {
        let min = self.sigma_hat_sq.iter().copied().fold(f64::INFINITY, f64::min);
        let max = self.sigma_hat_sq.iter().copied().fold(0.0, f64::max);
        (min, max)
    }
}

/// Per-axis Student's t log normaliser `ln Γ((ν+1)/2) − ln Γ(ν/2) − ½ ln(πν) − ln s`.
pub(crate) fn student_t_log_norm(nu: f64, scale: f64) -> f64 {
    ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (std::f64::consts::PI * nu).ln() - scale.ln()
}

/// Log density of `z` under the marginal prior, summed over axes.
pub fn student_t_logpdf(z: &[f64], prior: &LatentPrior) -> Result<f64> {
    if z.len() != prior.latent_dim() {
        return Err(Error::ShapeMismatch {
            op: "student_t_logpdf",
            left: vec![z.len()],
            right: vec![prior.latent_dim()],
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            op: "student_t_logpdf",
        });
    }
    let mut total = 0.0;
    for l in 0..z.len() {
        let (nu, s) = (prior.nu[l], prior.scale[l]);
        if !(nu > 0.0 && s > 0.0) {
            return Err(Error::PriorNotUpdated);
        }
        let d = z[l] - prior.gamma.mean[l];
        let t2 = d * d / prior.sigma_hat_sq[l];
        total += student_t_log_norm(nu, s) - (nu + 1.0) / 2.0 * (t2 / nu).ln_1p();
    }
    Ok(total)
}

fn check_variances(v: &[f64]) -> Result<()> {
    match v.iter().position(|&x| !(x > 0.0)) {
        Some(index) => Err(Error::NonPositiveVariance {
            index,
            value: v[index],
        }),
        None => Ok(()),
    }
}

/// `KL(N(μ, diag σ²) ‖ N(0, diag σ̂²))`.
pub fn kl_gaussian_approx(mu: &[f64], sigma_sq: &[f64], sigma_hat_sq: &[f64]) -> Result<f64> {
    if mu.len() != sigma_sq.len() || mu.len() != sigma_hat_sq.len() {
        return Err(Error::ShapeMismatch {
            op: "kl_gaussian_approx",
            left: vec![mu.len(), sigma_sq.len()],
            right: vec![sigma_hat_sq.len()],
        });
    }
    check_variances(sigma_sq)?;
    check_variances(sigma_hat_sq)?;
    let l = mu.len() as f64;
    let mut log_q = 0.0;
    let mut log_p = 0.0;
    let mut quad = 0.0;
    for i in 0..mu.len() {
        log_q += sigma_sq[i].ln();
        log_p += sigma_hat_sq[i].ln();
        quad += (mu[i] * mu[i] + sigma_sq[i]) / sigma_hat_sq[i];
    }
    Ok(-l / 2.0 - 0.5 * log_q + 0.5 * log_p + 0.5 * quad)
}

/// `KL(N(μ, diag σ²) ‖ N(0, I))`.
pub fn kl_standard_normal(mu: &[f64], sigma_sq: &[f64]) -> Result<f64> {
    kl_gaussian_approx(mu, sigma_sq, &vec![1.0; mu.len()])
}
