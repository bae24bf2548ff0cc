//! Post-hoc relevance of latent axes.
//!
//! An axis matters when the decoder output responds to it. The weight of
//! axis `l` is the mean (over probe samples) squared norm of the decoder
//! Jacobian column `∂x̂/∂μ_l`, evaluated at the encoded mean. Multiplying by
//! the axis variance gives the relevance score, and the active set is the
//! shortest score-ranked prefix covering a fraction (default 99%) of the
//! total score.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{encode, ModelParams};
use crate::nn::mlp_jacobian;
use crate::prior::LatentPrior;
use crate::tensor::Tensor;

pub const DEFAULT_THRESHOLD: f64 = 0.99;
pub const DEFAULT_PROBES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    pub weights: Vec<f64>,
    pub scores: Vec<f64>,
    /// Axes by descending score.
    pub ranking: Vec<usize>,
    /// Sorted ascending.
    pub active_set: Vec<usize>,
    pub threshold: f64,
    pub n_probe: usize,
    /// Per-axis variances the weights were multiplied by.
    pub variances: Vec<f64>,
}

/// Which per-axis variance multiplies the Jacobian weights.
#[derive(Clone, Copy, Debug)]
pub enum VarianceSource<'a> {
    /// Estimated variances of a learned prior.
    Prior(&'a LatentPrior),
    /// Empirical variance of the encoded means over the probe set.
    EncodedMeans,
    Unit,
}

/// Decoder Jacobian `[D×L]` at `μ = E(x).μ`.
pub fn jacobian_wrt_latent_mean(params: &ModelParams, x: &[f64]) -> Result<Tensor> {
    let row = Tensor::matrix(1, x.len(), x.to_vec())?;
    let mu = encode(params, &row)?.mu;
    mlp_jacobian(&params.decoder, mu.data())
}

/// `w_l = (1/N) Σ_i Σ_k J_i[k][l]²` over the first `n_probe` rows.
pub fn relevance_weights(params: &ModelParams, probe_set: &Tensor, n_probe: usize) -> Result<Vec<f64>> {
    let n = probe_set.rows().min(n_probe);
    if n == 0 || probe_set.is_empty() {
        return Err(Error::InvalidArgument("relevance needs at least one probe sample".into()));
    }
    let latent = params.latent_dim();
    let mut w = vec![0.0; latent];
    for i in 0..n {
        let j = jacobian_wrt_latent_mean(params, probe_set.row(i))?;
        for k in 0..j.rows() {
            for (wl, &v) in w.iter_mut().zip(j.row(k)) {
                *wl += v * v;
            }
        }
    }
    for wl in &mut w {
        *wl /= n as f64;
    }
    Ok(w)
}

pub fn relevance_scores(weights: &[f64], sigma_hat_sq: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != sigma_hat_sq.len() {
        return Err(Error::ShapeMismatch {
            op: "relevance_scores",
            left: vec![weights.len()],
            right: vec![sigma_hat_sq.len()],
        });
    }
    Ok(weights.iter().zip(sigma_hat_sq).map(|(w, s)| w * s).collect())
}

/// Axes by descending score, ties broken by lower index.
pub fn rank_axes(scores: &[f64]) -> Vec<usize> {
    let mut ranking: Vec<usize> = (0..scores.len()).collect();
    ranking.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    ranking
}

/// Shortest ranked prefix whose score sum reaches `threshold` of the total;
/// returned in ascending axis order.
pub fn select_active(scores: &[f64], threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!("threshold must lie in (0, 1], got {threshold}")));
    }
    if let Some(bad) = scores.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("relevance scores must be finite and non-negative, got {bad}")));
    }
    let ranking = rank_axes(scores);
    let total: f64 = ranking.iter().map(|&l| scores[l]).sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("all relevance scores are zero".into()));
    }
    // relative slack absorbs summation rounding, e.g. ⌈0.99·L⌉ for uniform scores
    let target = threshold * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    let mut active = Vec::new();
    for &l in &ranking {
        active.push(l);
        acc += scores[l];
        if acc >= target {
            break;
        }
    }
    active.sort_unstable();
    Ok(active)
}

/// Per-axis variance of the encoded means of the first `n_probe` rows.
pub fn encoded_mean_variance(params: &ModelParams, probe_set: &Tensor, n_probe: usize) -> Result<Vec<f64>> {
    let n = probe_set.rows().min(n_probe);
    let idx: Vec<usize> = (0..n).collect();
    let mu = encode(params, &probe_set.select_rows(&idx))?.mu;
    let latent = mu.cols();
    let mut mean = vec![0.0; latent];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(mu.row(i)) {
            *m += v / n as f64;
        }
    }
    let mut var = vec![0.0; latent];
    for i in 0..n {
        for l in 0..latent {
            let d = mu.row(i)[l] - mean[l];
            var[l] += d * d / n as f64;
        }
    }
    Ok(var)
}

pub fn analyze(
    params: &ModelParams,
    variances: VarianceSource<'_>,
    probe_set: &Tensor,
    threshold: f64,
    n_probe: usize,
) -> Result<RelevanceReport> {
    let weights = relevance_weights(params, probe_set, n_probe)?;
    let variances = match variances {
        VarianceSource::Prior(p) => p.sigma_hat_sq.clone(),
        VarianceSource::EncodedMeans => encoded_mean_variance(params, probe_set, n_probe)?,
        VarianceSource::Unit => vec![1.0; params.latent_dim()],
    };
    let scores = relevance_scores(&weights, &variances)?;
    let active_set = select_active(&scores, threshold)?;
    Ok(RelevanceReport {
        ranking: rank_axes(&scores),
        weights,
        scores,
        active_set,
        threshold,
        n_probe: probe_set.rows().min(n_probe),
        variances,
    })
}
