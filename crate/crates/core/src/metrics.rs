use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const COVARIANCE_RIDGE: f64 = 1e-6;
pub const DEFAULT_MIG_BINS: usize = 20;

pub fn mse_per_element(x: &Tensor, x_hat: &Tensor) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(Error::ShapeMismatch {
            op: "mse_per_element",
            left: x.shape().to_vec(),
            right: x_hat.shape().to_vec(),
        });
    }
    let sse: f64 = x.data().iter().zip(x_hat.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sse / x.len() as f64)
}

/// Sample mean and unbiased sample covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianFit {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub samples: usize,
}

impl GaussianFit {
    pub fn fit(x: &Tensor) -> Result<Self> {
        x.expect_rank2("GaussianFit::fit")?;
        let (n, d) = (x.rows(), x.cols());
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        let m = DMatrix::from_row_slice(n, d, x.data());
        let mean = m.row_mean().transpose();
        let mut centred = m;
        for mut row in centred.row_iter_mut() {
            row -= mean.transpose();
        }
        let mut covariance = centred.tr_mul(&centred) / (n - 1) as f64;
        // exact symmetry regardless of summation order
        covariance = (&covariance + covariance.transpose()) * 0.5;
        Ok(GaussianFit { mean, covariance, samples: n })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrechetResult {
    pub distance: f64,
    pub warning: Option<String>,
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Squared 2-Wasserstein distance between two Gaussian fits, each
/// covariance regularized by `COVARIANCE_RIDGE·I`.
pub fn frechet_between(a: &GaussianFit, b: &GaussianFit) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            op: "frechet_gaussian",
            left: vec![a.dim()],
            right: vec![b.dim()],
        });
    }
    let d = a.dim();
    let ridge = DMatrix::<f64>::identity(d, d) * COVARIANCE_RIDGE;
    let sa = &a.covariance + &ridge;
    let sb = &b.covariance + &ridge;
    let root_a = sym_sqrt(&sa);
    let mut cross = &root_a * &sb * &root_a;
    cross = (&cross + cross.transpose()) * 0.5;
    let cross_trace: f64 = SymmetricEigen::new(cross)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let dist = mean_term + sa.trace() + sb.trace() - 2.0 * cross_trace;
    if !dist.is_finite() {
        return Err(Error::NonFinite { op: "frechet_gaussian" });
    }
    Ok(dist.max(0.0))
}

pub fn frechet_gaussian(a: &Tensor, b: &Tensor) -> Result<FrechetResult> {
    let fa = GaussianFit::fit(a)?;
    let fb = GaussianFit::fit(b)?;
    let distance = frechet_between(&fa, &fb)?;
    let need = fa.dim() + 1;
    let warning = (fa.samples < need || fb.samples < need).then(|| {
        format!(
            "fewer than D+1={need} samples ({} and {}); covariance estimates are rank deficient",
            fa.samples, fb.samples
        )
    });
    Ok(FrechetResult { distance, warning })
}

/// Equal-frequency bin labels. Tied values share the bin of their first
/// rank, so any strictly increasing transform leaves the labels unchanged.
pub fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut labels = vec![0; n];
    let mut first_rank = 0;
    for (rank, &i) in order.iter().enumerate() {
        if rank > 0 && values[i] != values[order[rank - 1]] {
            first_rank = rank;
        }
        labels[i] = first_rank * bins / n;
    }
    labels
}

fn entropy(labels: &[usize], card: usize) -> f64 {
    let n = labels.len() as f64;
    let mut counts = vec![0usize; card];
    for &l in labels {
        counts[l] += 1;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn mutual_information(a: &[usize], card_a: usize, b: &[usize], card_b: usize) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0usize; card_a * card_b];
    let mut ma = vec![0usize; card_a];
    let mut mb = vec![0usize; card_b];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * card_b + y] += 1;
        ma[x] += 1;
        mb[y] += 1;
    }
    let mut mi = 0.0;
    for x in 0..card_a {
        for y in 0..card_b {
            let c = joint[x * card_b + y];
            if c > 0 {
                let pxy = c as f64 / n;
                mi += pxy * (c as f64 * n / (ma[x] as f64 * mb[y] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MigResult {
    /// `[k][L]` mutual information in nats.
    pub mutual_information: Vec<Vec<f64>>,
    pub factor_entropy: Vec<f64>,
    /// Normalized gap per factor; `None` for excluded constant factors.
    pub gaps: Vec<Option<f64>>,
    pub mig: f64,
    pub warnings: Vec<String>,
}

pub fn mig(latent_means: &Tensor, factors: &[Vec<usize>], bins: usize) -> Result<MigResult> {
    latent_means.expect_rank2("mig")?;
    let (n, l) = (latent_means.rows(), latent_means.cols());
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("mig needs at least 2 bins, got {bins}")));
    }
    if factors.len() != n {
        return Err(Error::ShapeMismatch {
            op: "mig",
            left: vec![n, l],
            right: vec![factors.len()],
        });
    }
    let k = factors.first().map_or(0, Vec::len);
    if k == 0 || factors.iter().any(|f| f.len() != k) {
        return Err(Error::InvalidArgument("factor rows must be non-empty and equal length".into()));
    }

    let latent_bins: Vec<Vec<usize>> = (0..l)
        .map(|j| {
            let col: Vec<f64> = (0..n).map(|i| latent_means.at(i, j)).collect();
            equal_frequency_bins(&col, bins)
        })
        .collect();

    let mut mi_matrix = Vec::with_capacity(k);
    let mut factor_entropy = Vec::with_capacity(k);
    let mut gaps = Vec::with_capacity(k);
    let mut warnings = Vec::new();
    for f in 0..k {
        // relabel factor values densely
        let mut values: Vec<usize> = factors.iter().map(|r| r[f]).collect();
        let mut distinct = values.clone();
        distinct.sort_unstable();
        distinct.dedup();
        for v in &mut values {
            *v = distinct.binary_search(v).expect("value is present");
        }
        let card = distinct.len();
        let h = entropy(&values, card);
        let row: Vec<f64> = latent_bins
            .iter()
            .map(|lb| mutual_information(&values, card, lb, bins))
            .collect();
        if card < 2 {
            warnings.push(format!("factor {f} is constant and was excluded"));
            gaps.push(None);
        } else {
            let mut sorted = row.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let second = sorted.get(1).copied().unwrap_or(0.0);
            gaps.push(Some((sorted[0] - second) / h));
        }
        factor_entropy.push(h);
        mi_matrix.push(row);
    }
    let used: Vec<f64> = gaps.iter().flatten().copied().collect();
    if used.is_empty() {
        return Err(Error::InvalidArgument("every factor is constant".into()));
    }
    let mig = used.iter().sum::<f64>() / used.len() as f64;
    Ok(MigResult {
        mutual_information: mi_matrix,
        factor_entropy,
        gaps,
        mig,
        warnings,
    })
}
