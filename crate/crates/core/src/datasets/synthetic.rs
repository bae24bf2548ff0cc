use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    Linear,
    Sinusoidal,
    FactorGrid,
}

fn default_variance_range() -> [f64; 2] {
    [4.0, 1.2]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub intrinsic_dim: usize,
    pub ambient_dim: usize,
    pub samples: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// Linear kind: factor variances decrease linearly from the first to the
    /// second value across the `k` factors.
    #[serde(default = "default_variance_range")]
    pub variance_range: [f64; 2],
}

impl SyntheticSpec {
    pub fn linear(intrinsic_dim: usize, ambient_dim: usize, samples: usize, noise_std: f64, seed: u64) -> Self {
        SyntheticSpec {
            kind: SyntheticKind::Linear,
            intrinsic_dim,
            ambient_dim,
            samples,
            noise_std,
            seed,
            variance_range: default_variance_range(),
        }
    }

    pub fn sinusoidal(intrinsic_dim: usize, ambient_dim: usize, samples: usize, noise_std: f64, seed: u64) -> Self {
        SyntheticSpec {
            kind: SyntheticKind::Sinusoidal,
            ..Self::linear(intrinsic_dim, ambient_dim, samples, noise_std, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.intrinsic_dim == 0 || self.intrinsic_dim >= self.ambient_dim {
            return Err(Error::InvalidArgument(format!(
                "need 1 ≤ k < D, got k={} D={}",
                self.intrinsic_dim, self.ambient_dim
            )));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::InvalidArgument(format!("noise_std must be ≥ 0, got {}", self.noise_std)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidArgument("sample count must be positive".into()));
        }
        if self.variance_range.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument("factor variances must be positive".into()));
        }
        Ok(())
    }

    /// Per-factor variances of the linear generator.
    pub fn factor_variances(&self) -> Vec<f64> {
        let k = self.intrinsic_dim;
        let [hi, lo] = self.variance_range;
        if k == 1 {
            return vec![hi];
        }
        (0..k).map(|i| hi + (lo - hi) * i as f64 / (k - 1) as f64).collect()
    }
}

fn gaussian_matrix(rows: usize, cols: usize, sd: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
}

/// Random `[D×k]` matrix with orthonormal columns.
fn orthonormal_columns(d: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    gaussian_matrix(d, k, 1.0, rng).qr().q().columns(0, k).into_owned()
}

fn add_noise(x: &mut [f64], noise_std: f64, rng: &mut ChaCha8Rng) {
    if noise_std > 0.0 {
        let n = Normal::new(0.0, noise_std).expect("validated noise_std");
        for v in x {
            *v += n.sample(rng);
        }
    }
}

/// `x = A·u + noise`, `u ~ N(0, diag(variances))`, `A` orthonormal columns.
pub fn gen_linear_manifold(spec: &SyntheticSpec) -> Result<Tensor> {
    if spec.kind != SyntheticKind::Linear {
        return Err(Error::InvalidArgument("spec kind is not linear".into()));
    }
    spec.validate()?;
    let (k, d, n) = (spec.intrinsic_dim, spec.ambient_dim, spec.samples);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let basis = orthonormal_columns(d, k, &mut rng);
    let sds: Vec<f64> = spec.factor_variances().iter().map(|v| v.sqrt()).collect();

    let mut data = vec![0.0; n * d];
    let mut u = vec![0.0; k];
    for i in 0..n {
        for (uj, sd) in u.iter_mut().zip(&sds) {
            let e: f64 = StandardNormal.sample(&mut rng);
            *uj = sd * e;
        }
        let row = &mut data[i * d..(i + 1) * d];
        for (r, out) in row.iter_mut().enumerate() {
            *out = (0..k).map(|j| basis[(r, j)] * u[j]).sum();
        }
        add_noise(row, spec.noise_std, &mut rng);
    }
    Tensor::matrix(n, d, data)
}

/// `x_d = sin(⟨ω_d, u⟩ + φ_d) + noise`, `u ~ U(−π, π)^k`.
pub fn gen_sinusoidal_manifold(spec: &SyntheticSpec) -> Result<Tensor> {
    if spec.kind != SyntheticKind::Sinusoidal {
        return Err(Error::InvalidArgument("spec kind is not sinusoidal".into()));
    }
    spec.validate()?;
    let (k, d, n) = (spec.intrinsic_dim, spec.ambient_dim, spec.samples);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let freq = gaussian_matrix(d, k, 0.5, &mut rng);
    let phase: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();

    let pi = std::f64::consts::PI;
    let mut data = vec![0.0; n * d];
    let mut u = vec![0.0; k];
    for i in 0..n {
        for uj in &mut u {
            *uj = rng.random_range(-pi..pi);
        }
        let row = &mut data[i * d..(i + 1) * d];
        for (r, out) in row.iter_mut().enumerate() {
            let arg: f64 = (0..k).map(|j| freq[(r, j)] * u[j]).sum::<f64>() + phase[r];
            *out = arg.sin();
        }
        add_noise(row, spec.noise_std, &mut rng);
    }
    Tensor::matrix(n, d, data)
}

/// Every combination of discrete factors, embedded in `R^D`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorDataset {
    pub data: Tensor,
    /// `[N][k]` factor values.
    pub factors: Vec<Vec<usize>>,
    pub cardinalities: Vec<usize>,
}

pub const MAX_GRID_SIZE: usize = 100_000;

/// Weight of the one-hot part of the factor encoding.
const ONE_HOT_WEIGHT: f64 = 0.25;
/// Continuous coordinate weights fall linearly from the first to the last
/// factor so that factor directions differ in strength.
const CONTINUOUS_WEIGHT: [f64; 2] = [6.0, 3.5];

fn continuous_weight(factor: usize, count: usize) -> f64 {
    let [hi, lo] = CONTINUOUS_WEIGHT;
    if count == 1 {
        hi
    } else {
        hi + (lo - hi) * factor as f64 / (count - 1) as f64
    }
}

/// Full factor grid in lexicographic order. Each tuple is encoded as
/// one-hot blocks plus one centred, weighted continuous coordinate per factor, then
/// mapped to `R^D` by a fixed random linear map.
pub fn gen_factor_grid(cardinalities: &[usize], ambient_dim: usize, seed: u64) -> Result<FactorDataset> {
    if cardinalities.is_empty() || cardinalities.iter().any(|&c| c < 2) {
        return Err(Error::InvalidArgument("every factor needs at least two values".into()));
    }
    let total = cardinalities
        .iter()
        .try_fold(1usize, |acc, &c| acc.checked_mul(c).filter(|&p| p <= MAX_GRID_SIZE))
        .ok_or_else(|| Error::InvalidArgument(format!("factor grid larger than {MAX_GRID_SIZE} samples")))?;
    if ambient_dim == 0 {
        return Err(Error::InvalidArgument("ambient dimension must be positive".into()));
    }

    let features: usize = cardinalities.iter().map(|c| c + 1).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let map = gaussian_matrix(ambient_dim, features, 1.0 / (ambient_dim as f64).sqrt(), &mut rng);

    let mut factors = Vec::with_capacity(total);
    let mut data = Vec::with_capacity(total * ambient_dim);
    let mut tuple = vec![0usize; cardinalities.len()];
    let mut enc = vec![0.0; features];
    for _ in 0..total {
        enc.fill(0.0);
        let mut off = 0;
        for (j, (&c, &card)) in tuple.iter().zip(cardinalities).enumerate() {
            enc[off + c] = ONE_HOT_WEIGHT;
            enc[off + card] = continuous_weight(j, cardinalities.len()) * (c as f64 / (card - 1) as f64 - 0.5);
            off += card + 1;
        }
        for r in 0..ambient_dim {
            data.push((0..features).map(|f| map[(r, f)] * enc[f]).sum());
        }
        factors.push(tuple.clone());

        // odometer increment, last factor fastest
        for j in (0..tuple.len()).rev() {
            tuple[j] += 1;
            if tuple[j] < cardinalities[j] {
                break;
            }
            tuple[j] = 0;
        }
    }
    Ok(FactorDataset {
        data: Tensor::matrix(total, ambient_dim, data)?,
        factors,
        cardinalities: cardinalities.to_vec(),
    })
}

pub fn generate(spec: &SyntheticSpec) -> Result<Tensor> {
    match spec.kind {
        SyntheticKind::Linear => gen_linear_manifold(spec),
        SyntheticKind::Sinusoidal => gen_sinusoidal_manifold(spec),
        SyntheticKind::FactorGrid => Err(Error::InvalidArgument(
            "factor grids are built with gen_factor_grid".into(),
        )),
    }
}
