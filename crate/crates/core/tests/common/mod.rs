#![allow(dead_code)]

use ardvae::model::{Architecture, ModelParams};
use ardvae::nn::Activation;
use ardvae::prior::{GammaPosterior, LatentPrior};
use ardvae::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_arch(input_dim: usize, latent_dim: usize, output: Activation) -> Architecture {
    Architecture {
        input_dim,
        latent_dim,
        encoder_hidden: vec![7, 5],
        decoder_hidden: vec![6],
        hidden_activation: Activation::Tanh,
        output_activation: output,
    }
}

pub fn small_model(input_dim: usize, latent_dim: usize, seed: u64) -> ModelParams {
    ModelParams::init(small_arch(input_dim, latent_dim, Activation::None), &mut rng(seed))
}

pub fn uniform_matrix(rows: usize, cols: usize, lo: f64, hi: f64, r: &mut ChaCha8Rng) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| r.random_range(lo..hi)).collect()).unwrap()
}

/// Prior with `n` samples per axis and the given estimated variances.
pub fn prior_with(variances: &[f64], n: usize) -> LatentPrior {
    let mut g = GammaPosterior::uninformative(variances.len());
    g.n = n;
    g.shape = vec![n as f64 / 2.0; variances.len()];
    g.rate = variances.iter().map(|v| v * n as f64 / 2.0).collect();
    LatentPrior::from_gamma(g).unwrap()
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Central differences of `loss` over every model parameter, compared with
/// `analytic` (in `ModelParams::parameters` order). Returns the worst
/// relative error.
pub fn finite_difference_max_error(
    params: &ModelParams,
    analytic: &[Tensor],
    step: f64,
    loss: impl Fn(&ModelParams) -> f64,
) -> f64 {
    let base: Vec<Tensor> = params.parameters().into_iter().cloned().collect();
    assert_eq!(base.len(), analytic.len());
    let mut worst: f64 = 0.0;
    for (p, grad) in analytic.iter().enumerate() {
        for k in 0..base[p].len() {
            let mut plus = base.clone();
            plus[p].data_mut()[k] += step;
            let mut minus = base.clone();
            minus[p].data_mut()[k] -= step;
            let fp = loss(&params.with_parameters(plus).unwrap());
            let fm = loss(&params.with_parameters(minus).unwrap());
            let numeric = (fp - fm) / (2.0 * step);
            worst = worst.max(rel_error(grad.data()[k], numeric, 1e-3));
        }
    }
    worst
}

/// Adaptive Simpson quadrature.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// Sample mean and variance of a column.
pub fn column_stats(x: &Tensor, col: usize) -> (f64, f64) {
    let n = x.rows() as f64;
    let mean = (0..x.rows()).map(|i| x.at(i, col)).sum::<f64>() / n;
    let var = (0..x.rows()).map(|i| (x.at(i, col) - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
