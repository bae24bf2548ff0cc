//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line straight to stdout so the summary survives output capture.
//!
//! The training benchmarks take several minutes each; tests share them and
//! run one at a time.

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use ardvae::cli::{cmd_relevance, cmd_train, DataConfig, RunConfig, RunSection, CHECKPOINT_FILE, EPOCHS_FILE, RELEVANCE_FILE};
use ardvae::datasets::{gen_factor_grid, gen_linear_manifold, SyntheticSpec};
use ardvae::metrics::{frechet_gaussian, mig, DEFAULT_MIG_BINS};
use ardvae::model::{ard_loss, encode, generate_with_variances, loss_and_gradients, standard_normal, Architecture, KlTarget, ModelParams};
use ardvae::nn::Activation;
use ardvae::prior::{kl_gaussian_approx, student_t_logpdf};
use ardvae::relevance::{analyze, VarianceSource, DEFAULT_PROBES, DEFAULT_THRESHOLD};
use ardvae::trainer::{train, ModelKind, TrainConfig, TrainOutcome};
use ardvae::Tensor;
use common::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const BETA: f64 = 0.5;
const EPOCHS: usize = 40;
const MAX_RUN_SECONDS: f64 = 600.0;

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(criterion: usize, pass: bool, detail: &str) {
    let line = format!("criterion {criterion}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn linear_benchmark() -> &'static Tensor {
    static DATA: OnceLock<Tensor> = OnceLock::new();
    DATA.get_or_init(|| gen_linear_manifold(&SyntheticSpec::linear(6, 64, 20_000, 0.01, 0)).unwrap())
}

struct BenchRun {
    outcome: TrainOutcome,
    seconds: f64,
    active: Vec<usize>,
}

fn bench_run(latent_dim: usize, alpha_subset_size: Option<usize>) -> BenchRun {
    let data = linear_benchmark();
    let mut config = TrainConfig::new(BETA, latent_dim);
    config.epochs = EPOCHS;
    if let Some(a) = alpha_subset_size {
        config.alpha_subset_size = a;
    }
    let start = Instant::now();
    let outcome = train(&config, data).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let probe = data.select_rows(&outcome.val_indices);
    let prior = outcome.prior.as_ref().expect("relevance-prior run");
    let active = analyze(&outcome.params, VarianceSource::Prior(prior), &probe, DEFAULT_THRESHOLD, DEFAULT_PROBES)
        .unwrap()
        .active_set;
    BenchRun { outcome, seconds, active }
}

fn latent_run(latent_dim: usize) -> &'static BenchRun {
    static L10: OnceLock<BenchRun> = OnceLock::new();
    static L15: OnceLock<BenchRun> = OnceLock::new();
    static L20: OnceLock<BenchRun> = OnceLock::new();
    let cell = match latent_dim {
        10 => &L10,
        15 => &L15,
        20 => &L20,
        _ => unreachable!(),
    };
    cell.get_or_init(|| bench_run(latent_dim, None))
}

#[test]
fn criterion_1_intrinsic_dimension_recovery() {
    let _g = serial();
    let mut pass = true;
    let mut parts = Vec::new();
    for l in [10, 15, 20] {
        let run = latent_run(l);
        let n = run.active.len();
        pass &= (5..=7).contains(&n) && run.seconds <= MAX_RUN_SECONDS;
        parts.push(format!("L={l}: {n} active in {:.0}s", run.seconds));
    }
    report(1, pass, &format!("(want 6±1, ≤{MAX_RUN_SECONDS:.0}s) {}", parts.join(", ")));
    assert!(pass, "{}", parts.join(", "));
}

#[test]
fn criterion_2_latent_size_insensitivity() {
    let _g = serial();
    let (a, b) = (latent_run(10).active.len(), latent_run(20).active.len());
    let pass = a.abs_diff(b) <= 1;
    report(2, pass, &format!("(want |Δ| ≤ 1) L=10: {a}, L=20: {b}"));
    assert!(pass);
}

#[test]
fn criterion_3_alpha_subset_ablation() {
    let _g = serial();
    let counts: Vec<(usize, usize)> = [500, 1000, 2000]
        .into_iter()
        .map(|a| {
            let run = bench_run(10, Some(a));
            assert_eq!(run.outcome.alpha_size, a);
            (a, run.active.len())
        })
        .collect();
    let lo = counts.iter().map(|c| c.1).min().unwrap();
    let hi = counts.iter().map(|c| c.1).max().unwrap();
    let pass = hi - lo <= 1;
    report(3, pass, &format!("(want spread ≤ 1) {counts:?}"));
    assert!(pass);
}

#[test]
fn criterion_4_gradient_integrity() {
    let _g = serial();
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut r = rng(1000 + seed);
        let (d, l, batch) = (6, 4, 8);
        let arch = Architecture {
            input_dim: d,
            latent_dim: l,
            encoder_hidden: vec![9, 7],
            decoder_hidden: vec![7, 9],
            hidden_activation: Activation::Tanh,
            output_activation: if seed % 2 == 0 { Activation::None } else { Activation::Sigmoid },
        };
        let params = ModelParams::init(arch, &mut r);
        let x = uniform_matrix(batch, d, -1.0, 1.0, &mut r);
        let noise = standard_normal(batch, l, &mut r);
        let variances: Vec<f64> = (0..l).map(|_| r.random_range(0.01..4.0)).collect();
        let prior = prior_with(&variances, 1000);
        let (_, grads) = loss_and_gradients(&params, &x, &noise, KlTarget::Gaussian(&prior.sigma_hat_sq), BETA).unwrap();
        let err = finite_difference_max_error(&params, &grads, 1e-5, |p| ard_loss(p, &prior, &x, &noise, BETA).unwrap().total);
        worst = worst.max(err);
    }
    let pass = worst <= 1e-4;
    report(4, pass, &format!("(want ≤ 1e-4) worst relative error {worst:.2e} over 20 instances"));
    assert!(pass);
}

#[test]
fn criterion_5_kl_matches_monte_carlo() {
    let _g = serial();
    let samples = 1_000_000;
    let mut r = rng(5);
    let mut worst_z: f64 = 0.0;
    let mut misses = 0;
    for _ in 0..50 {
        let mu: f64 = r.random_range(-2.0..2.0);
        let var: f64 = r.random_range(0.05..3.0);
        let prior_var: f64 = r.random_range(0.05..3.0);
        let sd = var.sqrt();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            let e: f64 = StandardNormal.sample(&mut r);
            let z = mu + sd * e;
            // log q(z) - log p(z)
            let f = -0.5 * var.ln() - 0.5 * e * e + 0.5 * prior_var.ln() + 0.5 * z * z / prior_var;
            sum += f;
            sum_sq += f * f;
        }
        let n = samples as f64;
        let mean = sum / n;
        let se = ((sum_sq / n - mean * mean) * n / (n - 1.0) / n).sqrt();
        let kl = kl_gaussian_approx(&[mu], &[var], &[prior_var]).unwrap();
        let z = (kl - mean).abs() / se;
        worst_z = worst_z.max(z);
        if z > 3.0 {
            misses += 1;
        }
    }
    let pass = misses == 0;
    report(5, pass, &format!("(want all within 3 SE) {misses} of 50 outside, worst {worst_z:.2} SE"));
    assert!(pass);
}

#[test]
fn criterion_6_student_t_density() {
    let _g = serial();
    let mut worst_mass: f64 = 0.0;
    for n in [10, 100, 10_000] {
        for var in [0.01, 1.0, 25.0] {
            let prior = prior_with(&[var], n);
            let s = var.sqrt();
            let mass = integrate(&|z| student_t_logpdf(&[z], &prior).unwrap().exp(), -50.0 * s, 50.0 * s, 1e-10);
            worst_mass = worst_mass.max((mass - 1.0).abs());
        }
    }
    let mut worst_gap: f64 = 0.0;
    for var in [0.25, 1.0, 4.0] {
        let prior = prior_with(&[var], 10_000);
        let s = var.sqrt();
        for i in 0..=20_000 {
            let z = -10.0 * s + i as f64 * 1e-3 * s;
            let t = student_t_logpdf(&[z], &prior).unwrap().exp();
            let normal = (-0.5 * z * z / var).exp() / (2.0 * PI * var).sqrt();
            worst_gap = worst_gap.max((t - normal).abs());
        }
    }
    let pass = worst_mass <= 1e-6 && worst_gap <= 1e-3;
    report(6, pass, &format!("(want mass err ≤ 1e-6, gap ≤ 1e-3) mass err {worst_mass:.2e}, gap at ν=1e4 {worst_gap:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_7_pruning_information_loss() {
    let _g = serial();
    let run = latent_run(15);
    let data = linear_benchmark();
    let val = data.select_rows(&run.outcome.val_indices);
    let prior = run.outcome.prior.as_ref().unwrap();
    let all: Vec<usize> = (0..15).collect();
    let count = 10_000;
    let active = generate_with_variances(&run.outcome.params, &prior.sigma_hat_sq, &run.active, count, 7).unwrap();
    let full = generate_with_variances(&run.outcome.params, &prior.sigma_hat_sq, &all, count, 7).unwrap();
    let f_active = frechet_gaussian(&active, &val).unwrap().distance;
    let f_all = frechet_gaussian(&full, &val).unwrap().distance;
    let rel = (f_active - f_all) / f_all;
    let pass = rel <= 0.10;
    report(
        7,
        pass,
        &format!("(want ≤ 10%) active-only {f_active:.4} vs all {f_all:.4}, relative excess {:.1}%", rel * 100.0),
    );
    assert!(pass);
}

#[test]
fn criterion_8_variance_spread() {
    let _g = serial();
    let run = latent_run(15);
    let (lo, hi) = run.outcome.prior.as_ref().unwrap().variance_spread();
    let ratio = hi / lo;
    let pass = ratio >= 100.0;
    report(8, pass, &format!("(want ≥ 100) max/min estimated variance {ratio:.2} ({lo:.3e} .. {hi:.3e})"));
    assert!(pass, "ratio {ratio}");
}

#[test]
fn criterion_9_disentanglement_direction() {
    let _g = serial();
    let grid = gen_factor_grid(&[8, 8, 8], 32, 0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in 0..3 {
        let mut scores = [0.0; 2];
        for (slot, kind) in [ModelKind::Ard, ModelKind::Vanilla].into_iter().enumerate() {
            let mut config = TrainConfig::new(BETA, 10);
            config.kind = kind;
            config.epochs = 150;
            config.batch_size = 32;
            config.seed = seed;
            let outcome = train(&config, &grid.data).unwrap();
            let latents = encode(&outcome.params, &grid.data).unwrap().mu;
            scores[slot] = mig(&latents, &grid.factors, DEFAULT_MIG_BINS).unwrap().mig;
        }
        pass &= scores[0] >= scores[1];
        parts.push(format!("seed {seed}: {:.3} vs {:.3}", scores[0], scores[1]));
    }
    report(9, pass, &format!("(want relevance-prior MIG ≥ fixed-prior MIG) {}", parts.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_10_determinism() {
    let _g = serial();
    let mut train_config = TrainConfig::new(BETA, 6);
    train_config.epochs = 5;
    train_config.alpha_subset_size = 400;
    train_config.encoder_hidden = vec![32];
    train_config.decoder_hidden = vec![32];
    train_config.seed = 10;
    let config = RunConfig {
        run: RunSection::default(),
        data: DataConfig::Linear {
            intrinsic_dim: 3,
            ambient_dim: 16,
            samples: 3000,
            noise_std: 0.01,
            seed: 10,
            variance_range: [4.0, 1.2],
        },
        train: train_config,
    };
    let data = config.data.load().unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let outputs: Vec<(Vec<u8>, Vec<u8>)> = ["a", "b"]
        .iter()
        .map(|name| {
            let dir = tmp.path().join(name);
            cmd_train(&config, &dir).unwrap();
            cmd_relevance(&dir.join(CHECKPOINT_FILE), &data.x, DEFAULT_THRESHOLD, DEFAULT_PROBES, &dir).unwrap();
            (
                std::fs::read(dir.join(EPOCHS_FILE)).unwrap(),
                std::fs::read(dir.join(RELEVANCE_FILE)).unwrap(),
            )
        })
        .collect();
    let epochs_same = outputs[0].0 == outputs[1].0;
    let relevance_same = outputs[0].1 == outputs[1].1;
    let pass = epochs_same && relevance_same;
    report(
        10,
        pass,
        &format!("(want bit-identical) epochs.csv identical: {epochs_same}, relevance report identical: {relevance_same}"),
    );
    assert!(pass);
}
