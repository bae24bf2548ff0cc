mod common;

use ardvae::model::{ard_loss, loss_and_gradients, loss_with_target, standard_normal, vanilla_loss, KlTarget, ModelParams};
use ardvae::nn::{mlp_forward_taped, Activation, LinearLayer};
use ardvae::tensor::gradient_check;
use ardvae::Tensor;
use common::*;
use rand::Rng;

fn instance(seed: u64, output: Activation) -> (ModelParams, Tensor, Tensor, Vec<f64>) {
    let mut r = rng(seed);
    let (d, l, batch) = (4, 3, 5);
    let params = ModelParams::init(small_arch(d, l, output), &mut r);
    let x = uniform_matrix(batch, d, -1.5, 1.5, &mut r);
    let noise = standard_normal(batch, l, &mut r);
    let variances: Vec<f64> = (0..l).map(|_| r.random_range(0.05..3.0)).collect();
    (params, x, noise, variances)
}

#[test]
fn ard_loss_gradients_match_finite_differences() {
    for seed in 0..5 {
        let (params, x, noise, var) = instance(seed, Activation::None);
        let prior = prior_with(&var, 1000);
        let beta = 0.5 + seed as f64 * 0.25;
        let (parts, grads) = loss_and_gradients(&params, &x, &noise, KlTarget::Gaussian(&prior.sigma_hat_sq), beta).unwrap();
        assert_eq!(parts, ard_loss(&params, &prior, &x, &noise, beta).unwrap());
        let err = finite_difference_max_error(&params, &grads, 1e-5, |p| {
            ard_loss(p, &prior, &x, &noise, beta).unwrap().total
        });
        assert!(err <= 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn vanilla_loss_gradients_match_finite_differences() {
    for seed in 10..13 {
        let (params, x, noise, _) = instance(seed, Activation::Sigmoid);
        let (_, grads) = loss_and_gradients(&params, &x, &noise, KlTarget::StandardNormal, 1.0).unwrap();
        let err = finite_difference_max_error(&params, &grads, 1e-5, |p| vanilla_loss(p, &x, &noise, 1.0).unwrap().total);
        assert!(err <= 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn sampled_student_t_gradients_match_finite_differences() {
    let (params, x, noise, var) = instance(21, Activation::None);
    let prior = prior_with(&var, 40);
    let (_, grads) = loss_and_gradients(&params, &x, &noise, KlTarget::StudentT(&prior), 0.7).unwrap();
    let err = finite_difference_max_error(&params, &grads, 1e-5, |p| {
        loss_with_target(p, &x, &noise, KlTarget::StudentT(&prior), 0.7).unwrap().total
    });
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn mlp_gradients_pass_tape_gradcheck() {
    let mut r = rng(3);
    let layers = vec![
        LinearLayer::init(3, 6, Activation::Tanh, &mut r),
        LinearLayer::init(6, 4, Activation::Relu, &mut r),
        LinearLayer::init(4, 2, Activation::Sigmoid, &mut r),
    ];
    let x = uniform_matrix(4, 3, -1.0, 1.0, &mut r);
    let mut leaves = vec![x];
    for l in &layers {
        leaves.push(l.weight.clone());
        leaves.push(l.bias.clone());
    }
    let acts = [Activation::Tanh, Activation::Relu, Activation::Sigmoid];
    let report = gradient_check(
        |tape, v| {
            let rebuilt: Vec<LinearLayer> = (0..3)
                .map(|i| {
                    LinearLayer::from_parts(tape.value(v[1 + 2 * i]).clone(), tape.value(v[2 + 2 * i]).clone(), acts[i]).unwrap()
                })
                .collect();
            let vars: Vec<_> = (0..3)
                .map(|i| ardvae::nn::LayerVars {
                    weight: v[1 + 2 * i],
                    bias: v[2 + 2 * i],
                })
                .collect();
            let out = mlp_forward_taped(tape, &rebuilt, &vars, v[0])?;
            let sq = tape.square(out)?;
            tape.sum(sq)
        },
        &leaves,
        1e-6,
        1e-6,
    )
    .unwrap();
    assert!(report.passed(), "max rel error {}", report.max_rel_error());
}

#[test]
fn zero_beta_leaves_reconstruction_only() {
    let (params, x, noise, var) = instance(30, Activation::None);
    let prior = prior_with(&var, 100);
    let parts = ard_loss(&params, &prior, &x, &noise, 0.0).unwrap();
    assert_eq!(parts.total, parts.recon);
    assert!(parts.kl >= 0.0);
}
