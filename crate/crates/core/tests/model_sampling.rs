mod common;

use ardvae::model::{
    decode, encode, generate, generate_with_variances, reconstruction_loss, reparameterize, sample_latents,
    standard_normal, ModelParams, PosteriorParams,
};
use ardvae::nn::{Activation, LinearLayer};
use ardvae::trainer::build_latent_dataset_seeded;
use ardvae::Tensor;
use common::*;

fn tanh_layer(l: &LinearLayer, x: &[f64]) -> Vec<f64> {
    let (out, inp) = (l.output_dim(), l.input_dim());
    (0..out)
        .map(|o| {
            let a: f64 = (0..inp).map(|i| l.weight.at(o, i) * x[i]).sum::<f64>() + l.bias.data()[o];
            l.activation.apply(a)
        })
        .collect()
}

#[test]
fn encoder_matches_straight_line_oracle() {
    let params = small_model(5, 3, 8);
    let x = uniform_matrix(4, 5, -2.0, 2.0, &mut rng(9));
    let post = encode(&params, &x).unwrap();
    for i in 0..4 {
        let mut h = x.row(i).to_vec();
        for l in &params.encoder {
            h = tanh_layer(l, &h);
        }
        let mu = tanh_layer(&params.mu_head, &h);
        let raw = tanh_layer(&params.sigma_head, &h);
        for l in 0..3 {
            assert!((post.mu.at(i, l) - mu[l]).abs() < 1e-12);
            let var = (1.0 + raw[l].exp()).ln() + 1e-8;
            assert!((post.sigma_sq.at(i, l) - var).abs() < 1e-12);
        }
    }
}

fn zero_model(d: usize, l: usize) -> ModelParams {
    let mut p = small_model(d, l, 1);
    for t in p.parameters_mut() {
        t.data_mut().fill(0.0);
    }
    p
}

#[test]
fn zero_weights_give_softplus_of_zero() {
    let post = encode(&zero_model(4, 3), &uniform_matrix(2, 4, -1.0, 1.0, &mut rng(2))).unwrap();
    assert!(post.mu.data().iter().all(|&m| m == 0.0));
    let want = 2f64.ln() + 1e-8;
    assert!(post.sigma_sq.data().iter().all(|&v| (v - want).abs() < 1e-15));
}

#[test]
fn encoding_is_batch_independent() {
    let params = small_model(4, 2, 3);
    let row = uniform_matrix(1, 4, -1.0, 1.0, &mut rng(4));
    let pair = Tensor::from_rows(&[row.row(0).to_vec(), row.row(0).to_vec()]).unwrap();
    let a = encode(&params, &row).unwrap();
    let b = encode(&params, &pair).unwrap();
    assert_eq!(a.mu.row(0), b.mu.row(0));
    assert_eq!(a.sigma_sq.row(0), b.sigma_sq.row(0));
}

#[test]
fn reparameterized_samples_have_posterior_moments() {
    let n = 100_000;
    let (mu, var) = (0.7, 0.3);
    let post = PosteriorParams {
        mu: Tensor::full(&[n, 1], mu),
        sigma_sq: Tensor::full(&[n, 1], var),
    };
    let z = reparameterize(&post, &standard_normal(n, 1, &mut rng(5))).unwrap();
    let (m, v) = column_stats(&z, 0);
    let se_mean = (var / n as f64).sqrt();
    let se_var = var * (2.0 / (n as f64 - 1.0)).sqrt();
    assert!((m - mu).abs() <= 3.0 * se_mean, "{m}");
    assert!((v - var).abs() <= 3.0 * se_var, "{v}");

    let zero = reparameterize(&post, &Tensor::zeros(&[n, 1])).unwrap();
    assert!(zero.data().iter().all(|&v| v == mu));
}

#[test]
fn reconstruction_matches_elementwise_oracle() {
    let mut r = rng(6);
    let x = uniform_matrix(7, 3, -1.0, 1.0, &mut r);
    let y = uniform_matrix(7, 3, -1.0, 1.0, &mut r);
    let mut want = 0.0;
    for i in 0..7 {
        for j in 0..3 {
            want += 0.5 * (x.at(i, j) - y.at(i, j)).powi(2);
        }
    }
    want /= 7.0;
    assert!((reconstruction_loss(&x, &y).unwrap() - want).abs() < 1e-14);
    let single = reconstruction_loss(&Tensor::zeros(&[1, 1]), &Tensor::full(&[1, 1], 2.0)).unwrap();
    assert_eq!(single, 2.0);
}

#[test]
fn latent_draws_have_prior_covariance() {
    let var = [0.5, 2.0, 0.01];
    let n = 100_000;
    let z = sample_latents(&var, &[0, 1, 2], n, 11);
    for (l, &v) in var.iter().enumerate() {
        let (m, got) = column_stats(&z, l);
        assert!(m.abs() <= 4.0 * (v / n as f64).sqrt());
        assert!((got - v).abs() <= 4.0 * v * (2.0 / n as f64).sqrt(), "axis {l}: {got}");
    }
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let cov = (0..n).map(|i| z.at(i, a) * z.at(i, b)).sum::<f64>() / n as f64;
        let se = (var[a] * var[b] / n as f64).sqrt();
        assert!(cov.abs() <= 4.0 * se, "({a},{b}): {cov}");
    }
}

#[test]
fn generation_is_seeded_and_ignores_inactive_axes() {
    let params = small_model(4, 3, 12);
    let prior = prior_with(&[1.0, 0.5, 2.0], 100);
    let a = generate(&params, &prior, &[0, 2], 50, 3).unwrap();
    assert_eq!(a, generate(&params, &prior, &[0, 2], 50, 3).unwrap());
    assert!(generate(&params, &prior, &[], 5, 3).is_err());
    assert!(generate(&params, &prior, &[3], 5, 3).is_err());

    // with a linear decoder an inactive axis contributes nothing
    let mut lin = params.clone();
    let w = uniform_matrix(4, 3, -1.0, 1.0, &mut rng(13));
    lin.decoder = vec![LinearLayer::from_parts(w.clone(), Tensor::zeros(&[4]), Activation::None).unwrap()];
    let mut w2 = w.clone();
    for k in 0..4 {
        w2.row_mut(k)[1] = 100.0;
    }
    let mut lin2 = lin.clone();
    lin2.decoder = vec![LinearLayer::from_parts(w2, Tensor::zeros(&[4]), Activation::None).unwrap()];
    let g1 = generate_with_variances(&lin, &prior.sigma_hat_sq, &[0, 2], 20, 4).unwrap();
    let g2 = generate_with_variances(&lin2, &prior.sigma_hat_sq, &[0, 2], 20, 4).unwrap();
    assert_eq!(g1, g2);
    let z = sample_latents(&prior.sigma_hat_sq, &[0, 2], 20, 4);
    assert_eq!(decode(&lin, &z).unwrap(), g1);
}

#[test]
fn latent_dataset_rows_follow_encoder_posterior() {
    let n = 20_000;
    let x = uniform_matrix(n, 4, -1.0, 1.0, &mut rng(14));
    let params = zero_model(4, 3);
    let dz = build_latent_dataset_seeded(&params, &x, 15).unwrap();
    assert_eq!(dz.shape(), &[n, 3]);
    assert_eq!(dz, build_latent_dataset_seeded(&params, &x, 15).unwrap());
    let var = 2f64.ln() + 1e-8;
    for l in 0..3 {
        let (m, v) = column_stats(&dz, l);
        assert!(m.abs() <= 4.0 * (var / n as f64).sqrt(), "axis {l} mean {m}");
        assert!((v - var).abs() <= 4.0 * var * (2.0 / n as f64).sqrt(), "axis {l} var {v}");
    }
}
