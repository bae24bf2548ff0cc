mod common;

use ardvae::model::decode;
use ardvae::nn::{mlp_jacobian, Activation};
use ardvae::relevance::{analyze, relevance_weights, select_active, VarianceSource};
use ardvae::Tensor;
use common::*;
use proptest::prelude::*;

fn decode_point(params: &ardvae::model::ModelParams, z: &[f64]) -> Vec<f64> {
    decode(params, &Tensor::matrix(1, z.len(), z.to_vec()).unwrap()).unwrap().into_data()
}

#[test]
fn decoder_jacobian_matches_central_differences() {
    for (seed, output) in [(1, Activation::None), (2, Activation::Sigmoid), (3, Activation::None)] {
        let params = ardvae::model::ModelParams::init(small_arch(5, 4, output), &mut rng(seed));
        let z = uniform_matrix(1, 4, -1.5, 1.5, &mut rng(seed + 50));
        let z = z.row(0);
        let jac = mlp_jacobian(&params.decoder, z).unwrap();
        assert_eq!(jac.shape(), &[5, 4]);
        let h = 1e-6;
        for l in 0..4 {
            let mut up = z.to_vec();
            let mut dn = z.to_vec();
            up[l] += h;
            dn[l] -= h;
            let (fu, fd) = (decode_point(&params, &up), decode_point(&params, &dn));
            for k in 0..5 {
                let numeric = (fu[k] - fd[k]) / (2.0 * h);
                let err = rel_error(jac.at(k, l), numeric, 1e-3);
                assert!(err <= 1e-4, "seed {seed} J[{k}][{l}]: {} vs {numeric}", jac.at(k, l));
            }
        }
    }
}

#[test]
fn weights_average_squared_jacobian_columns() {
    let params = small_model(5, 3, 7);
    let probe = uniform_matrix(6, 5, -1.0, 1.0, &mut rng(8));
    let w = relevance_weights(&params, &probe, 4).unwrap();
    let mut want = [0.0; 3];
    for i in 0..4 {
        let j = ardvae::relevance::jacobian_wrt_latent_mean(&params, probe.row(i)).unwrap();
        for k in 0..5 {
            for (l, acc) in want.iter_mut().enumerate() {
                *acc += j.at(k, l).powi(2) / 4.0;
            }
        }
    }
    for l in 0..3 {
        assert!((w[l] - want[l]).abs() < 1e-14);
    }
}

#[test]
fn scores_scale_with_prior_variance() {
    let params = small_model(5, 3, 9);
    let probe = uniform_matrix(20, 5, -1.0, 1.0, &mut rng(10));
    let prior = prior_with(&[1.0, 1e-6, 2.0], 200);
    let rep = analyze(&params, VarianceSource::Prior(&prior), &probe, 0.99, 100).unwrap();
    assert_eq!(rep.n_probe, 20);
    for l in 0..3 {
        assert!((rep.scores[l] - rep.weights[l] * prior.sigma_hat_sq[l]).abs() < 1e-15);
    }
    assert!(!rep.active_set.contains(&1) || rep.active_set.len() == 3);
    let all = analyze(&params, VarianceSource::Prior(&prior), &probe, 1.0, 100).unwrap();
    assert_eq!(all.active_set, vec![0, 1, 2]);
}

proptest! {
    #[test]
    fn active_set_is_the_shortest_covering_prefix(
        scores in proptest::collection::vec(0.0f64..10.0, 1..12),
        threshold in 0.05f64..1.0,
    ) {
        prop_assume!(scores.iter().sum::<f64>() > 1e-6);
        let total: f64 = scores.iter().sum();
        let active = select_active(&scores, threshold).unwrap();
        let covered: f64 = active.iter().map(|&l| scores[l]).sum();
        prop_assert!(covered >= threshold * total * (1.0 - 1e-9));
        // dropping the weakest member falls short
        let weakest = active.iter().map(|&l| scores[l]).fold(f64::INFINITY, f64::min);
        prop_assert!(covered - weakest < threshold * total * (1.0 + 1e-9));
        // every excluded axis scores no more than every included one
        for l in 0..scores.len() {
            if !active.contains(&l) {
                prop_assert!(scores[l] <= weakest);
            }
        }
    }
}
