mod common;

use ardvae::datasets::{gen_factor_grid, gen_linear_manifold, gen_sinusoidal_manifold, SyntheticSpec};
use ardvae::Tensor;
use nalgebra::DMatrix;

fn to_matrix(x: &Tensor) -> DMatrix<f64> {
    DMatrix::from_row_slice(x.rows(), x.cols(), x.data())
}

fn centred(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = m.row_mean();
    let mut c = m.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    c
}

fn singular_values(x: &Tensor) -> Vec<f64> {
    let mut s: Vec<f64> = centred(&to_matrix(x)).svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[test]
fn noiseless_linear_data_has_rank_k() {
    let x = gen_linear_manifold(&SyntheticSpec::linear(6, 64, 2000, 0.0, 1)).unwrap();
    let s = singular_values(&x);
    assert!(s[5] > 1e-3 * s[0]);
    assert!(s[6] < 1e-10 * s[0], "{}", s[6]);
}

#[test]
fn small_noise_leaves_a_clear_spectral_gap() {
    for noise in [1e-4, 1e-5] {
        let x = gen_linear_manifold(&SyntheticSpec::linear(6, 64, 3000, noise, 2)).unwrap();
        let s = singular_values(&x);
        assert!(s[5] / s[6] > 1e3, "noise {noise}: {}", s[5] / s[6]);
    }
}

#[test]
fn linear_total_variance_matches_factor_variances() {
    let spec = SyntheticSpec::linear(6, 32, 20_000, 0.01, 3);
    let x = gen_linear_manifold(&spec).unwrap();
    let total: f64 = (0..x.cols()).map(|j| common::column_stats(&x, j).1).sum();
    let want: f64 = spec.factor_variances().iter().sum::<f64>() + 32.0 * 0.01 * 0.01;
    assert!((total - want).abs() / want < 0.05, "{total} vs {want}");
}

#[test]
fn sinusoidal_manifold_is_locally_two_dimensional() {
    let x = gen_sinusoidal_manifold(&SyntheticSpec::sinusoidal(2, 16, 20_000, 0.0, 4)).unwrap();
    let neighbours = 40;
    let mut flat = 0;
    for a in 0..20 {
        let anchor = x.row(a * 997);
        let mut dist: Vec<(f64, usize)> = (0..x.rows())
            .map(|i| (x.row(i).iter().zip(anchor).map(|(p, q)| (p - q) * (p - q)).sum(), i))
            .collect();
        dist.sort_by(|p, q| p.0.total_cmp(&q.0));
        let idx: Vec<usize> = dist[..neighbours].iter().map(|d| d.1).collect();
        let s = singular_values(&x.select_rows(&idx));
        let energy: Vec<f64> = s.iter().map(|v| v * v).collect();
        let total: f64 = energy.iter().sum();
        if (energy[0] + energy[1]) / total >= 0.99 {
            flat += 1;
        }
    }
    assert!(flat >= 18, "{flat} of 20 neighbourhoods are two-dimensional");
}

#[test]
fn factor_grid_enumerates_every_tuple_with_distinct_rows() {
    let g = gen_factor_grid(&[3, 4, 2], 10, 5).unwrap();
    assert_eq!(g.data.shape(), &[24, 10]);
    assert_eq!(g.factors[0], vec![0, 0, 0]);
    assert_eq!(g.factors[1], vec![0, 0, 1]);
    assert_eq!(g.factors[23], vec![2, 3, 1]);
    let mut seen = g.factors.clone();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 24);
    for i in 0..24 {
        for j in i + 1..24 {
            let d: f64 = g.data.row(i).iter().zip(g.data.row(j)).map(|(a, b)| (a - b).abs()).sum();
            assert!(d > 1e-6, "rows {i} and {j} coincide");
        }
    }
    assert!(gen_factor_grid(&[1, 3], 4, 0).is_err());
    assert!(gen_factor_grid(&[1000, 1000], 4, 0).is_err());
}

#[test]
fn generators_are_deterministic_per_seed() {
    let spec = SyntheticSpec::linear(3, 8, 100, 0.1, 7);
    assert_eq!(gen_linear_manifold(&spec).unwrap(), gen_linear_manifold(&spec).unwrap());
    let other = SyntheticSpec { seed: 8, ..spec.clone() };
    assert_ne!(gen_linear_manifold(&spec).unwrap(), gen_linear_manifold(&other).unwrap());
    let sin = SyntheticSpec::sinusoidal(2, 6, 50, 0.0, 1);
    assert_eq!(gen_sinusoidal_manifold(&sin).unwrap(), gen_sinusoidal_manifold(&sin).unwrap());
    assert_eq!(gen_factor_grid(&[2, 3], 5, 1).unwrap(), gen_factor_grid(&[2, 3], 5, 1).unwrap());
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(gen_linear_manifold(&SyntheticSpec::linear(8, 8, 10, 0.0, 0)).is_err());
    assert!(gen_linear_manifold(&SyntheticSpec::linear(2, 8, 10, -1.0, 0)).is_err());
    assert!(gen_linear_manifold(&SyntheticSpec::sinusoidal(2, 8, 10, 0.0, 0)).is_err());
}
