mod common;

use common::{naive_mul, rng};
use consensus_fdi::numerics::{
    left_null_basis, matrix_power, pseudoinverse, rank, spectral_radius, DEFAULT_TOL,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn random_matrix(seed: u64, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

#[test]
fn tall_full_rank_pseudoinverse_is_left_inverse() {
    for seed in 0..20 {
        let m = random_matrix(seed, 8, 2);
        let p = pseudoinverse(&m, DEFAULT_TOL).unwrap();
        assert!((&p * &m - DMatrix::identity(2, 2)).norm() < 1e-10);
    }
}

#[test]
fn left_null_of_random_tall_matrix() {
    for seed in 0..20 {
        let m = random_matrix(seed, 8, 2);
        let b = left_null_basis(&m, DEFAULT_TOL).unwrap();
        assert_eq!(b.nrows(), 6);
        assert!((&b * &m).norm() < 1e-12);
        assert!((&b * b.transpose() - DMatrix::identity(6, 6)).norm() < 1e-12);
    }
}

#[test]
fn power_matches_naive_product() {
    for seed in 0..20 {
        let m = random_matrix(seed, 6, 6);
        let mut naive = DMatrix::identity(6, 6);
        for _ in 0..5 {
            naive = naive_mul(&naive, &m);
        }
        let fast = matrix_power(&m, 5).unwrap();
        assert!((fast - &naive).norm() <= 1e-9 * naive.norm().max(1.0));
    }
}

#[test]
fn spectral_radius_of_symmetric_matches_eigen() {
    for seed in 0..10 {
        let m = random_matrix(seed, 7, 7);
        let s = &m + m.transpose();
        let oracle = s
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        assert!((spectral_radius(&s).unwrap() - oracle).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn penrose_identities(seed in any::<u64>(), rows in 1usize..=50, cols in 1usize..=50, low_rank in any::<bool>()) {
        let m = if low_rank {
            random_matrix(seed, rows, 2) * random_matrix(seed ^ 1, 2, cols)
        } else {
            random_matrix(seed, rows, cols)
        };
        let p = pseudoinverse(&m, DEFAULT_TOL).unwrap();
        let scale = m.norm().max(1.0);
        prop_assert!((&m * &p * &m - &m).norm() <= 1e-9 * scale);
        prop_assert!((&p * &m * &p - &p).norm() <= 1e-9 * p.norm().max(1.0));
        let mp = &m * &p;
        let pm = &p * &m;
        prop_assert!((&mp - mp.transpose()).norm() <= 1e-9);
        prop_assert!((&pm - pm.transpose()).norm() <= 1e-9);
    }

    #[test]
    fn left_null_basis_properties(seed in any::<u64>(), rows in 2usize..=20, cols in 1usize..=6, deficient in any::<bool>()) {
        let mut m = random_matrix(seed, rows, cols);
        if deficient && cols > 1 {
            let c0 = m.column(0).clone_owned();
            m.set_column(cols - 1, &(c0 * 2.0));
        }
        let b = left_null_basis(&m, DEFAULT_TOL).unwrap();
        let r = rank(&m, DEFAULT_TOL).unwrap();
        prop_assert_eq!(b.nrows(), rows - r);
        prop_assert!((&b * &m).norm() <= 1e-10 * m.norm().max(1.0));
        prop_assert!((&b * b.transpose() - DMatrix::identity(b.nrows(), b.nrows())).norm() <= 1e-10);
    }
}
