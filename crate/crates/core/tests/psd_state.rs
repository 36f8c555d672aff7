mod common;

use flhsions::psd::{mahalanobis_project, CorrectionMatrix, Slab, SlabSet, REFACTOR_INTERVAL};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, dim: usize, updates: usize) -> CorrectionMatrix {
    let mut a = CorrectionMatrix::new(dim, rng.random_range(0.5..3.0)).unwrap();
    for _ in 0..updates {
        let g: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        a.rank_one_update(&g, rng.random_range(0.05..1.0)).unwrap();
    }
    a
}

fn random_slabs(rng: &mut ChaCha8Rng, d: usize) -> Vec<(usize, [f64; 2], f64)> {
    (0..d)
        .map(|k| {
            let t = rng.random_range(1..40) as f64;
            (k, [1.0, t], rng.random_range(0.5..3.0))
        })
        .collect()
}

fn slab_set(slabs: &[(usize, [f64; 2], f64)]) -> SlabSet {
    SlabSet::new(
        slabs
            .iter()
            .map(|&(block, normal, radius)| Slab { block, normal, radius })
            .collect(),
    )
    .unwrap()
}

fn a_dist(a: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let v = nalgebra::DVector::from_iterator(x.len(), x.iter().zip(y).map(|(p, q)| p - q));
    (v.transpose() * a * &v)[(0, 0)].sqrt()
}

#[test]
fn diagonal_update_by_hand() {
    let mut a = CorrectionMatrix::new(2, 2.0).unwrap();
    a.rank_one_update(&[1.0, 0.0], 1.0).unwrap();
    assert_eq!(a.matrix()[(0, 0)], 3.0);
    assert_eq!(a.matrix()[(1, 1)], 2.0);
    assert!((a.inverse()[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
    assert!((a.inverse()[(1, 1)] - 0.5).abs() < 1e-15);
    assert_eq!(a.inverse()[(0, 1)], 0.0);
}

#[test]
fn inverse_tracks_dense_inversion_over_many_updates() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for dim in [2, 4, 6] {
        let mut a = CorrectionMatrix::new(dim, 2.0).unwrap();
        for step in 0..1000 {
            let g: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            a.rank_one_update(&g, 0.3).unwrap();
            assert!(a.updates_since_refactor() < REFACTOR_INTERVAL);
            if step % 97 == 0 || step == 999 {
                let dense = a.matrix().clone().try_inverse().unwrap();
                let err = (&dense - a.inverse()).norm();
                assert!(err <= 1e-7, "dim {dim} step {step}: {err:e}");
                let min_eig = a.matrix().clone().symmetric_eigenvalues().min();
                assert!(min_eig >= a.epsilon() - 1e-9);
            }
        }
    }
}

#[test]
fn non_finite_update_is_rejected() {
    let mut a = CorrectionMatrix::new(2, 1.0).unwrap();
    assert!(a.rank_one_update(&[f64::NAN, 0.0], 1.0).is_err());
    assert!(a.rank_one_update(&[f64::INFINITY, 0.0], 1.0).is_err());
}

#[test]
fn quadratic_norm_matches_explicit_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let a = random_matrix(&mut rng, 4, 10);
    assert_eq!(a.quadratic_norm(&[0.0; 4]).unwrap(), 0.0);
    for _ in 0..200 {
        let v: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut direct = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                direct += v[i] * a.matrix()[(i, j)] * v[j];
            }
        }
        let q = a.quadratic_norm(&v).unwrap();
        assert!((q - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        let sq: f64 = v.iter().map(|x| x * x).sum();
        assert!(q >= a.epsilon() * sq - 1e-12);
    }
    let two = CorrectionMatrix::new(2, 2.0).unwrap();
    assert_eq!(two.quadratic_norm(&[1.0, 1.0]).unwrap(), 4.0);
    assert!(two.quadratic_norm(&[1.0]).is_err());
}

#[test]
fn axis_aligned_clip_by_hand() {
    let a = CorrectionMatrix::new(2, 1.0).unwrap();
    let slabs = SlabSet::new(vec![Slab { block: 0, normal: [1.0, 0.0], radius: 1.0 }]).unwrap();
    let p = mahalanobis_project(&[2.0, 0.0], &a, &slabs, 1e-10).unwrap();
    assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15);
}

#[test]
fn projection_matches_brute_force_qp() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let d = 3;
        let a = random_matrix(&mut rng, 2 * d, 6);
        let slabs = random_slabs(&mut rng, d);
        let u: Vec<f64> = (0..2 * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let p = mahalanobis_project(&u, &a, &slab_set(&slabs), 1e-12).unwrap();
        let q = common::brute_force_slab_projection(&u, a.matrix(), &slabs);
        for (x, y) in p.iter().zip(&q) {
            assert!((x - y).abs() <= 1e-6, "{p:?} vs {q:?}");
        }
    }
}

#[test]
fn projection_is_idempotent_and_optimal_against_feasible_probes() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let tol = 1e-10;
    for _ in 0..30 {
        let d = rng.random_range(1..=3);
        let a = random_matrix(&mut rng, 2 * d, 5);
        let slabs = random_slabs(&mut rng, d);
        let set = slab_set(&slabs);
        let u: Vec<f64> = (0..2 * d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = mahalanobis_project(&u, &a, &set, tol).unwrap();
        assert!(set.violation(&p) <= tol);
        let pp = mahalanobis_project(&p, &a, &set, tol).unwrap();
        assert!(a_dist(a.matrix(), &p, &pp) <= 2.0 * tol + 1e-12);
        let best = a_dist(a.matrix(), &u, &p);
        let mut probes = 0;
        while probes < 100 {
            let q: Vec<f64> = (0..2 * d).map(|_| rng.random_range(-3.0..3.0)).collect();
            if set.violation(&q) > 0.0 {
                continue;
            }
            probes += 1;
            assert!(best <= a_dist(a.matrix(), &u, &q) + 1e-6);
        }
    }
}

#[test]
fn feasible_input_is_returned_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let a = random_matrix(&mut rng, 4, 3);
    let set = SlabSet::from_covariate(2, [1.0, 3.0], 20.0).unwrap();
    let u = vec![0.5, -0.2, 1.0, 2.0];
    assert_eq!(mahalanobis_project(&u, &a, &set, 1e-10).unwrap(), u);
}
