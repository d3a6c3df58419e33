#![allow(dead_code)]

use ck_core::ParametricMatrix;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = random_matrix(rng, n, n);
    (&m + m.transpose()) * 0.5
}

/// SPD with eigenvalues drawn from `[lo, hi]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = random_matrix(rng, n, n).qr().q();
    let d = DVector::from_fn(n, |_, _| rng.gen_range(lo..hi));
    &q * DMatrix::from_diagonal(&d) * q.transpose()
}

/// A family of indefinite symmetric terms (enough for algebraic identities).
pub fn symmetric_family(rng: &mut ChaCha8Rng, n: usize, s: usize) -> (ParametricMatrix, DVector<f64>) {
    let terms = (0..s).map(|_| random_symmetric(rng, n)).collect();
    (ParametricMatrix::new(terms).unwrap(), random_vector(rng, n))
}

/// A family whose terms are all SPD, so `A(σ)` is SPD for positive `σ`.
pub fn spd_family(rng: &mut ChaCha8Rng, n: usize, s: usize) -> (ParametricMatrix, DVector<f64>) {
    let terms = (0..s).map(|_| random_spd(rng, n, 0.2, 2.0)).collect();
    let b = random_vector(rng, n);
    let norm = b.norm();
    (ParametricMatrix::new(terms).unwrap(), b / norm)
}

pub fn positive_sigma(rng: &mut ChaCha8Rng, s: usize) -> Vec<f64> {
    (0..s).map(|_| rng.gen_range(0.5..3.0)).collect()
}

/// `A(σ)^k b` by repeated application.
pub fn power_apply(p: &ParametricMatrix, sigma: &[f64], b: &DVector<f64>, k: usize) -> DVector<f64> {
    (0..k).fold(b.clone(), |v, _| p.apply(sigma, &v).unwrap())
}
