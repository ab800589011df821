#![allow(dead_code)]

pub mod pg;

use dsmopt_core::binder::ToneChannel;
use dsmopt_core::numlin::hermitize;
use dsmopt_core::{CMatrix, HermitianPsd};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| cn(rng))
}

/// `A A^H + floor I`.
pub fn random_pd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> HermitianPsd {
    let a = random_matrix(rng, n, n);
    hermitize(&a.matmul(&a.adjoint()).add(&CMatrix::identity(n).scale(floor.into()))).unwrap()
}

pub fn random_tone(rng: &mut ChaCha8Rng, n: usize) -> ToneChannel {
    let h = random_matrix(rng, n, n);
    let r = random_pd(rng, n, 0.05);
    ToneChannel::new(0, 1e6, h, r).unwrap()
}

pub fn to_na(m: &CMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)])
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
