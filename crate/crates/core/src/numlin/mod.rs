//! Small dense complex linear algebra: Cholesky, triangular solves and a
//! one-sided Jacobi SVD, tuned for N <= 16 and evaluated per tone.

mod chol;
mod matrix;
mod svd;

pub use chol::{cholesky, hermitize, invert, solve_lower};
pub(crate) use chol::{cholesky_lower, ln_det_hpd};
pub use matrix::{CMatrix, HermitianPsd};
pub use svd::{svd, svd_warm, SvdFactors};

/// Numerical tolerances shared by the kernels and their callers.
pub mod tol {
    pub const CHOL: f64 = 1e-10;
    pub const SVD: f64 = 1e-10;
    pub const UNITARY: f64 = 1e-10;
    pub const HERM: f64 = 1e-8;
    pub const PSD: f64 = 1e-10;
    pub const PIVOT_FLOOR: f64 = 1e-300;
}

#[cfg(test)]
pub(crate) mod test_util {
    use num_complex::Complex64;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::CMatrix;

    pub fn cnormal<R: Rng>(rng: &mut R) -> Complex64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| cnormal(rng))
    }

    pub fn random_lower<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |r, c| {
            if c > r {
                Complex64::new(0.0, 0.0)
            } else if c == r {
                Complex64::new(1.0 + rng.random::<f64>(), 0.0)
            } else {
                cnormal(rng)
            }
        })
    }
}
