use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::binder::ToneChannel;
use crate::error::{Error, Result};
use crate::numlin::{cholesky, solve_lower, CMatrix};
use crate::spectra::ToneSolution;

/// Transmit and receive matrices that turn one tone into parallel scalar
/// channels: `rx · H · tx = diag(d)` and `rx · R · rx^H = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct TxRxPair {
    /// `Λ^{-1/2} V`: stream symbols to line signals.
    pub tx: CMatrix,
    /// `U^H L^{-1}`: received signals to whitened stream outputs.
    pub rx: CMatrix,
    pub d: Vec<f64>,
}

/// Builds the pair for the solution `sol` of tone `tc` at multipliers `lam_diag`.
pub fn make_txrx(tc: &ToneChannel, lam_diag: &[f64], sol: &ToneSolution) -> Result<TxRxPair> {
    let n = tc.n_lines();
    if lam_diag.len() != n || sol.factors.d.len() != n {
        return Err(Error::DimensionMismatch(format!("{n}-line tone with {} multipliers", lam_diag.len())));
    }
    if lam_diag.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidInput("multiplier diagonal must be finite and positive".into()));
    }
    let l = cholesky(&tc.r)?;
    let l_inv = solve_lower(&l, &CMatrix::identity(n))?;
    let inv_sqrt: Vec<f64> = lam_diag.iter().map(|l| 1.0 / l.sqrt()).collect();
    Ok(TxRxPair {
        tx: sol.factors.v.scale_rows(&inv_sqrt),
        rx: sol.factors.u.adjoint().matmul(&l_inv),
        d: sol.factors.d.clone(),
    })
}

/// Empirical check of the parallel-channel decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub n_draws: usize,
    /// Sample covariance of `z̃ − D x̃`.
    pub noise_cov: CMatrix,
    /// Largest entry of `|noise_cov − I|`.
    pub max_cov_deviation: f64,
    /// Measured `E|d_j x̃_j|² / E|ẽ_j|²` per stream.
    pub empirical_snr: Vec<f64>,
    /// `s̃_j d_j²`.
    pub expected_snr: Vec<f64>,
}

fn cn<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn mat_vec(m: &CMatrix, x: &[Complex64], out: &mut [Complex64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o = m.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// Sends `n_draws` Gaussian stream vectors with powers `s_tilde` through
/// `tx`, the channel and noise of covariance `R`, then `rx`, and measures
/// the residual noise and per-stream SNR. Deterministic for a fixed seed.
pub fn monte_carlo_siso(
    pair: &TxRxPair,
    tc: &ToneChannel,
    s_tilde: &[f64],
    n_draws: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    let n = tc.n_lines();
    if n_draws == 0 {
        return Err(Error::InvalidInput("n_draws must be at least 1".into()));
    }
    if s_tilde.len() != n || pair.d.len() != n {
        return Err(Error::DimensionMismatch(format!("{} stream powers for {n} streams", s_tilde.len())));
    }
    let l = cholesky(&tc.r)?;
    let amp: Vec<f64> = s_tilde.iter().map(|s| s.max(0.0).sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = Complex64::new(0.0, 0.0);
    let (mut xt, mut x, mut y, mut w, mut noise, mut z) =
        (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let mut cov = CMatrix::zeros(n, n);
    let mut sig = vec![0.0; n];
    for _ in 0..n_draws {
        for j in 0..n {
            xt[j] = cn(&mut rng) * amp[j];
        }
        for wk in w.iter_mut() {
            *wk = cn(&mut rng);
        }
        mat_vec(&pair.tx, &xt, &mut x);
        mat_vec(&tc.h, &x, &mut y);
        mat_vec(&l, &w, &mut noise);
        for (yk, nk) in y.iter_mut().zip(&noise) {
            *yk += nk;
        }
        mat_vec(&pair.rx, &y, &mut z);
        for j in 0..n {
            let s = xt[j] * pair.d[j];
            z[j] -= s;
            sig[j] += s.norm_sqr();
        }
        for a in 0..n {
            for b in 0..n {
                cov[(a, b)] += z[a] * z[b].conj();
            }
        }
    }
    let inv = 1.0 / n_draws as f64;
    let noise_cov = cov.scale(inv.into());
    let max_cov_deviation = noise_cov.sub(&CMatrix::identity(n)).max_abs();
    let empirical_snr = (0..n).map(|j| sig[j] * inv / noise_cov[(j, j)].re).collect();
    let expected_snr = s_tilde.iter().zip(&pair.d).map(|(s, d)| s * d * d).collect();
    Ok(MonteCarloReport { n_draws, noise_cov, max_cov_deviation, empirical_snr, expected_snr })
}
