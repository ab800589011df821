use crate::binder::ToneChannel;
use crate::error::{Error, Result};
use crate::numlin::{cholesky, ln_det_hpd, solve_lower, svd, svd_warm, CMatrix, HermitianPsd, SvdFactors};

/// Optimal per-tone solution for a fixed multiplier diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneSolution {
    /// SVD of the whitened, multiplier-scaled channel `L^{-1} H Λ^{-1/2}`.
    pub factors: SvdFactors,
    /// Stream powers in scaled coordinates, `max(0, 1 - Γ/d²)`.
    pub s_tilde: Vec<f64>,
    pub phi: HermitianPsd,
    pub phi_diag: Vec<f64>,
    /// Per-stream rates `ln(1 + s̃ d²/Γ)`.
    pub stream_nats: Vec<f64>,
    pub b_nats: f64,
}

/// Unit-water-level waterfilling on gains `d`.
pub(crate) fn waterfill_unit(d: &[f64], gamma: f64) -> Vec<f64> {
    d.iter().map(|&dj| (1.0 - gamma / (dj * dj)).max(0.0)).collect()
}

pub(crate) fn stream_rates(d: &[f64], s_tilde: &[f64], gamma: f64) -> Vec<f64> {
    d.iter().zip(s_tilde).map(|(&dj, &s)| (s * dj * dj / gamma).ln_1p()).collect()
}

fn check_lam(lam_diag: &[f64], n: usize) -> Result<Vec<f64>> {
    if lam_diag.len() != n {
        return Err(Error::DimensionMismatch(format!("{} multipliers for {n} lines", lam_diag.len())));
    }
    if lam_diag.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidInput("multiplier diagonal must be finite and positive".into()));
    }
    Ok(lam_diag.iter().map(|&l| 1.0 / l.sqrt()).collect())
}

/// `Λ^{-1/2} V diag(s̃) V^H Λ^{-1/2}` as a PSD outer product.
fn covariance(v: &CMatrix, s_tilde: &[f64], inv_sqrt_lam: &[f64]) -> HermitianPsd {
    let sqrt_s: Vec<f64> = s_tilde.iter().map(|s| s.sqrt()).collect();
    let b = v.scale_columns(&sqrt_s).scale_rows(inv_sqrt_lam);
    HermitianPsd::from_lower(b.matmul(&b.adjoint()))
}

/// Per-line powers `[Φ]_nn = Σ_j |V_nj|² s̃_j / λ_n` without forming `Φ`.
pub(crate) fn covariance_diag(v: &CMatrix, s_tilde: &[f64], inv_sqrt_lam: &[f64]) -> Vec<f64> {
    (0..v.rows())
        .map(|n| {
            let w = inv_sqrt_lam[n] * inv_sqrt_lam[n];
            v.row(n).iter().zip(s_tilde).map(|(z, &s)| z.norm_sqr() * s).sum::<f64>() * w
        })
        .collect()
}

fn solve_whitened(g: &CMatrix, inv_sqrt_lam: &[f64], gamma: f64, warm: Option<&CMatrix>) -> Result<ToneSolution> {
    let scaled = g.scale_columns(inv_sqrt_lam);
    let factors = match warm {
        Some(v0) => svd_warm(&scaled, v0)?,
        None => svd(&scaled)?,
    };
    let s_tilde = waterfill_unit(&factors.d, gamma);
    let stream_nats = stream_rates(&factors.d, &s_tilde, gamma);
    let phi = covariance(&factors.v, &s_tilde, inv_sqrt_lam);
    let phi_diag = phi.diag_real();
    let b_nats = stream_nats.iter().sum();
    Ok(ToneSolution { factors, s_tilde, phi, phi_diag, stream_nats, b_nats })
}

/// Solves one tone for the multiplier diagonal `lam_diag`: whiten with the
/// Cholesky factor of `R`, scale by `Λ^{-1/2}`, take the SVD and waterfill
/// at unit level.
pub fn tone_solve(tc: &ToneChannel, lam_diag: &[f64], gamma: f64) -> Result<ToneSolution> {
    let inv_sqrt = check_lam(lam_diag, tc.n_lines())?;
    let g = whiten(tc)?;
    solve_whitened(&g, &inv_sqrt, gamma, None)
}

/// `L^{-1} H` with `L L^H = R`.
pub(crate) fn whiten(tc: &ToneChannel) -> Result<CMatrix> {
    let l = cholesky(&tc.r)?;
    solve_lower(&l, &tc.h)
}

/// `ln det(I + Γ^{-1} R^{-1} H Φ H^H)`, evaluated in whitened form.
pub fn rate_of_cov(tc: &ToneChannel, phi: &HermitianPsd, gamma: f64) -> Result<f64> {
    if phi.dim() != tc.n_lines() {
        return Err(Error::DimensionMismatch(format!("Φ is {0}x{0} for {1} lines", phi.dim(), tc.n_lines())));
    }
    let g = whiten(tc)?;
    rate_whitened(&g, phi.as_matrix(), gamma)
}

pub(crate) fn rate_whitened(g: &CMatrix, phi: &CMatrix, gamma: f64) -> Result<f64> {
    let mut m = g.matmul(phi).matmul(&g.adjoint()).scale((1.0 / gamma).into());
    for k in 0..m.rows() {
        m[(k, k)] += 1.0;
    }
    Ok(ln_det_hpd(&m)?.max(0.0))
}

/// Per-tone state reused across multiplier updates: the whitened channel
/// and the last right singular vectors as a warm start.
#[derive(Debug, Clone)]
pub(crate) struct PreparedTone {
    pub g: CMatrix,
    pub dead: bool,
    warm_v: Option<CMatrix>,
}

/// Result of a search-time evaluation: just what the multiplier updates need.
#[derive(Debug, Clone)]
pub(crate) struct ToneEval {
    pub phi_diag: Vec<f64>,
}

impl PreparedTone {
    pub fn new(tc: &ToneChannel) -> Result<Self> {
        let dead = tc.is_dead();
        let g = if dead { CMatrix::zeros(tc.n_lines(), tc.n_lines()) } else { whiten(tc)? };
        Ok(PreparedTone { g, dead, warm_v: None })
    }

    pub fn eval(&mut self, lam: &[f64], gamma: f64) -> Result<ToneEval> {
        let n = self.g.rows();
        if self.dead {
            return Ok(ToneEval { phi_diag: vec![0.0; n] });
        }
        let inv_sqrt: Vec<f64> = lam.iter().map(|&l| 1.0 / l.sqrt()).collect();
        let scaled = self.g.scale_columns(&inv_sqrt);
        let factors = match &self.warm_v {
            Some(v0) => svd_warm(&scaled, v0)?,
            None => svd(&scaled)?,
        };
        let s_tilde = waterfill_unit(&factors.d, gamma);
        let phi_diag = covariance_diag(&factors.v, &s_tilde, &inv_sqrt);
        self.warm_v = Some(factors.v);
        Ok(ToneEval { phi_diag })
    }

    /// Full solution with a cold SVD, identical to [`tone_solve`].
    pub fn solve(&self, lam: &[f64], gamma: f64) -> Result<ToneSolution> {
        let n = self.g.rows();
        let inv_sqrt = check_lam(lam, n)?;
        solve_whitened(&self.g, &inv_sqrt, gamma, None)
    }

    /// Largest multiplier at which the tone still carries power when every
    /// line shares the same multiplier.
    pub fn zero_power_level(&self, gamma: f64) -> Result<f64> {
        if self.dead {
            return Ok(0.0);
        }
        let d = svd(&self.g)?.d;
        Ok(d[0] * d[0] / gamma)
    }
}
