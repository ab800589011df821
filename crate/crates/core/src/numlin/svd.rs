use num_complex::Complex64;

use super::matrix::CMatrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;
const ORTHO_TOL: f64 = 1e-14;

/// `A = U diag(d) V^H` with `d` non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: CMatrix,
    pub d: Vec<f64>,
    pub v: CMatrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> CMatrix {
        self.u.scale_columns(&self.d).matmul(&self.v.adjoint())
    }
}

/// Complex SVD of a square matrix by one-sided Jacobi rotations.
pub fn svd(a: &CMatrix) -> Result<SvdFactors> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("svd needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    let n = a.rows();
    let mut work = ColMajor::from_matrix(a);
    let mut v = ColMajor::identity(n);
    jacobi(&mut work, &mut v)?;
    Ok(finish(work, v))
}

/// Same as [`svd`] but starts the rotations from `A·V0`, with `V0` unitary.
/// Converges in one or two sweeps when `V0` is close to the right singular
/// vectors, which is the case between successive multiplier updates.
pub fn svd_warm(a: &CMatrix, v0: &CMatrix) -> Result<SvdFactors> {
    if !a.is_square() || v0.rows() != a.rows() || !v0.is_square() {
        return Err(Error::DimensionMismatch("svd_warm shape mismatch".into()));
    }
    let mut work = ColMajor::from_matrix(&a.matmul(v0));
    let mut v = ColMajor::from_matrix(v0);
    jacobi(&mut work, &mut v)?;
    Ok(finish(work, v))
}

struct ColMajor {
    n: usize,
    data: Vec<Complex64>,
}

impl ColMajor {
    fn from_matrix(m: &CMatrix) -> Self {
        let n = m.rows();
        let mut data = Vec::with_capacity(n * n);
        for c in 0..n {
            for r in 0..n {
                data.push(m[(r, c)]);
            }
        }
        ColMajor { n, data }
    }

    fn identity(n: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for k in 0..n {
            data[k * n + k] = Complex64::new(1.0, 0.0);
        }
        ColMajor { n, data }
    }

    fn col(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.n..(c + 1) * self.n]
    }

    fn col_pair(&mut self, p: usize, q: usize) -> (&mut [Complex64], &mut [Complex64]) {
        debug_assert!(p < q);
        let n = self.n;
        let (lo, hi) = self.data.split_at_mut(q * n);
        (&mut lo[p * n..(p + 1) * n], &mut hi[..n])
    }
}

fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

fn dot_conj(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    // x^H y
    x.iter().zip(y).fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
}

/// Rotates column pair `(p, q)` so that `x_p^H x_q = 0`:
/// `x_p' = c x_p - s e^{-iφ} x_q`, `x_q' = s e^{iφ} x_p + c x_q`.
fn rotate(x: &mut [Complex64], y: &mut [Complex64], c: f64, s_neg: Complex64, s_pos: Complex64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let xa = *a;
        let yb = *b;
        *a = xa * c - s_neg * yb;
        *b = s_pos * xa + yb * c;
    }
}

fn jacobi(work: &mut ColMajor, v: &mut ColMajor) -> Result<()> {
    let n = work.n;
    let mut norms: Vec<f64> = (0..n).map(|c| norm_sqr(work.col(c))).collect();
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot_conj(work.col(p), work.col(q));
                let g = gamma.norm();
                if g <= ORTHO_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let s_neg = phase.conj() * s;
                let s_pos = phase * s;
                let (x, y) = work.col_pair(p, q);
                rotate(x, y, c, s_neg, s_pos);
                norms[p] = norm_sqr(x);
                norms[q] = norm_sqr(y);
                let (x, y) = v.col_pair(p, q);
                rotate(x, y, c, s_neg, s_pos);
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(Error::NoConvergence { what: "one-sided Jacobi SVD", iterations: MAX_SWEEPS })
}

fn finish(work: ColMajor, v: ColMajor) -> SvdFactors {
    let n = work.n;
    let sigma: Vec<f64> = (0..n).map(|c| norm_sqr(work.col(c)).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal values keep Jacobi order
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap_or(std::cmp::Ordering::Equal));

    let sigma_max = order.first().map_or(0.0, |&k| sigma[k]);
    let null_floor = sigma_max * (n as f64) * f64::EPSILON;

    let mut u_cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut deferred = Vec::new();
    for (slot, &k) in order.iter().enumerate() {
        let vk = v.col(k).to_vec();
        let s = sigma[k];
        d.push(s);
        if s > null_floor && s > 0.0 {
            u_cols.push(work.col(k).iter().map(|z| z / s).collect());
        } else {
            u_cols.push(Vec::new());
            deferred.push(slot);
        }
        v_cols.push(vk);
    }
    for slot in deferred {
        let filled: Vec<&Vec<Complex64>> = u_cols.iter().filter(|c| !c.is_empty()).collect();
        let col = complete_basis(n, &filled);
        u_cols[slot] = col;
    }

    for (uc, vc) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        let lead = vc
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, z)| if z.norm() > best.1 { (i, z.norm()) } else { best })
            .0;
        let z = vc[lead];
        if z.norm() > 0.0 {
            let rot = z.conj() / z.norm();
            vc.iter_mut().for_each(|x| *x *= rot);
            uc.iter_mut().for_each(|x| *x *= rot);
            vc[lead] = Complex64::new(vc[lead].norm(), 0.0);
        }
    }

    let u = CMatrix::from_fn(n, n, |r, c| u_cols[c][r]);
    let v = CMatrix::from_fn(n, n, |r, c| v_cols[c][r]);
    SvdFactors { u, d, v }
}

/// A unit vector orthogonal to `basis`, built by Gram-Schmidt on the
/// canonical vectors.
fn complete_basis(n: usize, basis: &[&Vec<Complex64>]) -> Vec<Complex64> {
    let mut best: Option<(f64, Vec<Complex64>)> = None;
    for e in 0..n {
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        x[e] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for b in basis {
                let proj = dot_conj(b, &x);
                for (xi, bi) in x.iter_mut().zip(b.iter()) {
                    *xi -= proj * bi;
                }
            }
        }
        let nrm = norm_sqr(&x).sqrt();
        if best.as_ref().is_none_or(|(bn, _)| nrm > *bn) {
            best = Some((nrm, x));
        }
    }
    let (nrm, mut x) = best.expect("n >= 1");
    x.iter_mut().for_each(|z| *z /= nrm);
    x
}
