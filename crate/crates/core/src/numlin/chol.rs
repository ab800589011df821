use num_complex::Complex64;

use super::matrix::{CMatrix, HermitianPsd};
use super::tol;
use crate::error::{Error, Result};

/// Cholesky factor `L` with `L L^H = A`. Only the lower triangle of `a` is read.
pub fn cholesky(a: &HermitianPsd) -> Result<CMatrix> {
    cholesky_lower(a.as_matrix())
}

/// Cholesky on the lower triangle of any square matrix; the upper triangle
/// is ignored.
pub(crate) fn cholesky_lower(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("cholesky needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    let n = a.rows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)].re;
        for k in 0..j {
            pivot -= l[(j, k)].norm_sqr();
        }
        if !(pivot > tol::PIVOT_FLOOR) {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut acc = a[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / ljj;
        }
    }
    Ok(l)
}

/// Solves `L X = B` by forward substitution.
pub fn solve_lower(l: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if !l.is_square() || l.rows() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "solve_lower: L is {}x{}, B is {}x{}",
            l.rows(),
            l.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let n = l.rows();
    if let Some(index) = (0..n).find(|&k| l[(k, k)].norm_sqr() == 0.0) {
        return Err(Error::SingularTriangular { index });
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        for r in 0..n {
            let mut acc = x[(r, c)];
            for k in 0..r {
                acc -= l[(r, k)] * x[(k, c)];
            }
            x[(r, c)] = acc / l[(r, r)];
        }
    }
    Ok(x)
}

/// Symmetrizes a nearly Hermitian matrix and checks it is PSD.
pub fn hermitize(a: &CMatrix) -> Result<HermitianPsd> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "hermitize needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::InvalidInput("matrix has a non-finite entry".into()));
    }
    let norm = a.frobenius_norm();
    let asym = a.sub(&a.adjoint()).frobenius_norm();
    if asym > tol::HERM * norm {
        return Err(Error::NotHermitian { asymmetry: if norm > 0.0 { asym / norm } else { asym } });
    }
    let n = a.rows();
    let half = Complex64::new(0.5, 0.0);
    let sym = CMatrix::from_fn(n, n, |r, c| (a[(r, c)] + a[(c, r)].conj()) * half);
    let h = HermitianPsd::from_lower(sym);
    if !is_psd(h.as_matrix()) {
        return Err(Error::NotPsd);
    }
    Ok(h)
}

/// True when the smallest eigenvalue of the Hermitian matrix (lower triangle)
/// is at least `-PSD * trace`. Tested by factoring the shifted matrix.
pub(crate) fn is_psd(a: &CMatrix) -> bool {
    let n = a.rows();
    let trace: f64 = (0..n).map(|k| a[(k, k)].re).sum();
    if trace < 0.0 {
        return false;
    }
    if trace == 0.0 {
        return a.is_zero();
    }
    let mut shifted = a.clone();
    let shift = tol::PSD * trace;
    for k in 0..n {
        shifted[(k, k)] += shift;
    }
    cholesky_lower(&shifted).is_ok()
}

/// `ln det A` for Hermitian positive definite `A`.
pub(crate) fn ln_det_hpd(a: &CMatrix) -> Result<f64> {
    let l = cholesky_lower(a)?;
    Ok(2.0 * (0..l.rows()).map(|k| l[(k, k)].re.ln()).sum::<f64>())
}

/// Inverse by LU with partial pivoting. `None` when a pivot falls below
/// `rel_floor` times the largest entry.
pub fn invert(a: &CMatrix, rel_floor: f64) -> Option<CMatrix> {
    if !a.is_square() {
        return None;
    }
    let n = a.rows();
    let scale = a.max_abs();
    if scale == 0.0 {
        return None;
    }
    let mut lu = a.clone();
    let mut inv = CMatrix::identity(n);
    for col in 0..n {
        let (piv_row, piv_abs) =
            (col..n)
                .map(|r| (r, lu[(r, col)].norm()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs <= rel_floor * scale {
            return None;
        }
        if piv_row != col {
            for c in 0..n {
                let t = lu[(col, c)];
                lu[(col, c)] = lu[(piv_row, c)];
                lu[(piv_row, c)] = t;
                let t = inv[(col, c)];
                inv[(col, c)] = inv[(piv_row, c)];
                inv[(piv_row, c)] = t;
            }
        }
        let p = lu[(col, col)];
        for c in 0..n {
            lu[(col, c)] /= p;
            inv[(col, c)] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = lu[(r, col)];
            if f.norm_sqr() == 0.0 {
                continue;
            }
            for c in 0..n {
                let a_c = lu[(col, c)];
                let i_c = inv[(col, c)];
                lu[(r, c)] -= f * a_c;
                inv[(r, c)] -= f * i_c;
            }
        }
    }
    Some(inv)
}
