//! Projected-gradient ascent on real 2x2 covariances with `R = I`, `Γ = 1`
//! and per-line power budgets. Slow but independent of the library.

use nalgebra::Matrix2;

pub type M2 = Matrix2<f64>;

fn psd_clip(m: &M2) -> M2 {
    let sym = (m + m.transpose()) * 0.5;
    let e = sym.symmetric_eigen();
    let d = e.eigenvalues.map(|x| x.max(0.0));
    e.eigenvectors * M2::from_diagonal(&d) * e.eigenvectors.transpose()
}

fn budget_cut(phi: &mut [M2], p: &[f64; 2]) {
    let nc = phi.len() as f64;
    for n in 0..2 {
        let s: f64 = phi.iter().map(|m| m[(n, n)]).sum();
        if s > p[n] {
            for m in phi.iter_mut() {
                m[(n, n)] -= (s - p[n]) / nc;
            }
        }
    }
}

/// Dykstra's alternating projection onto PSD cones ∩ per-line power budgets.
pub fn project(x: &[M2], p: &[f64; 2]) -> Vec<M2> {
    let mut y = x.to_vec();
    let mut dp = vec![M2::zeros(); x.len()];
    let mut dq = vec![M2::zeros(); x.len()];
    for _ in 0..20_000 {
        let prev = y.clone();
        let a: Vec<M2> = y.iter().zip(&dp).map(|(yi, di)| psd_clip(&(yi + di))).collect();
        for i in 0..x.len() {
            dp[i] += y[i] - a[i];
        }
        let mut b: Vec<M2> = a.iter().zip(&dq).map(|(ai, di)| ai + di).collect();
        budget_cut(&mut b, p);
        for i in 0..x.len() {
            dq[i] += a[i] - b[i];
        }
        y = b;
        let change: f64 = y.iter().zip(&prev).map(|(u, v)| (u - v).norm()).sum();
        if change <= 1e-16 {
            break;
        }
    }
    // final snap so the result is exactly PSD and within budget
    let mut z: Vec<M2> = y.iter().map(psd_clip).collect();
    for n in 0..2 {
        let s: f64 = z.iter().map(|m| m[(n, n)]).sum();
        if s > p[n] {
            for m in z.iter_mut() {
                m.row_mut(n).scale_mut((p[n] / s).sqrt());
                m.column_mut(n).scale_mut((p[n] / s).sqrt());
            }
        }
    }
    z
}

fn objective(h: &[M2], phi: &[M2]) -> f64 {
    h.iter().zip(phi).map(|(h, f)| (M2::identity() + h * f * h.transpose()).determinant().ln()).sum()
}

pub fn pg_oracle(h: &[M2], p: [f64; 2]) -> f64 {
    let nc = h.len();
    let mut phi = project(&vec![M2::from_diagonal_element(0.1); nc], &p);
    let t = 0.2;
    for _ in 0..200_000 {
        let step: Vec<M2> = h
            .iter()
            .zip(&phi)
            .map(|(h, f)| {
                let k = (M2::identity() + h * f * h.transpose()).try_inverse().unwrap();
                f + h.transpose() * k * h * t
            })
            .collect();
        let next = project(&step, &p);
        let gap: f64 = next.iter().zip(&phi).map(|(a, b)| (a - b).norm()).sum::<f64>() / t;
        phi = next;
        if gap <= 1e-8 {
            break;
        }
    }
    objective(h, &phi)
}
