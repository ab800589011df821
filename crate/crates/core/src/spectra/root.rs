//! Root finding for the monotone power-versus-level curves that the
//! multiplier searches invert. Curves are parametrised by the water level
//! `x = 1/λ`, in which they are piecewise close to linear.

use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Point {
    pub x: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RootResult {
    pub x: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Finds `x` in `[lo.x, hi.x]` with `|p(x) - target| <= tol`, given
/// `lo.p <= target <= hi.p` and `p` non-decreasing. False-position steps
/// with the Illinois modification, falling back to bisection whenever the
/// bracket fails to halve over two steps.
pub(crate) fn solve_increasing(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut lo: Point,
    mut hi: Point,
    target: f64,
    tol: f64,
    max_iter: usize,
) -> Result<RootResult> {
    debug_assert!(lo.x <= hi.x);
    if (lo.p - target).abs() <= tol {
        return Ok(RootResult { x: lo.x, evals: 0, converged: true });
    }
    if (hi.p - target).abs() <= tol {
        return Ok(RootResult { x: hi.x, evals: 0, converged: true });
    }
    let mut g_lo = lo.p - target;
    let mut g_hi = hi.p - target;
    let mut side = 0i8;
    let mut widths = [hi.x - lo.x; 2];
    let mut best = if -g_lo < g_hi { lo } else { hi };
    for it in 0..max_iter {
        let width = hi.x - lo.x;
        if width <= f64::EPSILON * hi.x.abs() {
            return Ok(RootResult { x: best.x, evals: it, converged: false });
        }
        let bisect = width > 0.5 * widths[it % 2];
        widths[it % 2] = width;
        let mut x = lo.x - g_lo * width / (g_hi - g_lo);
        if bisect || !(x > lo.x && x < hi.x) {
            x = lo.x + 0.5 * width;
        }
        let p = f(x)?;
        let g = p - target;
        if g.abs() < (best.p - target).abs() {
            best = Point { x, p };
        }
        if g.abs() <= tol {
            return Ok(RootResult { x, evals: it + 1, converged: true });
        }
        if g < 0.0 {
            lo = Point { x, p };
            g_lo = g;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = Point { x, p };
            g_hi = g;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(RootResult { x: best.x, evals: max_iter, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(f: impl Fn(f64) -> f64, lo: f64, hi: f64, target: f64) -> RootResult {
        let lo = Point { x: lo, p: f(lo) };
        let hi = Point { x: hi, p: f(hi) };
        solve_increasing(|x| Ok(f(x)), lo, hi, target, 1e-12, 200).unwrap()
    }

    #[test]
    fn linear_in_one_step() {
        let r = run(|x| 3.0 * x - 1.0, 0.0, 10.0, 2.0);
        assert!(r.converged);
        assert!(r.evals <= 2);
        assert!((r.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn piecewise_linear_with_kinks() {
        // two-tone scalar waterfilling, x = 1/λ: P = (x - 1/4)+ + (x - 1)+
        let p = |x: f64| (x - 0.25).max(0.0) + (x - 1.0).max(0.0);
        let r = run(p, 0.0, 100.0, 0.75);
        assert!(r.converged);
        assert!((r.x - 1.0).abs() < 1e-11);
    }

    #[test]
    fn steep_curve_still_converges() {
        let r = run(|x: f64| x.powi(9), 0.0, 2.0, 0.5);
        assert!(r.converged);
        assert!((r.x.powi(9) - 0.5).abs() <= 1e-12);
    }
}
