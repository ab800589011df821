mod common;

use common::{random_tone, rel_close, rng};
use dsmopt_core::binder::ToneChannel;
use dsmopt_core::spectra::{algo1_total_power, rate_of_cov, tone_solve};
use dsmopt_core::structures::make_txrx;
use dsmopt_core::{CMatrix, HermitianPsd, Multipliers, Scenario, SolverOptions};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn identity_noise(h: CMatrix) -> ToneChannel {
    let n = h.rows();
    ToneChannel::new(0, 1e6, h, HermitianPsd::identity(n)).unwrap()
}

#[test]
fn determinant_identity_over_random_tones() {
    let mut r = rng(2024);
    let mut count = 0;
    for n in [1, 2, 4, 8] {
        for _ in 0..60 {
            let tc = random_tone(&mut r, n);
            let lam: Vec<f64> = (0..n).map(|_| 10f64.powf(r.random_range(-2.0..1.0))).collect();
            let gamma = 10f64.powf(r.random_range(0.0..1.2));
            let sol = tone_solve(&tc, &lam, gamma).unwrap();
            let b = rate_of_cov(&tc, &sol.phi, gamma).unwrap();
            assert!(rel_close(b, sol.b_nats, 1e-9) || (b.abs() < 1e-14 && sol.b_nats == 0.0), "{b} vs {}", sol.b_nats);
            count += 1;
        }
    }
    assert!(count >= 200);
}

#[test]
fn hand_cases() {
    let s = tone_solve(&identity_noise(CMatrix::identity(2)), &[1.0, 1.0], 1.0).unwrap();
    assert_eq!(s.s_tilde, vec![0.0, 0.0]);
    assert_eq!(s.b_nats, 0.0);
    assert!(s.phi.as_matrix().is_zero());

    let s = tone_solve(&identity_noise(CMatrix::identity(2).scale(2.0.into())), &[1.0, 1.0], 1.0).unwrap();
    assert!(s.s_tilde.iter().all(|&x| (x - 0.75).abs() < 1e-15));
    assert!(s.phi.as_matrix().sub(&CMatrix::identity(2).scale(0.75.into())).frobenius_norm() < 1e-14);
    assert!((s.b_nats - 2.0 * 4f64.ln()).abs() < 1e-14);

    // scalar channels: s = 1/λ − Γ/h², φ = s̃/λ with s̃ = 1 − Γλ/h²
    let s = tone_solve(&identity_noise(CMatrix::from_real_diag(&[3.0, 1.0])), &[4.0, 1.0], 1.0).unwrap();
    assert!((s.s_tilde[0] - (1.0 - 1.0 / 2.25)).abs() < 1e-15 && s.s_tilde[1] == 0.0);
    assert!((s.phi_diag[0] - (1.0 - 1.0 / 2.25) / 4.0).abs() < 1e-15 && s.phi_diag[1].abs() < 1e-300);
    assert!((s.b_nats - 2.25f64.ln()).abs() < 1e-14);

    let phi = HermitianPsd::identity(2);
    assert!((rate_of_cov(&identity_noise(CMatrix::identity(2)), &phi, 1.0).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-15);
    let zero = HermitianPsd::zeros(2);
    assert_eq!(rate_of_cov(&identity_noise(CMatrix::identity(2)), &zero, 1.0).unwrap(), 0.0);
}

fn scalar(gains_sq: &[f64], budget: f64) -> Scenario {
    let ch = gains_sq.iter().map(|&g| (CMatrix::from_real_diag(&[g.sqrt()]), CMatrix::identity(1))).collect();
    Scenario::from_matrices(ch, vec![budget], 0.0).unwrap()
}

#[test]
fn analytic_waterfilling_oracle() {
    // independent scalar oracle: the water level 1/λ solves Σ (1/λ − 1/g)+ = P
    fn level(g: &[f64], p: f64) -> f64 {
        let mut g = g.to_vec();
        g.sort_by(|a, b| b.total_cmp(a));
        for k in (1..=g.len()).rev() {
            let w = (p + g[..k].iter().map(|x| 1.0 / x).sum::<f64>()) / k as f64;
            if w > 1.0 / g[k - 1] {
                return w;
            }
        }
        unreachable!()
    }
    let opts = SolverOptions::default();
    for (g, p) in [(vec![1.0, 1.0], 2.0), (vec![4.0, 1.0], 0.75), (vec![9.0, 3.0, 0.5, 2.0], 1.3)] {
        let a = algo1_total_power(&scalar(&g, p), &opts).unwrap();
        let w = level(&g, p);
        assert!((a.multipliers.lambda[0] - 1.0 / w).abs() <= 1e-8, "{g:?}");
        for (i, gi) in g.iter().enumerate() {
            assert!((a.psd[0][i] - (w - 1.0 / gi).max(0.0)).abs() <= 1e-8);
        }
    }
}

fn seeded_tone(seed: u64, n: usize) -> ToneChannel {
    random_tone(&mut rng(seed), n)
}

fn lambdas(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed ^ 0x5eed);
    (0..n).map(|_| 10f64.powf(r.random_range(-2.0..1.0))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn water_level_is_unity(seed in 0u64..100_000, n in 1usize..9, gamma in 1.0f64..10.0) {
        let tc = seeded_tone(seed, n);
        let sol = tone_solve(&tc, &lambdas(seed, n), gamma).unwrap();
        for (s, d) in sol.s_tilde.iter().zip(&sol.factors.d) {
            if *s > 0.0 {
                prop_assert!((s + gamma / (d * d) - 1.0).abs() <= 4.0 * f64::EPSILON);
            } else {
                prop_assert!(d * d <= gamma);
            }
        }
    }

    #[test]
    fn gap_scaling_leaves_solution_unchanged(seed in 0u64..100_000, n in 1usize..7, re in 0.2f64..3.0, im in -3.0f64..3.0) {
        let tc = seeded_tone(seed, n);
        let lam = lambdas(seed, n);
        let c = Complex64::new(re, im);
        let scaled = ToneChannel::new(0, 1e6, tc.h.scale(c), tc.r.clone()).unwrap();
        let a = tone_solve(&tc, &lam, 2.0).unwrap();
        let b = tone_solve(&scaled, &lam, 2.0 * c.norm_sqr()).unwrap();
        for (x, y) in a.s_tilde.iter().zip(&b.s_tilde) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert!(a.phi.as_matrix().sub(b.phi.as_matrix()).frobenius_norm() <= 1e-12 * (1.0 + a.phi.frobenius_norm()));
        prop_assert!((a.b_nats - b.b_nats).abs() <= 1e-12 * (1.0 + a.b_nats));
    }

    #[test]
    fn covariance_is_hermitian_psd(seed in 0u64..100_000, n in 1usize..9) {
        let tc = seeded_tone(seed, n);
        let sol = tone_solve(&tc, &lambdas(seed, n), 1.5).unwrap();
        let m = sol.phi.as_matrix();
        prop_assert!(m.sub(&m.adjoint()).max_abs() == 0.0);
        prop_assert!(sol.phi_diag.iter().all(|&p| p >= 0.0));
        // Φ = T diag(s̃) T^H with T = Λ^{-1/2} V, so x^H Φ x >= 0 by construction;
        // check against the transmit matrix form
        let pair = make_txrx(&tc, &lambdas(seed, n), &sol).unwrap();
        let t = pair.tx.scale_columns(&sol.s_tilde.iter().map(|s| s.sqrt()).collect::<Vec<_>>());
        prop_assert!(t.matmul(&t.adjoint()).sub(m).frobenius_norm() <= 1e-12 * (1.0 + m.frobenius_norm()));
        for k in 0..n {
            prop_assert!((t.matmul(&t.adjoint())[(k, k)].re - sol.phi_diag[k]).abs() <= 1e-12 * (1.0 + sol.phi_diag[k]));
        }
        prop_assert_eq!(&pair.d, &sol.factors.d);
        let streams: f64 = sol.s_tilde.iter().zip(&pair.d).map(|(s, d)| (s * d * d / 1.5).ln_1p()).sum();
        prop_assert_eq!(streams, sol.b_nats);
    }

    #[test]
    fn line_power_non_increasing_in_own_multiplier(seed in 0u64..100_000, n in 2usize..6, line in 0usize..6) {
        let line = line % n;
        let tc = seeded_tone(seed, n);
        let mut lam = lambdas(seed, n);
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            lam[line] = 1e-3 * 10f64.powf(k as f64 * 0.25);
            let p = tone_solve(&tc, &lam, 1.0).unwrap().phi_diag[line];
            prop_assert!(p <= prev * (1.0 + 1e-9) + 1e-15);
            prev = p;
        }
    }
}

#[test]
fn total_power_non_increasing_in_common_multiplier() {
    let mut r = rng(77);
    let tones: Vec<ToneChannel> = (0..16).map(|_| random_tone(&mut r, 4)).collect();
    let mut prev = f64::INFINITY;
    for k in 0..20 {
        let lam = 1e-3 * 10f64.powf(k as f64 * 0.25);
        let m = Multipliers::uniform(lam, 4, tones.len());
        let p: f64 = tones
            .iter()
            .enumerate()
            .map(|(i, tc)| tone_solve(tc, &m.effective(i, 1e-12), 1.0).unwrap().phi_diag.iter().sum::<f64>())
            .sum();
        assert!(p <= prev * (1.0 + 1e-12), "λ={lam}: {p} > {prev}");
        prev = p;
    }
}
