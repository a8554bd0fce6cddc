use std::f64::consts::PI;

use irfcorr::kernel::*;
use irfcorr::spectral::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mat = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    mat.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[test]
fn limit_gram_matrices_are_psd() {
    let taus: Vec<f64> = (0..12).map(|k| 0.15 * k as f64).collect();
    for h in [make_sinc(), make_hilbert_sinc(), make_laplace(1.0, 1.0).unwrap()] {
        let m = CovarianceModel::new(h, None, 1.0).unwrap();
        let gram = m.limit_matrix(&taus).unwrap();
        assert!(min_eigenvalue(&gram) > -1e-8, "{}", m.h.name());
    }
}

#[test]
fn finite_gram_matrix_is_psd() {
    let m = CovarianceModel::new(make_sinc(), Some(make_triangular(10.0, 1.0).unwrap()), 1.0).unwrap();
    let gram = m.finite_matrix(50.0, &[0.0, 0.3, 0.6, 1.0]).unwrap();
    assert!(min_eigenvalue(&gram) > -1e-6);
}

#[test]
fn majorisation_chain() {
    for h in [make_sinc(), make_hilbert_sinc()] {
        for k in 0..20 {
            let (t1, t2) = (0.05 * k as f64, 1.0 - 0.03 * k as f64);
            let (dz, bound) = dZ_bound_check(&h, t1, t2).unwrap();
            assert!(dz * dz <= 2.0 * msq_increment_y(&h, t1, t2) + 1e-8);
            assert!(dz <= bound + 1e-8);
        }
    }
}

#[test]
fn finite_covariance_converges_to_limit() {
    let h = make_sinc();
    let errs: Vec<f64> = [(20.0, 5.0), (200.0, 50.0), (2000.0, 500.0)]
        .iter()
        .map(|(t, d)| {
            let m = CovarianceModel::new(h.clone(), Some(make_triangular(*d, 1.0).unwrap()), 1.0).unwrap();
            (m.cov_finite(*t, 0.25, 0.25).unwrap() - m.cov_limit(0.25, 0.25).unwrap()).abs()
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn rho_obeys_the_rederived_bound() {
    // ρ ≤ (2/√π)(sup|g*|/c)σ, hence ρ ≤ √2·rho_upper
    let pairs = [(0.0, 1.0), (0.0, 0.5), (0.1, 0.9), (0.3, 0.35), (0.8, 0.2)];
    for (t, d) in [(50.0, 10.0), (500.0, 100.0)] {
        let m = CovarianceModel::new(make_sinc(), Some(make_triangular(d, 1.0).unwrap()), 1.0).unwrap();
        for (a, b) in pairs {
            let r = m.rho_exact(t, a, b).unwrap();
            let s = sigma(&m.h, b - a);
            assert!(r <= 2.0 / PI.sqrt() * s + 1e-9, "({a},{b}) {r}");
            assert!(r <= 2f64.sqrt() * rho_upper(&m.h, 1.0, 1.0, a, b) + 1e-9);
        }
    }
}

#[test]
fn fejer_normalisation() {
    for t in [1.0, 10.0, 100.0, 1000.0] {
        assert!((fejer_integral(t).unwrap() - 1.0).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sigma_is_bounded_and_symmetric(tau in -5.0f64..5.0) {
        let h = make_laplace(1.0, 1.0).unwrap();
        let s = sigma(&h, tau);
        prop_assert!((s - sigma(&h, -tau)).abs() < 1e-12);
        prop_assert!(s <= transform_l2_norm(&h) + 1e-12);
    }

    #[test]
    fn sigma_closed_form_for_sinc(tau in 0.01f64..4.0) {
        // σ²(τ) = π − sin(πτ)/τ
        let s2 = sigma_squared(&make_sinc(), tau);
        prop_assert!((s2 - (PI - (PI * tau).sin() / tau)).abs() < 1e-8);
    }

    #[test]
    fn limit_covariance_is_symmetric(t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
        let h = make_laplace(2.0, 1.0).unwrap();
        prop_assert!((cov_limit(&h, t1, t2).unwrap() - cov_limit(&h, t2, t1).unwrap()).abs() < 1e-10);
        let cs = cov_limit(&h, t1, t2).unwrap().powi(2);
        prop_assert!(cs <= cov_limit(&h, t1, t1).unwrap() * cov_limit(&h, t2, t2).unwrap() + 1e-10);
    }
}
