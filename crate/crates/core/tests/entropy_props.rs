use irfcorr::entropy::*;
use irfcorr::kernel::*;
use irfcorr::spectral::sigma;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn uniform_covering_closed_form(len in 0.1f64..10.0, eps in 0.01f64..5.0) {
        let n = covering_number(&Pseudometric::uniform_d(), 0.0, len, eps).unwrap();
        let expect = ((len / (2.0 * eps)) - 1e-9).ceil().max(1.0) as u64;
        prop_assert_eq!(n, expect);
    }

    #[test]
    fn covering_numbers_nonincreasing(e1 in 0.05f64..1.5, e2 in 0.05f64..1.5) {
        let p = Pseudometric::sqrt_sigma(&make_sinc());
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(covering_number(&p, 0.0, 1.0, lo).unwrap() >= covering_number(&p, 0.0, 1.0, hi).unwrap());
    }

    #[test]
    fn dominated_metric_needs_fewer_balls(eps in 0.05f64..1.0) {
        // σ ≤ ‖H*‖₂^{1/2} √σ, so σ-balls of radius s·ε cover at least as well
        let h = make_sinc();
        let s = (2.0 * std::f64::consts::PI).sqrt().sqrt();
        let n_sigma = covering_number(&Pseudometric::sigma(&h), 0.0, 1.0, s * eps).unwrap();
        let n_sqrt = covering_number(&Pseudometric::sqrt_sigma(&h), 0.0, 1.0, eps).unwrap();
        prop_assert!(n_sigma <= n_sqrt);
    }
}

#[test]
fn greedy_covering_achieves_its_radius() {
    let h = make_sinc();
    let grid: Vec<f64> = (0..=40).map(|k| 0.025 * k as f64).collect();
    let m: Vec<Vec<f64>> = grid
        .iter()
        .map(|a| grid.iter().map(|b| sigma(&h, b - a)).collect())
        .collect();
    let p = Pseudometric::from_grid(PseudometricKind::Custom, &grid, m).unwrap();
    let inv = Pseudometric::sigma(&h);
    for eps in [0.05, 0.2, 0.6] {
        let cov = covering(&p, 0.0, 1.0, eps).unwrap();
        assert_eq!(cov.method, CoveringMethod::Greedy);
        assert!(cov.achieved_radius.unwrap() <= eps + 1e-12);
        let exact = covering_number(&inv, 0.0, 1.0, eps).unwrap();
        assert!(cov.count >= 1 && cov.count <= 2 * exact + 1, "{} vs {exact}", cov.count);
    }
}

#[test]
fn entropy_integrals_for_sinc_are_finite() {
    let h = make_sinc();
    for p in [Pseudometric::sigma(&h), Pseudometric::sqrt_sigma(&h)] {
        let r = entropy_integral(&p, 0.0, 1.0, 0.5, 0.5).unwrap();
        assert!(r.value.is_finite() && !r.divergent, "{r:?}");
    }
    // shrinking upper limits drive the integral to zero
    let p = Pseudometric::sqrt_sigma(&h);
    let vals: Vec<f64> = [0.5, 0.05, 0.005]
        .iter()
        .map(|u| entropy_integral(&p, 0.0, 1.0, *u, 0.5).unwrap().value)
        .collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]) && vals[2] < 0.05, "{vals:?}");
}

#[test]
fn profile_csv_has_header_and_rows() {
    let prof = EntropyProfile::compute(&Pseudometric::uniform_d(), 0.0, 1.0, &[0.1, 0.2, 0.5]).unwrap();
    let mut buf = Vec::new();
    prof.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "eps,N,H");
    assert_eq!(lines[1], "0.5,1,0");
    assert_eq!(lines[3], "0.1,5,1.6094379124341003");
    assert_eq!(lines.len(), 4);
}
