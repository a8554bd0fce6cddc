use irfcorr::bounds::*;
use irfcorr::kernel::*;
use irfcorr::spectral::CovarianceModel;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn k_is_decreasing(x1 in 0.0f64..50.0, dx in 1e-3f64..10.0) {
        prop_assert!(k_of_x(x1 + dx).unwrap() < k_of_x(x1).unwrap());
    }

    #[test]
    fn ci_half_width_grows_with_confidence(var in 0.01f64..5.0, c1 in 0.0f64..0.98, dc in 0.001f64..0.01) {
        let a = pointwise_ci(var, 100.0, c1).unwrap();
        let b = pointwise_ci(var, 100.0, c1 + dc).unwrap();
        prop_assert!(b.half_width > a.half_width);
        prop_assert!((2.0 * k_of_x(a.u).unwrap() - (1.0 - c1)).abs() < 1e-9);
    }

    #[test]
    fn b_squared_is_nonnegative(tau in 0.0f64..1.0) {
        let h = make_hilbert_sinc();
        prop_assert!(b_squared(&h, 0.0, 1.0, tau).unwrap() >= 0.0);
    }
}

#[test]
fn report_curves_are_monotone_and_capped() {
    let xs: Vec<f64> = (1..=30).map(|k| 0.5 * k as f64).collect();
    let h = make_sinc();
    let tail = |u: f64| (-u * u / 2.0).exp().min(1.0);
    let reports = [
        theorem3_report(2.0, 0.0, &xs).unwrap(),
        corollary1_report(&h, 0.0, 1.0, &xs, 0.5, &tail).unwrap(),
        corollary2_report(&h, 0.0, 1.0, &xs, &tail).unwrap(),
    ];
    for r in &reports {
        assert!(r.bound_values.windows(2).all(|w| w[1] <= w[0]), "{:?}", r.method);
        assert!(r.bound_values.iter().all(|v| *v <= 1.0));
        assert!(r.raw_bound_values.iter().zip(&r.bound_values).all(|(a, b)| b <= a));
    }
    let json = serde_json::to_value(&reports[2]).unwrap();
    for key in ["method", "x", "bound", "constants", "settings"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert_eq!(json["method"], "corollary2");
    assert!(theorem3_report(1.0, 0.0, &[2.0, 1.0]).is_err());
}

#[test]
fn theorem4_sinc_triangular() {
    let model = CovarianceModel::new(make_sinc(), Some(make_triangular(100.0, 1.0).unwrap()), 1.0).unwrap();
    let settings = Theorem4Settings { variance_grid: 5, ..Default::default() };
    let k = theorem4_constants(&model, 500.0, 0.0, 1.0, 0.5, &settings).unwrap();
    assert!(k.a_t_delta.is_finite() && k.a_t_delta > 0.0);
    assert!(!k.degenerate);
    assert!(k.theta_star > 0.0 && k.theta_star < 1.0);
    assert!((k.bound(3.0 * k.a_t_delta) - 2.0 * (-3.0f64).exp()).abs() < 1e-12);
    let rep = theorem4_report_from(&k, 500.0, 0.0, 1.0, 0.5, &[1.0, 2.0, 4.0, 1e6]);
    assert!(rep.bound_values.windows(2).all(|w| w[1] <= w[0]));
    assert!(rep.bound_values[3] < 1e-100);
    assert!(rep.constants.contains_key("A_T_delta") && rep.constants.contains_key("theta_star"));

    // the exact pseudometric on a coarse grid yields a smaller constant
    let exact = Theorem4Settings {
        surrogate: RhoSurrogate::Exact { points: 6 },
        variance_grid: 5,
        ..Default::default()
    };
    let ke = theorem4_constants(&model, 500.0, 0.0, 1.0, 0.5, &exact).unwrap();
    assert!(ke.a_t_delta <= k.a_t_delta, "{} > {}", ke.a_t_delta, k.a_t_delta);
    assert!((ke.inf_var_z - k.inf_var_z).abs() < 1e-12);
}

#[test]
fn theorem4_needs_g_and_valid_r() {
    let model = CovarianceModel::new(make_sinc(), None, 1.0).unwrap();
    assert!(theorem4_bound(&model, 10.0, 0.0, 1.0, 0.5, 1.0).is_err());
    let model = CovarianceModel::new(make_sinc(), Some(make_triangular(10.0, 1.0).unwrap()), 1.0).unwrap();
    assert!(theorem4_bound(&model, 10.0, 0.0, 1.0, 1.5, 1.0).is_err());
}
