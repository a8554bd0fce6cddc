use std::f64::consts::PI;

use irfcorr::kernel::*;
use irfcorr::quadrature::Integrator;
use proptest::prelude::*;

fn spectral_mass(k: &Kernel, half_width: f64) -> f64 {
    let pts: Vec<f64> = (-200..=200).map(|i| half_width * i as f64 / 200.0).collect();
    Integrator::new(1e-12, 1e-12)
        .integrate_points(|l| k.power(l), &pts)
        .value
        / (2.0 * PI)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn plancherel_triangular(delta in 0.2f64..20.0, c in 0.5f64..3.0) {
        let k = make_triangular(delta, c).unwrap();
        let freq = spectral_mass(&k, 4000.0 * delta);
        prop_assert!((freq / k.l2_norm().powi(2) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn plancherel_laplace(delta in 0.2f64..20.0, c in 0.5f64..3.0) {
        let k = make_laplace(delta, c).unwrap();
        let l = 2000.0 * delta;
        // |g*|² ≈ c²Δ⁴/λ⁴ beyond the window
        let tail = 2.0 * c * c * delta.powi(4) / (3.0 * l.powi(3)) / (2.0 * PI);
        let freq = spectral_mass(&k, l) + tail;
        prop_assert!((freq / k.l2_norm().powi(2) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn transform_at_zero_is_total_mass(delta in 0.1f64..50.0, c in 0.1f64..5.0) {
        for k in [make_triangular(delta, c).unwrap(), make_laplace(delta, c).unwrap(), make_one_sided_box(delta, c).unwrap()] {
            prop_assert!((k.ftf(0.0).re - c).abs() < 1e-9 * c);
        }
    }

    #[test]
    fn even_kernels_have_real_transforms(delta in 0.1f64..50.0, lambda in -100.0f64..100.0) {
        for k in [make_triangular(delta, 1.0).unwrap(), make_laplace(delta, 1.0).unwrap()] {
            prop_assert!(k.ftf(lambda).im.abs() < 1e-12);
            prop_assert!((k.ftf(lambda).re - k.ftf(-lambda).re).abs() < 1e-12);
        }
    }

    #[test]
    fn autocorrelation_peaks_at_zero(delta in 0.5f64..5.0, lag in 0.01f64..3.0) {
        let k = make_laplace(delta, 1.0).unwrap();
        let at0 = autocorrelation(&k, 0.0);
        prop_assert!((at0 - k.l2_norm().powi(2)).abs() < 1e-8 * at0);
        prop_assert!(autocorrelation(&k, lag) < at0);
    }

    #[test]
    fn triangular_transform_bounded_by_c(delta in 0.1f64..50.0, lambda in -500.0f64..500.0) {
        let k = make_triangular(delta, 2.0).unwrap();
        prop_assert!(k.ftf(lambda).norm() <= 2.0 + 1e-12);
    }
}

#[test]
fn delta_like_families_approach_c_on_compacts() {
    for fam in [KernelFamily::triangular(2.0).unwrap(), KernelFamily::laplace(2.0).unwrap()] {
        let errs: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
            .iter()
            .map(|d| {
                let g = fam.member(*d).unwrap();
                (0..=20)
                    .map(|i| (g.ftf(-5.0 + 0.5 * i as f64) - 2.0).norm())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{} {errs:?}", fam.name());
        assert!(errs[3] < 1e-3);
    }
}

#[test]
fn kernel_specs_roundtrip_through_json() {
    let spec = KernelSpec::Laplace { delta: 10.0, c: 2.0 };
    let text = serde_json::to_string(&spec).unwrap();
    assert_eq!(text, r#"{"kind":"laplace","delta":10.0,"c":2.0}"#);
    let back: KernelSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, spec);
    assert_eq!(back.build().unwrap().l2_norm(), make_laplace(10.0, 2.0).unwrap().l2_norm());
    let fam: FamilySpec = serde_json::from_str(r#"{"kind":"triangular","c":1.5}"#).unwrap();
    assert_eq!(fam.c(), 1.5);
    assert!(KernelSpec::Tabulated { path: "/nonexistent.csv".into() }.build().is_err());
}
