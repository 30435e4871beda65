use penning::envelope::{
    classify_regime, default_tolerance, envelope_eigenvalues, evolve_envelope,
    find_stable_orbit_radius, EnvelopeParams, EnvelopeState, OverlapModel,
};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = EnvelopeParams> {
    (0.0f64..5e3, 0.0f64..1e4, -1e3f64..1e3)
        .prop_map(|(d, gc, gm)| EnvelopeParams::new(d, gc, gm).unwrap())
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn eigenvalues_match_trace_and_determinant(p in params()) {
        let (l1, l2) = envelope_eigenvalues(&p);
        let trace = -(p.gamma_c + p.gamma_m);
        let det = p.gamma_c * p.gamma_m + p.delta * p.delta;
        let s = p.rate_scale();
        prop_assert!(rel((l1 + l2).re, trace, s) <= 1e-12);
        prop_assert!((l1 + l2).im.abs() <= 1e-12 * s);
        prop_assert!(rel((l1 * l2).re, det, s * s) <= 1e-12);
        prop_assert!((l1 * l2).im.abs() <= 1e-12 * s * s);
    }
}

proptest! {
    #[test]
    fn evolution_is_a_semigroup(
        p in params(),
        rc in 0.0f64..2e-5,
        rm in 0.0f64..2e-5,
        t1 in 0.0f64..2e-3,
        t2 in 0.0f64..2e-3,
    ) {
        let s0 = EnvelopeState::new(rc, rm).unwrap();
        let direct = evolve_envelope(&p, &s0, t1 + t2).unwrap().signed();
        let mid = evolve_envelope(&p, &s0, t1).unwrap();
        let twice = evolve_envelope(&p, &mid, t2).unwrap().signed();
        let norm = direct.0.hypot(direct.1).max(1e-30);
        prop_assert!((direct.0 - twice.0).hypot(direct.1 - twice.1) <= 1e-10 * norm);
    }

    #[test]
    fn pure_rotation_conserves_norm(
        delta in 1.0f64..1e4,
        rc in 0.0f64..2e-5,
        rm in 1e-7f64..2e-5,
        t in 0.0f64..1e-1,
    ) {
        let p = EnvelopeParams::new(delta, 0.0, 0.0).unwrap();
        let s = evolve_envelope(&p, &EnvelopeState::new(rc, rm).unwrap(), t).unwrap();
        let n0 = rc * rc + rm * rm;
        prop_assert!(((s.r_c().powi(2) + s.r_m().powi(2)) / n0 - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn regime_ignores_time_units(p in params(), k in 1e-3f64..1e3) {
        let q = EnvelopeParams::new(p.delta * k, p.gamma_c * k, p.gamma_m * k).unwrap();
        let a = classify_regime(&p, default_tolerance(&p)).unwrap().kind;
        let b = classify_regime(&q, default_tolerance(&q)).unwrap().kind;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn stable_radius_shrinks_with_coupling(d1 in 0.05f64..0.95, d2 in 0.05f64..0.95) {
        prop_assume!((d1 - d2).abs() > 1e-3);
        let m = OverlapModel::new(20e-6, 0.0, 6000.0, -300.0).unwrap();
        let full = (6000.0f64 * 300.0).sqrt();
        let r = |d: f64| find_stable_orbit_radius(&m, d * full).map(|o| o.radius);
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        if let (Ok(a), Ok(b)) = (r(lo), r(hi)) {
            prop_assert!(b < a, "{} {}", a, b);
        }
    }
}
