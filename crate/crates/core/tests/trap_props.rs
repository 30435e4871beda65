use penning::constants::{ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE};
use penning::trap::{
    derive_frequencies, max_stable_voltage, voltage_for_magnetron_frequency, ModeFrequencies,
    ParticleSpecies, TrapFields, TrapGeometry,
};
use proptest::prelude::*;

/// Distance between `a` and `b` in units of the float spacing at the larger.
fn ulps(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    let spacing = f64::from_bits(m.to_bits() + 1) - m;
    (a - b).abs() / spacing
}

fn setup() -> impl Strategy<Value = (ParticleSpecies, TrapGeometry, f64, f64)> {
    (
        1.0f64..250.0,
        1u32..4,
        0.1f64..10.0,
        1e-3f64..2e-2,
        0.3f64..1.5,
        0.0f64..0.999,
    )
        .prop_map(|(mass_u, q, b, r0, aspect, frac)| {
            let sp = ParticleSpecies::new(
                q as f64 * ELEMENTARY_CHARGE,
                mass_u * ATOMIC_MASS_UNIT,
                280e-9,
                2.7e8,
            )
            .unwrap();
            let geo = TrapGeometry::new(r0, r0 * aspect).unwrap();
            let v = frac * max_stable_voltage(&sp, &geo, b);
            (sp, geo, b, v)
        })
}

fn freqs(sp: &ParticleSpecies, geo: &TrapGeometry, b: f64, v: f64) -> ModeFrequencies {
    derive_frequencies(sp, geo, &TrapFields::new(b, v).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn mode_identities_within_four_ulp((sp, geo, b, v) in setup()) {
        let f = freqs(&sp, &geo, b, v);
        prop_assert!(ulps(f.omega_c_prime + f.omega_m, f.omega_c) <= 4.0);
        prop_assert!(ulps(f.omega_c_prime * f.omega_m, 0.5 * f.omega_z * f.omega_z) <= 4.0);
        prop_assert!(f.omega_m <= f.omega_c_prime && f.omega_1 <= f.omega_c_prime);
        // omega_m = omega_c/2 - omega_1, so omega_m <= omega_1 exactly when
        // omega_1 >= omega_c/4, i.e. below three quarters of the stability limit
        let frac = v / max_stable_voltage(&sp, &geo, b);
        if frac <= 0.75 * (1.0 - 1e-12) {
            prop_assert!(f.omega_m <= f.omega_1);
        } else if frac > 0.75 * (1.0 + 1e-12) {
            prop_assert!(f.omega_m > f.omega_1);
        }
    }
}

proptest! {
    #[test]
    fn magnetron_rises_and_cyclotron_falls_with_voltage(
        (sp, geo, b, v) in setup(),
        bump in 1.0001f64..1.5,
    ) {
        let v2 = (v * bump).min(0.999 * max_stable_voltage(&sp, &geo, b));
        prop_assume!(v2 > v);
        let (lo, hi) = (freqs(&sp, &geo, b, v), freqs(&sp, &geo, b, v2));
        prop_assert!(hi.omega_m > lo.omega_m);
        prop_assert!(hi.omega_c_prime < lo.omega_c_prime);
    }

    #[test]
    fn voltage_inversion_is_identity((sp, geo, b, v) in setup()) {
        prop_assume!(v > 0.0);
        let f_m = freqs(&sp, &geo, b, v).omega_m / (2.0 * std::f64::consts::PI);
        let v_back = voltage_for_magnetron_frequency(&sp, &geo, b, f_m).unwrap();
        let f_back = freqs(&sp, &geo, b, v_back).omega_m / (2.0 * std::f64::consts::PI);
        prop_assert!(((f_back - f_m) / f_m).abs() < 1e-9);
    }
}
