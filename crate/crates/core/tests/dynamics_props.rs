use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use penning::dynamics::{
    coulomb_force, run, run_observed, trap_potential, IonState, LaserParams, ModeAmplitudes,
    Scene, SimConfig,
};
use penning::trap::{
    voltage_for_magnetron_frequency, ModeFrequencies, ParticleSpecies, TrapFields, TrapGeometry,
};
use proptest::prelude::*;
use rustfft::FftPlanner;

fn mg_scene(v: Option<f64>) -> (Scene, ModeFrequencies) {
    let sp = ParticleSpecies::mg24();
    let geo = TrapGeometry::default();
    let v = v.unwrap_or_else(|| voltage_for_magnetron_frequency(&sp, &geo, 1.0, 31.6e3).unwrap());
    let scene = Scene::new(sp, geo, TrapFields::new(1.0, v).unwrap());
    let f = scene.frequencies().unwrap();
    (scene, f)
}

fn free_ion(f: &ModeFrequencies, rc: f64, rm: f64, z: f64) -> IonState {
    ModeAmplitudes {
        cyclotron: Complex64::new(rc, 0.0),
        magnetron: Complex64::new(0.0, rm),
    }
    .to_state(z, 0.0, f)
}

proptest! {
    #[test]
    fn coulomb_forces_sum_to_zero(
        pts in prop::collection::vec((-1e-4f64..1e-4, -1e-4f64..1e-4, -1e-4f64..1e-4), 2..12),
    ) {
        let states: Vec<IonState> = pts
            .iter()
            .map(|&(x, y, z)| IonState::at_rest(Vector3::new(x, y, z)))
            .collect();
        let q = penning::constants::ELEMENTARY_CHARGE;
        let f = match coulomb_force(&states, q) {
            Ok(f) => f,
            Err(_) => return Ok(()),
        };
        let total: Vector3<f64> = f.iter().sum();
        let scale: f64 = f.iter().map(|v| v.norm()).sum();
        prop_assert!(total.norm() <= 1e-12 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn identical_seeds_give_identical_runs(seed in any::<u64>()) {
        let (mut scene, f) = mg_scene(None);
        let laser = LaserParams::new(
            Vector3::new(0.8, 0.0, 0.6),
            -0.5 * scene.species.natural_linewidth(),
            1.0,
            50e-6,
            25e-6,
            280e-9,
        )
        .unwrap();
        scene.lasers.push(laser);
        scene.ions.push(free_ion(&f, 2e-6, 5e-6, 1e-6));
        scene.ions.push(free_ion(&f, 1e-6, -5e-6, -1e-6));
        let mut c = SimConfig::for_trap(&f, 5e-4, seed);
        c.detection_efficiency = 0.5;
        c.background_rate = 1e4;
        let a = run(&c, &scene).unwrap();
        let b = run(&c, &scene).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn magnetic_field_alone_keeps_kinetic_energy() {
    let (mut scene, f) = mg_scene(Some(0.0));
    scene.ions.push(IonState::new(Vector3::zeros(), Vector3::new(300.0, -120.0, 0.0)));
    let c = SimConfig {
        sample_stride: 100_000,
        ..SimConfig::for_trap(&f, 0.0, 1)
    };
    let c = SimConfig {
        duration: 1e6 * c.dt,
        ..c
    };
    let ke0 = scene.ions[0].velocity.norm_squared();
    let mut worst: f64 = 0.0;
    run_observed(&c, &scene, |_, s| {
        worst = worst.max((s[0].velocity.norm_squared() / ke0 - 1.0).abs());
    })
    .unwrap();
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn static_trap_energy_drift_below_one_ppm() {
    let (mut scene, f) = mg_scene(None);
    scene.ions.push(free_ion(&f, 5e-6, 20e-6, 10e-6));
    let base = SimConfig::for_trap(&f, 0.0, 1);
    let c = SimConfig {
        duration: 1e6 * base.dt,
        sample_stride: 1,
        ..base
    };
    let (m, q) = (scene.species.mass(), scene.species.charge());
    let (fields, geo) = (scene.fields, scene.geometry);
    let mut energies = Vec::new();
    run_observed(&c, &scene, |_, s| {
        let e = 0.5 * m * s[0].velocity.norm_squared()
            + q * trap_potential(&s[0].position, &fields, &geo);
        energies.push(e);
    })
    .unwrap();
    // window means over whole cyclotron/axial periods remove the bounded
    // per-step oscillation of the splitting scheme
    let w = 10_000;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let first = mean(&energies[..w]);
    let last = mean(&energies[energies.len() - w..]);
    let scale = energies.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let drift = (last - first).abs() / scale;
    assert!(drift < 1e-6, "{drift}");
}

/// Interpolated peak frequency of `|X(f)|` near `target`, Hz.
fn spectral_peak(x: &[f64], dt: f64, target: f64) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex64> = x
        .iter()
        .enumerate()
        .map(|(k, &v)| Complex64::new(v * (0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos()), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * dt);
    let j0 = (target / df).round() as usize;
    let j = (j0 - 20..=j0 + 20)
        .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
        .unwrap();
    let (a, b, c) = (buf[j - 1].norm().ln(), buf[j].norm().ln(), buf[j + 1].norm().ln());
    (j as f64 + 0.5 * (a - c) / (a - 2.0 * b + c)) * df
}

#[test]
fn free_ion_spectrum_matches_mode_frequencies() {
    let (mut scene, f) = mg_scene(None);
    scene.ions.push(free_ion(&f, 5e-6, 20e-6, 0.0));
    let c = SimConfig {
        sample_stride: 1,
        ..SimConfig::for_trap(&f, 20e-3, 1)
    };
    let mut xs = Vec::new();
    run_observed(&c, &scene, |_, s| xs.push(s[0].position.x)).unwrap();
    let [_, _, _, fc_prime, fm] = f.in_hz();
    for target in [fc_prime, fm] {
        let got = spectral_peak(&xs, c.dt, target);
        assert!((got / target - 1.0).abs() < 2e-3, "{got} vs {target}");
    }
}

#[test]
fn detected_rate_matches_expected_scattering() {
    let (mut scene, f) = mg_scene(None);
    scene.lasers.push(
        LaserParams::new(
            Vector3::new(0.8, 0.0, 0.6),
            -0.5 * scene.species.natural_linewidth(),
            0.5,
            50e-6,
            25e-6,
            280e-9,
        )
        .unwrap(),
    );
    scene.ions.push(free_ion(&f, 0.0, 5e-6, 0.0));
    let c = SimConfig::for_trap(&f, 20e-3, 3);
    let (_, stats) = run_observed(&c, &scene, |_, _| {}).unwrap();
    let expect = stats.expected_detections;
    let got = stats.detected_fluorescence as f64;
    assert!((got - expect).abs() < 3.0 * expect.sqrt(), "{got} vs {expect}");
}
