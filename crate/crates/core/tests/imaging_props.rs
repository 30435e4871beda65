use nalgebra::Vector3;
use penning::dynamics::IonState;
use penning::imaging::{
    accumulate_states, estimate_temperature, gaussian_cloud_image, measure_spot_size, CameraModel,
};
use penning::trap::ParticleSpecies;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

proptest! {
    #[test]
    fn deposited_weight_is_conserved(
        pts in prop::collection::vec((-1e-3f64..1e-3, -1e-3f64..1e-3, 0.0f64..10.0), 1..50),
    ) {
        let cam = CameraModel::default();
        let states: Vec<IonState> = pts
            .iter()
            .map(|&(x, z, _)| IonState::at_rest(Vector3::new(x, 0.0, z)))
            .collect();
        let img = accumulate_states(states.iter().zip(pts.iter().map(|p| p.2)), &cam);
        let total: f64 = pts.iter().map(|p| p.2).sum();
        prop_assert!((img.sum() + img.spill - total).abs() <= 1e-9 * total.max(1.0));
        prop_assert!(img.pixels.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn gaussian_cloud_size_is_recovered(sigma in 10e-6f64..60e-6) {
        let cam = CameraModel::default();
        let img = gaussian_cloud_image((0.0, 0.0), sigma, 1e4, &cam);
        let s = measure_spot_size(&img).unwrap();
        let expect = (sigma * sigma + cam.psf_sigma * cam.psf_sigma).sqrt();
        prop_assert!((s.rms_x / expect - 1.0).abs() < 0.05);
        prop_assert!((s.rms_z / expect - 1.0).abs() < 0.05);
    }
}

#[test]
fn sampled_thermal_clouds_rank_by_temperature() {
    // rms size of a harmonic thermal cloud is sqrt(k T / m w^2)
    let sp = ParticleSpecies::mg24();
    let cam = CameraModel::default();
    let w = 2.0 * std::f64::consts::PI * 196e3;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut last = 0.0;
    for t in [0.02, 0.05, 0.1, 0.2, 0.5] {
        let sigma = (penning::constants::BOLTZMANN * t / (sp.mass() * w * w)).sqrt();
        let d = Normal::new(0.0, sigma).unwrap();
        let states: Vec<IonState> = (0..20_000)
            .map(|_| IonState::at_rest(Vector3::new(d.sample(&mut rng), 0.0, d.sample(&mut rng))))
            .collect();
        let img = accumulate_states(states.iter().map(|s| (s, 1.0)), &cam);
        let s = measure_spot_size(&img).unwrap();
        let est = estimate_temperature(s.rms_x, w, &sp, cam.psf_sigma).unwrap();
        assert!(est.kelvin > last, "{t} K -> {est:?}");
        last = est.kelvin;
    }
}
