//! Whole-run driver: integration, photon scattering, detection and sampling.
//!
//! Three independent random streams are derived from the seed: one for the
//! scattering events that act back on the ions, one for the detector and one
//! for background light. The trajectory therefore does not depend on the
//! detection efficiency.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::trap::{derive_frequencies, ModeFrequencies, ParticleSpecies, TrapFields, TrapGeometry};

use super::fields::{AxialisationDrive, DipoleProbe};
use super::integrator::{FieldSet, Integrator};
use super::laser::{scattering_rate, LaserParams, ScatteringMode};
use super::IonState;

const STREAM_DYNAMICS: u64 = 0;
const STREAM_DETECTION: u64 = 1;
const STREAM_BACKGROUND: u64 = 2;

/// Numerical and detection settings of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub rng_seed: u64,
    pub detection_efficiency: f64,
    pub coulomb_enabled: bool,
    #[serde(with = "mode_serde")]
    pub scattering_mode: ScatteringMode,
    /// Record every `sample_stride`-th step.
    pub sample_stride: usize,
    /// Homogeneous background count rate, 1/s.
    pub background_rate: f64,
}

mod mode_serde {
    use super::ScatteringMode;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &ScatteringMode, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(m.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ScatteringMode, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl SimConfig {
    /// Default step `T_c' / 100` and detection efficiency `1e-3`.
    pub fn for_trap(freqs: &ModeFrequencies, duration: f64, seed: u64) -> Self {
        Self {
            dt: 2.0 * std::f64::consts::PI / freqs.omega_c_prime / 100.0,
            duration,
            rng_seed: seed,
            detection_efficiency: 1e-3,
            coulomb_enabled: true,
            scattering_mode: ScatteringMode::MonteCarlo,
            sample_stride: 10,
            background_rate: 0.0,
        }
    }

    pub fn validate(&self, freqs: &ModeFrequencies) -> Result<()> {
        ensure(self.dt > 0.0 && self.dt.is_finite(), || {
            format!("dt must be positive, got {}", self.dt)
        })?;
        let limit = 2.0 * std::f64::consts::PI / freqs.omega_c_prime / 50.0;
        ensure(self.dt <= limit, || {
            format!(
                "dt = {} s exceeds the resolution limit {} s",
                self.dt, limit
            )
        })?;
        ensure(self.duration >= 0.0 && self.duration.is_finite(), || {
            format!("duration must be non-negative, got {}", self.duration)
        })?;
        ensure((0.0..=1.0).contains(&self.detection_efficiency), || {
            format!(
                "detection efficiency must lie in [0, 1], got {}",
                self.detection_efficiency
            )
        })?;
        ensure(self.sample_stride > 0, || {
            "sample stride must be positive".into()
        })?;
        ensure(
            self.background_rate >= 0.0 && self.background_rate.is_finite(),
            || {
                format!(
                    "background rate must be non-negative, got {}",
                    self.background_rate
                )
            },
        )?;
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }
}

/// Everything physical about a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub species: ParticleSpecies,
    pub geometry: TrapGeometry,
    pub fields: TrapFields,
    pub lasers: Vec<LaserParams>,
    pub drive: Option<AxialisationDrive>,
    pub probe: Option<DipoleProbe>,
    pub ions: Vec<IonState>,
}

impl Scene {
    pub fn new(species: ParticleSpecies, geometry: TrapGeometry, fields: TrapFields) -> Self {
        Self {
            species,
            geometry,
            fields,
            lasers: Vec::new(),
            drive: None,
            probe: None,
            ions: Vec::new(),
        }
    }

    pub fn frequencies(&self) -> Result<ModeFrequencies> {
        derive_frequencies(&self.species, &self.geometry, &self.fields)
    }

    fn field_set(&self, coulomb: bool) -> FieldSet<'_> {
        FieldSet {
            species: &self.species,
            geometry: &self.geometry,
            fields: &self.fields,
            drive: self.drive.as_ref(),
            probe: self.probe.as_ref(),
            coulomb,
        }
    }
}

/// Detected photon arrival times with the phase reference of the rf probe
/// (or of the coupling drive when no probe is present).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhotonRecord {
    pub timestamps: Vec<f64>,
    pub reference_frequency: f64,
    pub reference_phase: f64,
    pub duration: f64,
}

impl PhotonRecord {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Mean detected count rate, 1/s.
    pub fn rate(&self) -> f64 {
        if self.duration > 0.0 {
            self.timestamps.len() as f64 / self.duration
        } else {
            0.0
        }
    }
}

/// Sampled states of every ion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub n_ions: usize,
    /// Row-major: sample `k`, ion `i` at `k * n_ions + i`.
    pub states: Vec<IonState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sample(&self, k: usize) -> &[IonState] {
        &self.states[k * self.n_ions..(k + 1) * self.n_ions]
    }

    pub fn ion(&self, i: usize) -> impl Iterator<Item = &IonState> + '_ {
        self.states.iter().skip(i).step_by(self.n_ions.max(1))
    }

    fn push(&mut self, t: f64, states: &[IonState]) {
        self.n_ions = states.len();
        self.times.push(t);
        self.states.extend_from_slice(states);
    }
}

/// Counters gathered during a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunStats {
    pub steps: u64,
    pub scattered: u64,
    /// Detection count expected from the instantaneous rates, `eps * sum R dt`.
    pub expected_detections: f64,
    pub detected_fluorescence: u64,
    pub background: u64,
}

/// Run and keep every `sample_stride`-th state.
pub fn run(config: &SimConfig, scene: &Scene) -> Result<(Trajectory, PhotonRecord)> {
    let mut traj = Trajectory::default();
    let (photons, _) = run_observed(config, scene, |t, s| traj.push(t, s))?;
    Ok((traj, photons))
}

/// Poisson variate with a small mean by inversion.
fn poisson_small<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let u: f64 = rng.random();
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut k = 0u64;
    while u > cdf && k < 1000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

fn isotropic<R: Rng>(rng: &mut R) -> Vector3<f64> {
    let cz: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    let sz = (1.0 - cz * cz).max(0.0).sqrt();
    Vector3::new(sz * phi.cos(), sz * phi.sin(), cz)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

/// Run and hand every sampled step to `observer(t, states)`.
///
/// Errors carry the time at which an ion left the trap.
pub fn run_observed<F>(
    config: &SimConfig,
    scene: &Scene,
    mut observer: F,
) -> Result<(PhotonRecord, RunStats)>
where
    F: FnMut(f64, &[IonState]),
{
    let freqs = scene.frequencies()?;
    config.validate(&freqs)?;
    if scene.ions.is_empty() {
        return Err(Error::InvalidParameter("scene has no ions".into()));
    }
    let fs = scene.field_set(config.coulomb_enabled);
    let mut integ = Integrator::new(&fs, config.dt, &scene.ions)?;
    let mut dyn_rng = stream(config.rng_seed, STREAM_DYNAMICS);
    let mut det_rng = stream(config.rng_seed, STREAM_DETECTION);
    let n_steps = config.n_steps();
    let dt = config.dt;
    let eps = config.detection_efficiency;
    let mut stats = RunStats::default();
    let mut stamps: Vec<f64> = Vec::new();
    let mut step_stamps: Vec<f64> = Vec::new();
    let kicks: Vec<(f64, Vector3<f64>)> = scene
        .lasers
        .iter()
        .map(|l| (l.photon_momentum(), l.direction()))
        .collect();

    for n in 0..n_steps {
        let t = n as f64 * dt;
        step_stamps.clear();
        let mode = config.scattering_mode;
        let lasers = &scene.lasers;
        let species = &scene.species;
        let mut scattered = 0u64;
        let mut expected = 0.0;
        integ.step(&fs, |_, state| {
            let mut force = Vector3::zeros();
            for (laser, &(hk, dir)) in lasers.iter().zip(&kicks) {
                let rate = scattering_rate(state, laser, species);
                match mode {
                    ScatteringMode::ContinuousDrag => force += dir * (hk * rate),
                    ScatteringMode::MonteCarlo => {
                        expected += eps * rate * dt;
                        let k = poisson_small(&mut dyn_rng, rate * dt);
                        for _ in 0..k {
                            force += (dir + isotropic(&mut dyn_rng)) * (hk / dt);
                            if eps > 0.0 && det_rng.random::<f64>() < eps {
                                step_stamps.push(t + det_rng.random::<f64>() * dt);
                            }
                        }
                        scattered += k;
                    }
                }
            }
            force
        })?;
        stats.scattered += scattered;
        stats.expected_detections += expected;
        if n % config.sample_stride as u64 == 0 {
            observer(t, integ.synced());
        }
        if !step_stamps.is_empty() {
            step_stamps.sort_by(f64::total_cmp);
            stats.detected_fluorescence += step_stamps.len() as u64;
            stamps.extend_from_slice(&step_stamps);
        }
    }
    stats.steps = n_steps;
    let duration = n_steps as f64 * dt;

    if config.background_rate > 0.0 {
        let mut bg_rng = stream(config.rng_seed, STREAM_BACKGROUND);
        let mut bg = Vec::new();
        let mut t = 0.0;
        loop {
            let u: f64 = bg_rng.random();
            t += -(1.0 - u).ln() / config.background_rate;
            if t >= duration {
                break;
            }
            bg.push(t);
        }
        stats.background = bg.len() as u64;
        stamps = merge_sorted(&stamps, &bg);
    }
    make_strictly_increasing(&mut stamps);

    let (reference_frequency, reference_phase) = match (&scene.probe, &scene.drive) {
        (Some(p), _) => (p.frequency, p.phase),
        (None, Some(d)) => (d.frequency, d.phase),
        _ => (0.0, 0.0),
    };
    Ok((
        PhotonRecord {
            timestamps: stamps,
            reference_frequency,
            reference_phase,
            duration,
        },
        stats,
    ))
}

fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Break exact ties by moving later events up one ulp.
fn make_strictly_increasing(t: &mut [f64]) {
    for k in 1..t.len() {
        if t[k] <= t[k - 1] {
            t[k] = t[k - 1].next_up();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trap::TrapGeometry;

    fn scene() -> Scene {
        let sp = ParticleSpecies::mg24();
        let mut s = Scene::new(
            sp,
            TrapGeometry::default(),
            TrapFields::new(1.0, 4.7).unwrap(),
        );
        s.ions.push(IonState::at_rest(Vector3::new(2e-6, 0.0, 0.0)));
        s.lasers.push(
            LaserParams::new(
                Vector3::x(),
                -0.5 * sp.natural_linewidth(),
                0.5,
                50e-6,
                0.0,
                280e-9,
            )
            .unwrap(),
        );
        s
    }

    #[test]
    fn rejects_coarse_step() {
        let s = scene();
        let f = s.frequencies().unwrap();
        let mut c = SimConfig::for_trap(&f, 1e-5, 1);
        c.dt *= 3.0;
        assert!(matches!(run(&c, &s), Err(Error::InvalidParameter(_))));
        c.dt /= 3.0;
        c.detection_efficiency = 1.5;
        assert!(run(&c, &s).is_err());
    }

    #[test]
    fn deterministic_and_detection_independent() {
        let s = scene();
        let f = s.frequencies().unwrap();
        let mut c = SimConfig::for_trap(&f, 2e-4, 42);
        c.detection_efficiency = 0.05;
        let (t1, p1) = run(&c, &s).unwrap();
        let (t2, p2) = run(&c, &s).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(p1, p2);
        assert!(!p1.is_empty());
        c.detection_efficiency = 0.0;
        let (t3, p3) = run(&c, &s).unwrap();
        assert!(p3.is_empty());
        assert_eq!(t1, t3);
    }

    #[test]
    fn timestamps_ordered_and_in_range() {
        let s = scene();
        let f = s.frequencies().unwrap();
        let mut c = SimConfig::for_trap(&f, 2e-4, 7);
        c.detection_efficiency = 0.2;
        c.background_rate = 2e4;
        let (_, p) = run(&c, &s).unwrap();
        assert!(p.timestamps.windows(2).all(|w| w[1] > w[0]));
        assert!(p
            .timestamps
            .iter()
            .all(|&t| (0.0..=p.duration).contains(&t)));
    }

    #[test]
    fn continuous_drag_emits_nothing() {
        let s = scene();
        let f = s.frequencies().unwrap();
        let mut c = SimConfig::for_trap(&f, 1e-4, 7);
        c.scattering_mode = ScatteringMode::ContinuousDrag;
        let (_, p) = run(&c, &s).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn poisson_small_mean() {
        let mut r = stream(3, 0);
        let n = 200_000;
        let mean = 0.7;
        let sum: u64 = (0..n).map(|_| poisson_small(&mut r, mean)).sum();
        let m = sum as f64 / n as f64;
        assert!((m - mean).abs() < 4.0 * (mean / n as f64).sqrt());
    }
}
