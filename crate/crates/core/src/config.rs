//! TOML run configuration. Sections mirror the modules and every physical
//! quantity carries its unit in the key name (`trap.b_tesla`, `laser.waist_m`).
//!
//! Optional keys are filled in by [`Config::resolve`]; the resolved form is what
//! gets echoed into manifests, so a run never depends on a value that is not
//! written down.
//!
//! ```
//! use penning::config::Config;
//!
//! let mut cfg: Config = toml::from_str(r#"
//!     [trap]
//!     b_tesla = 1.0
//!     magnetron_hz = 31.6e3
//!
//!     [sim]
//!     duration_s = 1e-3
//!     seed = 7
//! "#).unwrap();
//! cfg.resolve().unwrap();
//! let v = cfg.trap.as_ref().unwrap().v_volts.unwrap();
//! assert!((v - 4.72).abs() < 0.01);
//! ```

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{COULOMB_CONSTANT, MG24_MASS_U, MG_LINEWIDTH_HZ, MG_WAVELENGTH};
use crate::dynamics::{
    AxialisationDrive, DipoleProbe, IonState, LaserParams, ModeAmplitudes, Scene, SimConfig,
    DEFAULT_KAPPA,
};
use crate::envelope::{EnvelopeParams, EnvelopeState};
use crate::error::{Error, Result};
use crate::imaging::CameraModel;
use crate::trap::{
    derive_frequencies, voltage_for_magnetron_frequency, ModeFrequencies, ParticleSpecies,
    TrapFields, TrapGeometry,
};

/// Golden angle, rad. Staggers the mode phases of an incoherent cloud.
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub species: SpeciesSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap: Option<TrapSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laser: Option<LaserSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSection>,
    #[serde(default)]
    pub ions: IonsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeciesSection {
    pub mass_u: f64,
    pub charge_e: f64,
    pub wavelength_m: f64,
    pub linewidth_hz: f64,
}

impl Default for SpeciesSection {
    fn default() -> Self {
        Self {
            mass_u: MG24_MASS_U,
            charge_e: 1.0,
            wavelength_m: MG_WAVELENGTH,
            linewidth_hz: MG_LINEWIDTH_HZ,
        }
    }
}

/// Give either `v_volts` or `magnetron_hz`; resolution replaces the latter
/// with the voltage that produces it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub b_tesla: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_volts: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetron_hz: Option<f64>,
    #[serde(default = "default_r0")]
    pub r0_m: f64,
    /// Defaults to the ideal `r0 / sqrt 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0_m: Option<f64>,
}

fn default_r0() -> f64 {
    5e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserSection {
    /// Cyclic detuning `Delta / 2 pi`, negative is red.
    pub detuning_hz: f64,
    pub saturation: f64,
    pub waist_m: f64,
    #[serde(default)]
    pub offset_m: f64,
    #[serde(default = "default_beam")]
    pub direction: [f64; 3],
}

fn default_beam() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    /// Zero leaves the drive off.
    pub amplitude_v: f64,
    /// Defaults to the true cyclotron frequency of the trap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub amplitude_v_per_m: f64,
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default = "default_beam")]
    pub direction: [f64; 3],
}

/// How the initial mode phases of several ions relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arrangement {
    /// Shared mode amplitudes; more than one ion sits on a rigidly rotating
    /// ring in Coulomb equilibrium.
    Coherent,
    /// Magnetron and cyclotron phases staggered ion to ion.
    Incoherent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IonsSection {
    pub count: usize,
    pub magnetron_radius_m: f64,
    pub magnetron_phase_rad: f64,
    pub cyclotron_radius_m: f64,
    pub cyclotron_phase_rad: f64,
    pub axial_amplitude_m: f64,
    pub arrangement: Arrangement,
    /// Ring rotation rate of a coherent cluster as a fraction of `w_c`.
    pub crystal_rotation: f64,
}

impl Default for IonsSection {
    fn default() -> Self {
        Self {
            count: 1,
            magnetron_radius_m: 0.0,
            magnetron_phase_rad: 0.0,
            cyclotron_radius_m: 0.0,
            cyclotron_phase_rad: 0.0,
            axial_amplitude_m: 0.0,
            arrangement: Arrangement::Coherent,
            crystal_rotation: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    /// Defaults to `T_c' / 100`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    pub duration_s: f64,
    pub seed: u64,
    #[serde(default = "default_efficiency")]
    pub detection_efficiency: f64,
    #[serde(default = "default_true")]
    pub coulomb: bool,
    #[serde(default = "default_mode")]
    pub scattering_mode: String,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default)]
    pub background_rate_hz: f64,
}

fn default_efficiency() -> f64 {
    1e-3
}

fn default_true() -> bool {
    true
}

fn default_mode() -> String {
    "monte-carlo".into()
}

fn default_stride() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraSection {
    pub pixel_pitch_m: f64,
    pub magnification: f64,
    pub psf_sigma_m: f64,
    pub width_px: usize,
    pub height_px: usize,
    pub exposure_s: f64,
    pub view_axis: [f64; 3],
}

impl Default for CameraSection {
    fn default() -> Self {
        Self {
            pixel_pitch_m: 13e-6,
            magnification: 1.0,
            psf_sigma_m: 8e-6,
            width_px: 65,
            height_px: 65,
            exposure_s: 0.1,
            view_axis: [0.0, 1.0, 0.0],
        }
    }
}

/// Photon-correlation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub bin_width_s: f64,
    pub max_lag_s: f64,
    pub snr_threshold: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            bin_width_s: 1e-7,
            max_lag_s: 1e-4,
            snr_threshold: crate::photon_stats::DEFAULT_SNR_THRESHOLD,
        }
    }
}

/// Inputs of the `envelope` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSection {
    pub delta_per_s: f64,
    pub gamma_c_per_s: f64,
    pub gamma_m_per_s: f64,
    pub r_c0_m: f64,
    pub r_m0_m: f64,
    pub duration_s: f64,
    pub dt_s: f64,
}

impl EnvelopeSection {
    pub fn params(&self) -> Result<(EnvelopeParams, EnvelopeState)> {
        Ok((
            EnvelopeParams::new(self.delta_per_s, self.gamma_c_per_s, self.gamma_m_per_s)?,
            EnvelopeState::new(self.r_c0_m, self.r_m0_m)?,
        ))
    }
}

fn vec3(v: [f64; 3]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

fn missing(section: &str) -> Error {
    Error::Config(format!("missing [{section}] section"))
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Replace every optional key by its value so the config describes the run
    /// completely. Idempotent.
    pub fn resolve(&mut self) -> Result<()> {
        let species = self.particle()?;
        let Some(trap) = self.trap.as_mut() else {
            return Ok(());
        };
        let z0 = *trap
            .z0_m
            .get_or_insert(trap.r0_m / std::f64::consts::SQRT_2);
        let geometry = TrapGeometry::new(trap.r0_m, z0)?;
        match (trap.v_volts, trap.magnetron_hz.take()) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give trap.v_volts or trap.magnetron_hz, not both".into(),
                ))
            }
            (None, Some(f_m)) => {
                trap.v_volts = Some(voltage_for_magnetron_frequency(
                    &species,
                    &geometry,
                    trap.b_tesla,
                    f_m,
                )?)
            }
            (None, None) => return Err(Error::Config("trap needs v_volts or magnetron_hz".into())),
            (Some(_), None) => {}
        }
        let freqs = self.frequencies()?;
        if let Some(d) = self.drive.as_mut() {
            d.frequency_hz.get_or_insert(freqs.omega_c / (2.0 * PI));
        }
        if let Some(s) = self.sim.as_mut() {
            s.dt_s
                .get_or_insert(1.0 / (freqs.omega_c_prime / (2.0 * PI)) / 100.0);
        }
        Ok(())
    }

    pub fn particle(&self) -> Result<ParticleSpecies> {
        let s = &self.species;
        ParticleSpecies::from_atomic_units(s.mass_u, s.charge_e)?
            .with_transition(s.wavelength_m, 2.0 * PI * s.linewidth_hz)
    }

    fn trap_parts(&self) -> Result<(TrapGeometry, TrapFields)> {
        let t = self.trap.as_ref().ok_or_else(|| missing("trap"))?;
        let z0 = t
            .z0_m
            .ok_or_else(|| Error::Config("unresolved trap.z0_m".into()))?;
        let v = t
            .v_volts
            .ok_or_else(|| Error::Config("unresolved trap.v_volts".into()))?;
        Ok((
            TrapGeometry::new(t.r0_m, z0)?,
            TrapFields::new(t.b_tesla, v)?,
        ))
    }

    pub fn frequencies(&self) -> Result<ModeFrequencies> {
        let (geometry, fields) = self.trap_parts()?;
        derive_frequencies(&self.particle()?, &geometry, &fields)
    }

    pub fn laser_params(&self) -> Result<Option<LaserParams>> {
        let Some(l) = self.laser.as_ref() else {
            return Ok(None);
        };
        Ok(Some(LaserParams::new(
            vec3(l.direction),
            2.0 * PI * l.detuning_hz,
            l.saturation,
            l.waist_m,
            l.offset_m,
            self.species.wavelength_m,
        )?))
    }

    /// Everything physical about the run, including the initial ions.
    pub fn scene(&self) -> Result<Scene> {
        let species = self.particle()?;
        let (geometry, fields) = self.trap_parts()?;
        let freqs = derive_frequencies(&species, &geometry, &fields)?;
        let mut scene = Scene::new(species, geometry, fields);
        scene.lasers.extend(self.laser_params()?);
        if let Some(d) = self.drive.as_ref().filter(|d| d.amplitude_v != 0.0) {
            let f = d
                .frequency_hz
                .ok_or_else(|| Error::Config("unresolved drive.frequency_hz".into()))?;
            scene.drive = Some(AxialisationDrive::new(
                d.amplitude_v,
                2.0 * PI * f,
                d.phase_rad,
                d.kappa,
            )?);
        }
        if let Some(p) = self.probe.as_ref() {
            scene.probe = Some(DipoleProbe::new(
                p.amplitude_v_per_m,
                2.0 * PI * p.frequency_hz,
                p.phase_rad,
                vec3(p.direction),
            )?);
        }
        scene.ions = initial_ions(&self.ions, &species, &freqs)?;
        Ok(scene)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let s = self.sim.as_ref().ok_or_else(|| missing("sim"))?;
        Ok(SimConfig {
            dt: s
                .dt_s
                .ok_or_else(|| Error::Config("unresolved sim.dt_s".into()))?,
            duration: s.duration_s,
            rng_seed: s.seed,
            detection_efficiency: s.detection_efficiency,
            coulomb_enabled: s.coulomb,
            scattering_mode: s.scattering_mode.parse()?,
            sample_stride: s.sample_stride,
            background_rate: s.background_rate_hz,
        })
    }

    pub fn camera_model(&self) -> Result<CameraModel> {
        let c = self.camera.unwrap_or_default();
        CameraModel::new(
            c.pixel_pitch_m,
            c.magnification,
            c.psf_sigma_m,
            c.width_px,
            c.height_px,
            c.exposure_s,
            vec3(c.view_axis),
        )
    }

    pub fn analysis_settings(&self) -> AnalysisSection {
        self.analysis.unwrap_or_default()
    }
}

/// Place `count` ions according to their mode amplitudes and arrangement.
pub fn initial_ions(
    ions: &IonsSection,
    species: &ParticleSpecies,
    freqs: &ModeFrequencies,
) -> Result<Vec<IonState>> {
    if ions.count == 0 {
        return Err(Error::Config("ions.count must be at least 1".into()));
    }
    let n = ions.count;
    let ring = match ions.arrangement {
        Arrangement::Coherent if n > 1 => Some(crystal_ring(
            n,
            ions.crystal_rotation * freqs.omega_c,
            species,
            freqs,
        )?),
        _ => None,
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let stagger = match ions.arrangement {
            Arrangement::Coherent => 0.0,
            Arrangement::Incoherent => i as f64 * GOLDEN_ANGLE,
        };
        // a second, different stagger keeps the two modes uncorrelated
        let modes = ModeAmplitudes {
            cyclotron: Complex64::from_polar(
                ions.cyclotron_radius_m,
                ions.cyclotron_phase_rad + 1.7 * stagger,
            ),
            magnetron: Complex64::from_polar(
                ions.magnetron_radius_m,
                ions.magnetron_phase_rad + stagger,
            ),
        };
        let mut s = modes.to_state(ions.axial_amplitude_m, 0.0, freqs);
        if let Some((radius, rate)) = ring {
            let u = Complex64::from_polar(radius, 2.0 * PI * i as f64 / n as f64);
            let v = Complex64::new(0.0, -rate) * u;
            s.position += Vector3::new(u.re, u.im, 0.0);
            s.velocity += Vector3::new(v.re, v.im, 0.0);
        }
        out.push(s);
    }
    Ok(out)
}

/// Radius of a ring of `n` ions rotating rigidly at `rate` (clockwise seen
/// from +z, the sense of both radial modes) in Coulomb equilibrium.
fn crystal_ring(
    n: usize,
    rate: f64,
    species: &ParticleSpecies,
    freqs: &ModeFrequencies,
) -> Result<(f64, f64)> {
    let m = species.mass();
    let stiffness = m * (rate * (freqs.omega_c - rate) - 0.5 * freqs.omega_z * freqs.omega_z);
    if !(stiffness > 0.0) {
        return Err(Error::Config(format!(
            "crystal rotation {rate} rad/s lies outside (w_m, w_c')"
        )));
    }
    let q = species.charge();
    let lattice: f64 = (1..n)
        .map(|j| {
            let c = 1.0 - (2.0 * PI * j as f64 / n as f64).cos();
            c / (2.0 * c).powf(1.5)
        })
        .sum();
    Ok((
        (COULOMB_CONSTANT * q * q * lattice / stiffness).cbrt(),
        rate,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::coulomb_force;

    fn base() -> Config {
        Config::from_toml(
            r#"
            [trap]
            b_tesla = 1.0
            magnetron_hz = 31.6e3

            [laser]
            detuning_hz = -21.5e6
            saturation = 1.0
            waist_m = 50e-6

            [drive]
            amplitude_v = 0.05

            [sim]
            duration_s = 1e-3
            seed = 3
            "#,
        )
        .unwrap()
    }

    #[test]
    fn resolve_fills_every_optional_key() {
        let mut c = base();
        c.resolve().unwrap();
        let t = c.trap.unwrap();
        assert!(t.magnetron_hz.is_none());
        assert!(t.v_volts.is_some() && t.z0_m.is_some());
        let f = c.frequencies().unwrap();
        let fd = c.drive.unwrap().frequency_hz.unwrap();
        assert!((fd - f.omega_c / (2.0 * PI)).abs() < 1e-6);
        let dt = c.sim.unwrap().dt_s.unwrap();
        assert!((dt - 2.0 * PI / f.omega_c_prime / 100.0).abs() < 1e-20);
    }

    #[test]
    fn resolved_echo_round_trips() {
        let mut c = base();
        c.resolve().unwrap();
        let text = c.to_toml();
        let mut back = Config::from_toml(&text).unwrap();
        assert_eq!(back, c);
        back.resolve().unwrap();
        assert_eq!(back, c);
        assert!(text.contains("b_tesla") && text.contains("mass_u"));
    }

    #[test]
    fn rejects_unknown_and_conflicting_keys() {
        assert!(matches!(
            Config::from_toml("[trap]\nb_tesla = 1.0\nb_gauss = 3.0\n"),
            Err(Error::Config(_))
        ));
        let mut c = Config::from_toml("[trap]\nb_tesla = 1.0\nv_volts = 4.7\nmagnetron_hz = 3e4\n")
            .unwrap();
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn unresolved_scene_is_an_error() {
        assert!(base().scene().is_err());
        assert!(matches!(Config::default().scene(), Err(Error::Config(_))));
    }

    #[test]
    fn scene_builds_from_config() {
        let mut c = base();
        c.resolve().unwrap();
        let s = c.scene().unwrap();
        assert_eq!(s.lasers.len(), 1);
        assert!(s.drive.is_some());
        assert_eq!(s.ions.len(), 1);
        assert!(c
            .sim_config()
            .unwrap()
            .validate(&s.frequencies().unwrap())
            .is_ok());
    }

    #[test]
    fn crystal_ring_is_in_equilibrium() {
        let mut c = base();
        c.ions.count = 3;
        c.resolve().unwrap();
        let s = c.scene().unwrap();
        let f = s.frequencies().unwrap();
        let m = s.species.mass();
        let rate = 0.5 * f.omega_c;
        let coulomb = coulomb_force(&s.ions, s.species.charge()).unwrap();
        for (ion, fc) in s.ions.iter().zip(&coulomb) {
            // centripetal balance in the lab frame: m a = q(E + v x B) + F_c
            let r = Vector3::new(ion.position.x, ion.position.y, 0.0);
            let trap = 0.5 * m * f.omega_z * f.omega_z * r;
            let lorentz = m * f.omega_c * ion.velocity.cross(&Vector3::z());
            let needed = -m * rate * rate * r;
            let residual = trap + lorentz + fc - needed;
            assert!(residual.norm() < 1e-9 * fc.norm(), "{residual:?}");
        }
    }

    #[test]
    fn incoherent_ions_differ() {
        let mut c = base();
        c.ions.count = 5;
        c.ions.arrangement = Arrangement::Incoherent;
        c.ions.magnetron_radius_m = 20e-6;
        c.resolve().unwrap();
        let s = c.scene().unwrap();
        for i in 1..5 {
            assert!((s.ions[i].position - s.ions[0].position).norm() > 1e-6);
        }
    }
}
