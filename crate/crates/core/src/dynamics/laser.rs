//! Gaussian cooling beam and the two-level scattering model.

use nalgebra::Vector3;

use crate::constants::{HBAR, PLANCK};
use crate::error::{ensure, Result};
use crate::trap::{ModeFrequencies, ParticleSpecies};

use super::IonState;

/// How photon scattering acts on the ions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatteringMode {
    /// Discrete absorption and emission kicks with shot noise; emits photons.
    MonteCarlo,
    /// Mean radiation pressure only, no noise and no photon events.
    ContinuousDrag,
}

impl ScatteringMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScatteringMode::MonteCarlo => "monte-carlo",
            ScatteringMode::ContinuousDrag => "continuous-drag",
        }
    }
}

impl std::str::FromStr for ScatteringMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monte-carlo" | "MonteCarlo" => Ok(ScatteringMode::MonteCarlo),
            "continuous-drag" | "ContinuousDrag" => Ok(ScatteringMode::ContinuousDrag),
            other => Err(crate::Error::Config(format!(
                "unknown scattering mode {other:?}"
            ))),
        }
    }
}

/// A Gaussian beam with a fixed axis through the trap.
///
/// The beam axis passes through `offset * p` where `p = z x d / |z x d|` is the
/// in-plane direction perpendicular to the propagation direction `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserParams {
    direction: Vector3<f64>,
    /// Detuning from resonance, rad/s (negative = red).
    pub detuning: f64,
    /// On-axis saturation parameter.
    pub saturation: f64,
    /// 1/e^2 intensity radius, m.
    pub waist: f64,
    /// Beam axis displacement from the trap centre, m.
    pub offset: f64,
    pub wavelength: f64,
    perpendicular: Vector3<f64>,
}

impl LaserParams {
    pub fn new(
        direction: Vector3<f64>,
        detuning: f64,
        saturation: f64,
        waist: f64,
        offset: f64,
        wavelength: f64,
    ) -> Result<Self> {
        let n = direction.norm();
        ensure(n > 0.0 && n.is_finite(), || {
            "beam direction must be non-zero".into()
        })?;
        ensure(waist > 0.0, || {
            format!("waist must be positive, got {waist}")
        })?;
        ensure(saturation >= 0.0, || {
            format!("saturation must be non-negative, got {saturation}")
        })?;
        ensure(wavelength > 0.0, || {
            format!("wavelength must be positive, got {wavelength}")
        })?;
        let direction = direction / n;
        let p = Vector3::z().cross(&direction);
        let perpendicular = if p.norm() > 1e-12 {
            p.normalize()
        } else {
            Vector3::x()
        };
        Ok(Self {
            direction,
            detuning,
            saturation,
            waist,
            offset,
            wavelength,
            perpendicular,
        })
    }

    pub fn direction(&self) -> Vector3<f64> {
        self.direction
    }

    /// In-plane unit vector along which `offset` is measured.
    pub fn perpendicular(&self) -> Vector3<f64> {
        self.perpendicular
    }

    /// Wavenumber `k = 2 pi / lambda`, 1/m.
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// Photon momentum `hbar k`, kg m/s.
    pub fn photon_momentum(&self) -> f64 {
        PLANCK / self.wavelength
    }

    /// Saturation parameter at `position`.
    #[inline]
    pub fn local_saturation(&self, position: &Vector3<f64>) -> f64 {
        let rel = position - self.perpendicular * self.offset;
        let along = rel.dot(&self.direction);
        let perp_sq = (rel.norm_squared() - along * along).max(0.0);
        self.saturation * (-2.0 * perp_sq / (self.waist * self.waist)).exp()
    }
}

/// Photon scattering rate of a two-level ion,
/// `R = (Gamma/2) s / (1 + s + (2 (Delta - k.v) / Gamma)^2)`, 1/s.
#[inline]
pub fn scattering_rate(state: &IonState, laser: &LaserParams, species: &ParticleSpecies) -> f64 {
    let gamma = species.natural_linewidth();
    let s = laser.local_saturation(&state.position);
    if s == 0.0 {
        return 0.0;
    }
    let doppler = laser.wavenumber() * laser.direction.dot(&state.velocity);
    let x = 2.0 * (laser.detuning - doppler) / gamma;
    0.5 * gamma * s / (1.0 + s + x * x)
}

/// Mean radiation-pressure force `hbar k R` along the beam, N.
pub fn continuous_drag_force(
    state: &IonState,
    laser: &LaserParams,
    species: &ParticleSpecies,
) -> Vector3<f64> {
    laser.direction * (laser.photon_momentum() * scattering_rate(state, laser, species))
}

/// Small-amplitude damping rates (s^-1, amplitude) of the radial modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRates {
    pub gamma_c: f64,
    pub gamma_m: f64,
    /// Axial amplitude damping rate from the beam's axial projection.
    pub gamma_z: f64,
}

/// Linearise the radiation-pressure force about an ion at rest at the trap
/// centre and project it onto the radial modes.
///
/// With `alpha = dF/dy` (intensity gradient across the beam) and
/// `beta = -dF/dv` (Doppler drag) the mode amplitudes decay at
///
/// ```text
/// gamma_c = (omega_c' beta - alpha) / (2 m (omega_c' - omega_m))
/// gamma_m = (alpha - omega_m beta) / (2 m (omega_c' - omega_m))
/// ```
///
/// so the magnetron motion is cooled only when the gradient term wins.
pub fn linearized_damping_rates(
    laser: &LaserParams,
    species: &ParticleSpecies,
    freqs: &ModeFrequencies,
) -> LinearRates {
    let gamma = species.natural_linewidth();
    let k = laser.wavenumber();
    let s = laser.local_saturation(&Vector3::zeros());
    let x = 2.0 * laser.detuning / gamma;
    let denom = 1.0 + s + x * x;
    // dR/d(perpendicular coordinate) and dR/d(d.v) at the origin
    let r_y = 0.5 * gamma * (1.0 + x * x) / (denom * denom)
        * (4.0 * laser.offset * s / (laser.waist * laser.waist));
    let r_v = 2.0 * k * s * x / (denom * denom);
    let d = laser.direction;
    let cos_r = (d.x * d.x + d.y * d.y).sqrt();
    let hk = HBAR * k;
    let alpha = hk * cos_r * r_y;
    let beta = -hk * cos_r * cos_r * r_v;
    let beta_z = -hk * d.z * d.z * r_v;
    let m = species.mass();
    let split = 2.0 * m * freqs.radial_splitting();
    LinearRates {
        gamma_c: (freqs.omega_c_prime * beta - alpha) / split,
        gamma_m: (alpha - freqs.omega_m * beta) / split,
        gamma_z: beta_z / (2.0 * m),
    }
}

/// Static displacement of an ion at rest under the mean radiation pressure of
/// `lasers`: radially `-2 F / (m w_z^2)` against the defocusing trap field,
/// axially `F_z / (m w_z^2)`. Evaluated at the trap centre.
pub fn radiation_pressure_offset(
    lasers: &[LaserParams],
    species: &ParticleSpecies,
    freqs: &ModeFrequencies,
) -> Vector3<f64> {
    let at_rest = IonState::at_rest(Vector3::zeros());
    let f: Vector3<f64> = lasers
        .iter()
        .map(|l| continuous_drag_force(&at_rest, l, species))
        .sum();
    let k = species.mass() * freqs.omega_z * freqs.omega_z;
    Vector3::new(-2.0 * f.x / k, -2.0 * f.y / k, f.z / k)
}

/// Doppler-limit temperature `hbar Gamma / (2 k_B)`, K.
pub fn doppler_limit(species: &ParticleSpecies) -> f64 {
    HBAR * species.natural_linewidth() / (2.0 * crate::constants::BOLTZMANN)
}
