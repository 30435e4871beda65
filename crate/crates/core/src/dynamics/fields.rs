//! Electric fields acting on the ions: the static trap quadrupole, the
//! rotating-frame coupling drive on the segmented ring, and a weak dipole probe.

use nalgebra::Vector3;

use crate::error::{ensure, Result};
use crate::trap::{ModeFrequencies, ParticleSpecies, TrapFields, TrapGeometry};

/// Static trap field `E = -grad Phi` with `Phi = (2V/R^2)(z^2 - (x^2+y^2)/2)`.
#[inline]
pub fn trap_field(
    position: &Vector3<f64>,
    fields: &TrapFields,
    geometry: &TrapGeometry,
) -> Vector3<f64> {
    let k = 2.0 * fields.voltage() / geometry.r_sq();
    Vector3::new(k * position.x, k * position.y, -2.0 * k * position.z)
}

/// Trap potential at `position`, V.
pub fn trap_potential(
    position: &Vector3<f64>,
    fields: &TrapFields,
    geometry: &TrapGeometry,
) -> f64 {
    let k = 2.0 * fields.voltage() / geometry.r_sq();
    k * (position.z * position.z - 0.5 * (position.x * position.x + position.y * position.y))
}

/// Azimuthal quadrupole drive applied to the four ring segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxialisationDrive {
    /// Segment voltage amplitude, V.
    pub amplitude: f64,
    /// Drive angular frequency, rad/s.
    pub frequency: f64,
    pub phase: f64,
    /// Dimensionless electrode geometry factor.
    pub kappa: f64,
}

impl AxialisationDrive {
    pub fn new(amplitude: f64, frequency: f64, phase: f64, kappa: f64) -> Result<Self> {
        ensure(amplitude >= 0.0, || {
            format!("drive amplitude must be non-negative, got {amplitude}")
        })?;
        ensure(
            frequency.is_finite() && phase.is_finite() && kappa.is_finite(),
            || "drive parameters must be finite".into(),
        )?;
        Ok(Self {
            amplitude,
            frequency,
            phase,
            kappa,
        })
    }

    /// Drive at the true cyclotron frequency with the default `kappa = 0.5`.
    pub fn resonant(amplitude: f64, freqs: &ModeFrequencies) -> Result<Self> {
        Self::new(amplitude, freqs.omega_c, 0.0, DEFAULT_KAPPA)
    }

    /// Field-gradient prefactor `2 kappa V / r0^2`, V/m^2.
    fn gradient(&self, geometry: &TrapGeometry) -> f64 {
        2.0 * self.kappa * self.amplitude / (geometry.r0() * geometry.r0())
    }
}

pub const DEFAULT_KAPPA: f64 = 0.5;

/// Drive field from `Phi = kappa V (x^2 - y^2)/r0^2 cos(omega t + phase)`.
#[inline]
pub fn axialisation_field(
    position: &Vector3<f64>,
    drive: &AxialisationDrive,
    geometry: &TrapGeometry,
    t: f64,
) -> Vector3<f64> {
    let g = -drive.gradient(geometry) * (drive.frequency * t + drive.phase).cos();
    Vector3::new(g * position.x, -g * position.y, 0.0)
}

/// Magnetron-cyclotron coupling rate produced by a resonant drive,
/// `delta = e kappa V / (m r0^2 (omega_c' - omega_m))`, s^-1.
///
/// Follows from averaging the drive over the fast motions: the quadrupole
/// field converts one mode amplitude into the other at this rate.
pub fn coupling_rate(
    drive: &AxialisationDrive,
    species: &ParticleSpecies,
    geometry: &TrapGeometry,
    freqs: &ModeFrequencies,
) -> f64 {
    0.5 * species.charge_to_mass() * drive.gradient(geometry) / freqs.radial_splitting()
}

/// Drive amplitude that yields the coupling rate `delta` at resonance.
pub fn amplitude_for_coupling(
    delta: f64,
    kappa: f64,
    species: &ParticleSpecies,
    geometry: &TrapGeometry,
    freqs: &ModeFrequencies,
) -> f64 {
    delta * freqs.radial_splitting() * geometry.r0() * geometry.r0()
        / (species.charge_to_mass() * kappa)
}

/// Weak uniform rf field used to probe a motional resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleProbe {
    /// Field amplitude, V/m.
    pub amplitude: f64,
    /// Angular frequency, rad/s.
    pub frequency: f64,
    pub phase: f64,
    /// Unit field direction.
    pub direction: Vector3<f64>,
}

impl DipoleProbe {
    pub fn new(
        amplitude: f64,
        frequency: f64,
        phase: f64,
        direction: Vector3<f64>,
    ) -> Result<Self> {
        ensure(amplitude >= 0.0, || {
            format!("probe amplitude must be non-negative, got {amplitude}")
        })?;
        let n = direction.norm();
        ensure(n > 0.0 && n.is_finite(), || {
            "probe direction must be non-zero".into()
        })?;
        Ok(Self {
            amplitude,
            frequency,
            phase,
            direction: direction / n,
        })
    }
}

#[inline]
pub fn probe_field(probe: &DipoleProbe, t: f64) -> Vector3<f64> {
    probe.direction * (probe.amplitude * (probe.frequency * t + probe.phase).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (TrapFields, TrapGeometry) {
        (TrapFields::new(1.0, 4.7).unwrap(), TrapGeometry::default())
    }

    #[test]
    fn trap_field_vanishes_at_centre() {
        let (f, g) = setup();
        assert_eq!(trap_field(&Vector3::zeros(), &f, &g), Vector3::zeros());
    }

    #[test]
    fn trap_field_is_radially_defocusing() {
        let (f, g) = setup();
        let e = trap_field(&Vector3::new(1e-4, 0.0, 0.0), &f, &g);
        assert!((e.x - 2.0 * 4.7 / g.r_sq() * 1e-4).abs() < 1e-12);
        assert!(e.x > 0.0 && e.y == 0.0 && e.z == 0.0);
        let ez = trap_field(&Vector3::new(0.0, 0.0, 1e-4), &f, &g);
        assert!(ez.z < 0.0);
    }

    #[test]
    fn field_is_minus_gradient_of_potential() {
        let (f, g) = setup();
        let p = Vector3::new(3e-5, -2e-5, 1e-5);
        let e = trap_field(&p, &f, &g);
        let h = 1e-9;
        for i in 0..3 {
            let mut a = p;
            let mut b = p;
            a[i] += h;
            b[i] -= h;
            let grad = (trap_potential(&a, &f, &g) - trap_potential(&b, &f, &g)) / (2.0 * h);
            assert!((e[i] + grad).abs() < 1e-6 * e.norm());
        }
    }

    #[test]
    fn quadrupole_drive_symmetry() {
        let g = TrapGeometry::default();
        let off = AxialisationDrive::new(0.0, 1e6, 0.0, 0.5).unwrap();
        assert_eq!(
            axialisation_field(&Vector3::new(1e-4, 2e-4, 0.0), &off, &g, 0.3),
            Vector3::zeros()
        );
        let d = AxialisationDrive::new(1.0, 1e6, 0.0, 0.5).unwrap();
        let ex = axialisation_field(&Vector3::new(1e-4, 0.0, 0.0), &d, &g, 0.0);
        let ey = axialisation_field(&Vector3::new(0.0, 1e-4, 0.0), &d, &g, 0.0);
        assert!(ex.x < 0.0 && ex.y == 0.0);
        assert!(ey.y > 0.0 && ey.x == 0.0);
        assert!((ex.x + ey.y).abs() < 1e-15);
    }

    #[test]
    fn coupling_inverse() {
        let sp = ParticleSpecies::mg24();
        let g = TrapGeometry::default();
        let f =
            crate::trap::derive_frequencies(&sp, &g, &TrapFields::new(1.0, 4.7).unwrap()).unwrap();
        let v = amplitude_for_coupling(1234.0, 0.5, &sp, &g, &f);
        let d = AxialisationDrive::new(v, f.omega_c, 0.0, 0.5).unwrap();
        assert!((coupling_rate(&d, &sp, &g, &f) - 1234.0).abs() < 1e-9);
    }
}
