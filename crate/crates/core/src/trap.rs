//! Trap geometry, fields, ion species and the mode-frequency algebra of an
//! ideal Penning trap.
//!
//! The radial motion of a trapped ion is the superposition of a fast modified
//! cyclotron orbit at `omega_c_prime` and a slow magnetron drift at `omega_m`:
//!
//! ```text
//! omega_c       = eB/m
//! omega_z^2     = 4eV/(m R^2),      R^2 = r0^2 + 2 z0^2
//! omega_1^2     = omega_c^2/4 - omega_z^2/2
//! omega_c_prime = omega_c/2 + omega_1
//! omega_m       = omega_c/2 - omega_1
//! ```
//!
//! All frequencies are angular (rad/s).

use std::f64::consts::{PI, SQRT_2};

use crate::constants::{
    ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE, MG24_MASS_U, MG_LINEWIDTH_HZ, MG_WAVELENGTH,
};
use crate::error::{ensure, Error, Result};

/// A singly or multiply charged positive ion with one cooling transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleSpecies {
    charge: f64,
    mass: f64,
    transition_wavelength: f64,
    natural_linewidth: f64,
}

impl ParticleSpecies {
    /// `natural_linewidth` is angular (rad/s).
    pub fn new(
        charge: f64,
        mass: f64,
        transition_wavelength: f64,
        natural_linewidth: f64,
    ) -> Result<Self> {
        ensure(charge > 0.0 && charge.is_finite(), || {
            format!("charge must be positive, got {charge}")
        })?;
        ensure(mass > 0.0 && mass.is_finite(), || {
            format!("mass must be positive, got {mass}")
        })?;
        ensure(transition_wavelength > 0.0, || {
            format!("wavelength must be positive, got {transition_wavelength}")
        })?;
        ensure(natural_linewidth > 0.0, || {
            format!("linewidth must be positive, got {natural_linewidth}")
        })?;
        Ok(Self {
            charge,
            mass,
            transition_wavelength,
            natural_linewidth,
        })
    }

    /// 24Mg+ on its 280 nm resonance line (43 MHz natural linewidth).
    pub fn mg24() -> Self {
        Self {
            charge: ELEMENTARY_CHARGE,
            mass: MG24_MASS_U * ATOMIC_MASS_UNIT,
            transition_wavelength: MG_WAVELENGTH,
            natural_linewidth: 2.0 * PI * MG_LINEWIDTH_HZ,
        }
    }

    /// Species from the config-file units: mass in u, charge in units of e.
    pub fn from_atomic_units(mass_u: f64, charge_e: f64) -> Result<Self> {
        Self::new(
            charge_e * ELEMENTARY_CHARGE,
            mass_u * ATOMIC_MASS_UNIT,
            MG_WAVELENGTH,
            2.0 * PI * MG_LINEWIDTH_HZ,
        )
    }

    pub fn with_transition(self, wavelength: f64, linewidth: f64) -> Result<Self> {
        Self::new(self.charge, self.mass, wavelength, linewidth)
    }

    pub fn charge(&self) -> f64 {
        self.charge
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn transition_wavelength(&self) -> f64 {
        self.transition_wavelength
    }

    /// Natural linewidth Gamma, rad/s.
    pub fn natural_linewidth(&self) -> f64 {
        self.natural_linewidth
    }

    pub fn charge_to_mass(&self) -> f64 {
        self.charge / self.mass
    }
}

/// Ring radius `r0` and endcap half-separation `z0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapGeometry {
    r0: f64,
    z0: f64,
}

impl TrapGeometry {
    pub fn new(r0: f64, z0: f64) -> Result<Self> {
        ensure(r0 > 0.0 && r0.is_finite(), || {
            format!("r0 must be positive, got {r0}")
        })?;
        ensure(z0 > 0.0 && z0.is_finite(), || {
            format!("z0 must be positive, got {z0}")
        })?;
        Ok(Self { r0, z0 })
    }

    /// Ideal hyperbolic trap, `z0 = r0/sqrt(2)`.
    pub fn ideal(r0: f64) -> Result<Self> {
        Self::new(r0, r0 / SQRT_2)
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    /// `R^2 = r0^2 + 2 z0^2`.
    pub fn r_sq(&self) -> f64 {
        self.r0 * self.r0 + 2.0 * self.z0 * self.z0
    }
}

impl Default for TrapGeometry {
    /// 10 mm internal diameter, ideal geometry.
    fn default() -> Self {
        Self {
            r0: 5e-3,
            z0: 5e-3 / SQRT_2,
        }
    }
}

/// Static magnetic field along +z and ring-to-endcap voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapFields {
    magnetic_field: f64,
    voltage: f64,
}

impl TrapFields {
    pub fn new(magnetic_field: f64, voltage: f64) -> Result<Self> {
        ensure(magnetic_field > 0.0 && magnetic_field.is_finite(), || {
            format!("B must be positive, got {magnetic_field}")
        })?;
        ensure(voltage >= 0.0 && voltage.is_finite(), || {
            format!("V must be non-negative, got {voltage}")
        })?;
        Ok(Self {
            magnetic_field,
            voltage,
        })
    }

    pub fn magnetic_field(&self) -> f64 {
        self.magnetic_field
    }

    pub fn voltage(&self) -> f64 {
        self.voltage
    }
}

/// The five characteristic angular frequencies of the trap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeFrequencies {
    pub omega_c: f64,
    pub omega_z: f64,
    pub omega_1: f64,
    pub omega_c_prime: f64,
    pub omega_m: f64,
}

impl ModeFrequencies {
    /// Frequencies in Hz: (f_c, f_z, f_1, f_c', f_m).
    pub fn in_hz(&self) -> [f64; 5] {
        let k = 1.0 / (2.0 * PI);
        [
            self.omega_c * k,
            self.omega_z * k,
            self.omega_1 * k,
            self.omega_c_prime * k,
            self.omega_m * k,
        ]
    }

    /// Splitting `omega_c' - omega_m = 2 omega_1` that sets the mode amplitudes'
    /// response to a radial force.
    pub fn radial_splitting(&self) -> f64 {
        self.omega_c_prime - self.omega_m
    }
}

fn cyclotron(species: &ParticleSpecies, b: f64) -> f64 {
    species.charge * b / species.mass
}

fn axial_sq(species: &ParticleSpecies, geometry: &TrapGeometry, v: f64) -> f64 {
    4.0 * species.charge * v / (species.mass * geometry.r_sq())
}

/// Largest trap voltage for which the radial motion is bound at field `b`.
pub fn max_stable_voltage(species: &ParticleSpecies, geometry: &TrapGeometry, b: f64) -> f64 {
    let wc = cyclotron(species, b);
    species.mass * geometry.r_sq() * wc * wc / (8.0 * species.charge)
}

/// Evaluate the mode frequencies for the given species, trap and fields.
///
/// `omega_m` is computed as `(omega_z^2/2)/omega_c'` rather than by the
/// subtraction `omega_c/2 - omega_1`, which cancels badly when the magnetron
/// frequency is small.
pub fn derive_frequencies(
    species: &ParticleSpecies,
    geometry: &TrapGeometry,
    fields: &TrapFields,
) -> Result<ModeFrequencies> {
    let omega_c = cyclotron(species, fields.magnetic_field);
    let omega_z = axial_sq(species, geometry, fields.voltage).sqrt();
    let half_wz_sq = 0.5 * omega_z * omega_z;
    let omega_1_sq = 0.25 * omega_c * omega_c - half_wz_sq;
    if omega_1_sq < 0.0 {
        return Err(Error::UnstableTrap {
            max_voltage: max_stable_voltage(species, geometry, fields.magnetic_field),
        });
    }
    let omega_1 = omega_1_sq.sqrt();
    let omega_c_prime = 0.5 * omega_c + omega_1;
    let omega_m = if omega_c_prime > 0.0 {
        half_wz_sq / omega_c_prime
    } else {
        0.0
    };
    Ok(ModeFrequencies {
        omega_c,
        omega_z,
        omega_1,
        omega_c_prime,
        omega_m,
    })
}

/// Trap voltage that puts the magnetron frequency at `target_f_m` (Hz).
///
/// Inverts `omega_z^2/2 = omega_m (omega_c - omega_m)` in closed form.
pub fn voltage_for_magnetron_frequency(
    species: &ParticleSpecies,
    geometry: &TrapGeometry,
    magnetic_field: f64,
    target_f_m: f64,
) -> Result<f64> {
    ensure(target_f_m >= 0.0 && target_f_m.is_finite(), || {
        format!("target magnetron frequency must be non-negative, got {target_f_m}")
    })?;
    ensure(magnetic_field > 0.0, || {
        format!("B must be positive, got {magnetic_field}")
    })?;
    let omega_c = cyclotron(species, magnetic_field);
    let omega_m = 2.0 * PI * target_f_m;
    if omega_m >= 0.5 * omega_c {
        return Err(Error::Unreachable(format!(
            "magnetron frequency {target_f_m} Hz is not below f_c/2 = {} Hz",
            omega_c / (4.0 * PI)
        )));
    }
    let omega_z_sq = 2.0 * omega_m * (omega_c - omega_m);
    Ok(omega_z_sq * species.mass * geometry.r_sq() / (4.0 * species.charge))
}

/// Magnetic field that puts the true cyclotron frequency at `f_c` (Hz).
pub fn field_for_cyclotron_frequency(species: &ParticleSpecies, f_c: f64) -> f64 {
    2.0 * PI * f_c * species.mass / species.charge
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mg() -> (ParticleSpecies, TrapGeometry) {
        (ParticleSpecies::mg24(), TrapGeometry::default())
    }

    #[test]
    fn mg24_reference_frequencies() {
        let (sp, geo) = mg();
        let f = derive_frequencies(&sp, &geo, &TrapFields::new(1.0, 4.7).unwrap()).unwrap();
        let [fc, fz, _, fcp, fm] = f.in_hz();
        // 30-digit evaluation with CODATA 2018 constants
        assert!((fc - 640_238.380_179).abs() < 1e-3, "{fc}");
        assert!((fz - 195_737.862_239).abs() < 1e-3, "{fz}");
        assert!((fcp - 608_770.607_038).abs() < 1e-3, "{fcp}");
        assert!((fm - 31_467.773_141).abs() < 1e-3, "{fm}");
    }

    #[test]
    fn zero_voltage_has_no_magnetron() {
        let (sp, geo) = mg();
        let f = derive_frequencies(&sp, &geo, &TrapFields::new(0.7, 0.0).unwrap()).unwrap();
        assert_eq!(f.omega_z, 0.0);
        assert_eq!(f.omega_m, 0.0);
        assert_eq!(f.omega_c_prime, f.omega_c);
    }

    #[test]
    fn unstable_trap_reports_limit() {
        let (sp, geo) = mg();
        let vmax = max_stable_voltage(&sp, &geo, 1.0);
        let err =
            derive_frequencies(&sp, &geo, &TrapFields::new(1.0, vmax * 1.01).unwrap()).unwrap_err();
        match err {
            Error::UnstableTrap { max_voltage } => assert!((max_voltage - vmax).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
        assert!(
            derive_frequencies(&sp, &geo, &TrapFields::new(1.0, vmax * 0.999).unwrap()).is_ok()
        );
    }

    #[test]
    fn inverse_zero_target() {
        let (sp, geo) = mg();
        assert_eq!(
            voltage_for_magnetron_frequency(&sp, &geo, 1.0, 0.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn inverse_rejects_half_cyclotron() {
        let (sp, geo) = mg();
        let fc = derive_frequencies(&sp, &geo, &TrapFields::new(1.0, 0.0).unwrap())
            .unwrap()
            .in_hz()[0];
        let err = voltage_for_magnetron_frequency(&sp, &geo, 1.0, fc / 2.0).unwrap_err();
        assert!(matches!(err, Error::Unreachable(_)));
    }

    #[test]
    fn constructors_validate() {
        assert!(ParticleSpecies::new(-1.0, 1.0, 1.0, 1.0).is_err());
        assert!(ParticleSpecies::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(ParticleSpecies::new(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(TrapGeometry::new(0.0, 1.0).is_err());
        assert!(TrapFields::new(0.0, 1.0).is_err());
        assert!(TrapFields::new(1.0, -1.0).is_err());
        let g = TrapGeometry::ideal(5e-3).unwrap();
        assert!((g.r_sq() - 2.0 * 25e-6).abs() < 1e-18);
    }

    #[test]
    fn field_for_cyclotron_round_trip() {
        let (sp, geo) = mg();
        let b = field_for_cyclotron_frequency(&sp, 627e3);
        let f = derive_frequencies(&sp, &geo, &TrapFields::new(b, 1.0).unwrap()).unwrap();
        assert!((f.in_hz()[0] - 627e3).abs() < 1e-6);
    }
}
