//! Physical constants (CODATA 2018). Every module reads from this table.

use std::f64::consts::PI;

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Vacuum electric permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Coulomb constant 1/(4 pi eps0), N m^2 / C^2.
pub const COULOMB_CONSTANT: f64 = 1.0 / (4.0 * PI * VACUUM_PERMITTIVITY);

/// Mass of 24Mg+ in atomic mass units.
pub const MG24_MASS_U: f64 = 23.985;
/// Mg+ cooling transition wavelength, m.
pub const MG_WAVELENGTH: f64 = 280e-9;
/// Mg+ natural linewidth of the cooling transition, Hz (cyclic).
pub const MG_LINEWIDTH_HZ: f64 = 43e6;
