//! Lab-frame equations of motion for a handful of trapped ions.
//!
//! Each ion feels the static trap field, the magnetic field along `z`, the
//! optional coupling drive and dipole probe, the cooling beam and the Coulomb
//! repulsion of the other ions.

pub mod fields;
pub mod integrator;
pub mod laser;
pub mod modes;
pub mod run;

use nalgebra::Vector3;

pub use fields::{
    amplitude_for_coupling, axialisation_field, coupling_rate, probe_field, trap_field,
    trap_potential, AxialisationDrive, DipoleProbe, DEFAULT_KAPPA,
};
pub use integrator::{coulomb_force, Integrator};
pub use laser::{
    continuous_drag_force, doppler_limit, linearized_damping_rates, radiation_pressure_offset,
    scattering_rate, LaserParams, LinearRates, ScatteringMode,
};
pub use modes::{centroid_modes, decompose, ModeAmplitudes};
pub use run::{run, run_observed, PhotonRecord, RunStats, Scene, SimConfig, Trajectory};

/// Position (m) and velocity (m/s) of one ion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl IonState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self { position, velocity }
    }

    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self::new(position, Vector3::zeros())
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(self.velocity.iter())
            .all(|c| c.is_finite())
    }
}
