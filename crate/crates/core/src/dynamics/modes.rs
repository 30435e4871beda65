//! Split a radial phase-space point into cyclotron and magnetron amplitudes.
//!
//! With `u = x + iy` a positive ion in a field along `+z` moves as
//! `u(t) = C exp(-i omega_c' t) + M exp(-i omega_m t)`, so position and
//! velocity together fix both complex amplitudes.

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::trap::ModeFrequencies;

use super::IonState;

/// Complex radial mode amplitudes, m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeAmplitudes {
    pub cyclotron: Complex64,
    pub magnetron: Complex64,
}

impl ModeAmplitudes {
    pub fn r_c(&self) -> f64 {
        self.cyclotron.norm()
    }

    pub fn r_m(&self) -> f64 {
        self.magnetron.norm()
    }

    /// Phase-space point with these radial amplitudes and the given axial state.
    pub fn to_state(&self, z: f64, vz: f64, freqs: &ModeFrequencies) -> IonState {
        let u = self.cyclotron + self.magnetron;
        let v = -Complex64::i()
            * (self.cyclotron * freqs.omega_c_prime + self.magnetron * freqs.omega_m);
        IonState::new(Vector3::new(u.re, u.im, z), Vector3::new(v.re, v.im, vz))
    }
}

pub fn decompose(state: &IonState, freqs: &ModeFrequencies) -> ModeAmplitudes {
    let u = Complex64::new(state.position.x, state.position.y);
    let iv = Complex64::new(-state.velocity.y, state.velocity.x);
    let split = freqs.radial_splitting();
    ModeAmplitudes {
        cyclotron: (iv - u * freqs.omega_m) / split,
        magnetron: (u * freqs.omega_c_prime - iv) / split,
    }
}

/// Mode amplitudes of the centre of mass of a cloud.
pub fn centroid_modes(states: &[IonState], freqs: &ModeFrequencies) -> ModeAmplitudes {
    let n = states.len().max(1) as f64;
    let (p, v) = states
        .iter()
        .fold((Vector3::zeros(), Vector3::zeros()), |(p, v), s| {
            (p + s.position, v + s.velocity)
        });
    decompose(&IonState::new(p / n, v / n), freqs)
}
