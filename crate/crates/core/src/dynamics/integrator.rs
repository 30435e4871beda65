//! Leapfrog splitting with an exact magnetic rotation.
//!
//! Positions live on integer steps and velocities on half steps. One step is a
//! half electric kick, a rotation of the radial velocity by exactly
//! `omega_c dt`, a second half kick and a drift. The rotation angle is exact
//! rather than the Cayley approximation, so the discrete cyclotron and
//! magnetron frequencies still sum to `eB/m`.

use nalgebra::Vector3;

use crate::constants::COULOMB_CONSTANT;
use crate::error::{Error, Result};
use crate::trap::{ParticleSpecies, TrapFields, TrapGeometry};

use super::fields::{axialisation_field, probe_field, trap_field, AxialisationDrive, DipoleProbe};
use super::IonState;

/// Closest separation accepted by the Coulomb sum, m.
pub const MIN_SEPARATION: f64 = 1e-9;

/// Pairwise Coulomb forces, N. Each pair contribution is added with opposite
/// signs to both ions so the forces cancel pairwise.
pub fn coulomb_force(states: &[IonState], charge: f64) -> Result<Vec<Vector3<f64>>> {
    let mut out = vec![Vector3::zeros(); states.len()];
    coulomb_into(states.iter().map(|s| s.position), charge, &mut out)?;
    Ok(out)
}

fn coulomb_into(
    positions: impl Iterator<Item = Vector3<f64>> + Clone,
    charge: f64,
    out: &mut [Vector3<f64>],
) -> Result<()> {
    let k = COULOMB_CONSTANT * charge * charge;
    let pos: Vec<Vector3<f64>> = positions.collect();
    for f in out.iter_mut() {
        *f = Vector3::zeros();
    }
    for i in 0..pos.len() {
        for j in (i + 1)..pos.len() {
            let d = pos[i] - pos[j];
            let r = d.norm();
            if !(r >= MIN_SEPARATION) {
                return Err(Error::Overlap {
                    i,
                    j,
                    separation: r,
                });
            }
            let f = d * (k / (r * r * r));
            out[i] += f;
            out[j] -= f;
        }
    }
    Ok(())
}

/// Cosine and sine of `theta`, nudged by a few ulps so that `c^2 + s^2` is as
/// close to one as floating point allows. Repeated rotations then keep `|v|`
/// without a systematic drift.
pub(crate) fn unit_rotation(theta: f64) -> (f64, f64) {
    let (s0, c0) = theta.sin_cos();
    let nudge = |x: f64, k: i64| -> f64 {
        let mut y = x;
        for _ in 0..k.unsigned_abs() {
            y = if k > 0 { y.next_up() } else { y.next_down() };
        }
        y
    };
    // complement of a, with the sign of b
    let partner = |a: f64, b: f64| a.mul_add(-a, 1.0).max(0.0).sqrt().copysign(b);
    let mut best = (c0, s0, norm_defect(c0, s0));
    for i in -8..=8 {
        let c = nudge(c0, i);
        let sb = partner(c, s0);
        let s = nudge(s0, i);
        let cb = partner(s, c0);
        for j in -2..=2 {
            for (c, s) in [(c, nudge(sb, j)), (nudge(cb, j), s)] {
                if (c - c0).abs() > 1e-14 || (s - s0).abs() > 1e-14 {
                    continue;
                }
                let d = norm_defect(c, s);
                if d < best.2 {
                    best = (c, s, d);
                }
            }
        }
    }
    (best.0, best.1)
}

/// `|c^2 + s^2 - 1|` evaluated with error-free products.
fn norm_defect(c: f64, s: f64) -> f64 {
    let p = c * c;
    let ep = c.mul_add(c, -p);
    let q = s * s;
    let eq = s.mul_add(s, -q);
    // two-sum of p + q
    let sum = p + q;
    let bb = sum - p;
    let err = (p - (sum - bb)) + (q - bb);
    ((sum - 1.0) + err + ep + eq).abs()
}

#[inline]
fn rotate(v: &mut Vector3<f64>, (c, s): (f64, f64)) {
    // v' = exp(-i theta) v for v = vx + i vy
    let x = c * v.x + s * v.y;
    let y = c * v.y - s * v.x;
    v.x = x;
    v.y = y;
}

/// Static and driven fields shared by every ion.
#[derive(Debug, Clone, Copy)]
pub struct FieldSet<'a> {
    pub species: &'a ParticleSpecies,
    pub geometry: &'a TrapGeometry,
    pub fields: &'a TrapFields,
    pub drive: Option<&'a AxialisationDrive>,
    pub probe: Option<&'a DipoleProbe>,
    pub coulomb: bool,
}

/// Fixed-step integrator for a set of ions.
#[derive(Debug, Clone)]
pub struct Integrator {
    dt: f64,
    step: u64,
    positions: Vec<Vector3<f64>>,
    half_velocities: Vec<Vector3<f64>>,
    rot_full: (f64, f64),
    rot_half: (f64, f64),
    accel: Vec<Vector3<f64>>,
    coulomb: Vec<Vector3<f64>>,
    synced: Vec<IonState>,
}

impl Integrator {
    /// Start from states given at `t = 0`.
    pub fn new(fs: &FieldSet<'_>, dt: f64, initial: &[IonState]) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if let Some(i) = initial.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ion {i} has a non-finite state"
            )));
        }
        let theta = fs.species.charge_to_mass() * fs.fields.magnetic_field() * dt;
        let n = initial.len();
        let mut it = Self {
            dt,
            step: 0,
            positions: initial.iter().map(|s| s.position).collect(),
            half_velocities: vec![Vector3::zeros(); n],
            rot_full: unit_rotation(theta),
            rot_half: unit_rotation(0.5 * theta),
            accel: vec![Vector3::zeros(); n],
            coulomb: vec![Vector3::zeros(); n],
            synced: initial.to_vec(),
        };
        it.electric_accelerations(fs)?;
        let inv_half = (it.rot_half.0, -it.rot_half.1);
        for ((h, s), a) in it.half_velocities.iter_mut().zip(initial).zip(&it.accel) {
            let mut v = s.velocity;
            rotate(&mut v, inv_half);
            *h = v - a * (0.5 * dt);
        }
        Ok(it)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Current time, s.
    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// States at the start of the most recent step (or the initial states).
    pub fn synced(&self) -> &[IonState] {
        &self.synced
    }

    fn electric_accelerations(&mut self, fs: &FieldSet<'_>) -> Result<()> {
        let t = self.time();
        let qm = fs.species.charge_to_mass();
        if fs.coulomb && self.positions.len() > 1 {
            coulomb_into(
                self.positions.iter().copied(),
                fs.species.charge(),
                &mut self.coulomb,
            )?;
        }
        let inv_m = 1.0 / fs.species.mass();
        for (i, x) in self.positions.iter().enumerate() {
            let mut e = trap_field(x, fs.fields, fs.geometry);
            if let Some(d) = fs.drive {
                e += axialisation_field(x, d, fs.geometry, t);
            }
            if let Some(p) = fs.probe {
                e += probe_field(p, t);
            }
            let mut a = e * qm;
            if fs.coulomb && self.positions.len() > 1 {
                a += self.coulomb[i] * inv_m;
            }
            self.accel[i] = a;
        }
        Ok(())
    }

    /// Advance one step. `extra_force(i, state)` returns an additional force
    /// (N) on ion `i` evaluated from its state at the start of the step, used
    /// for radiation pressure and photon recoil.
    pub fn step<F>(&mut self, fs: &FieldSet<'_>, mut extra_force: F) -> Result<()>
    where
        F: FnMut(usize, &IonState) -> Vector3<f64>,
    {
        let dt = self.dt;
        let half = 0.5 * dt;
        self.electric_accelerations(fs)?;
        let inv_m = 1.0 / fs.species.mass();
        for i in 0..self.positions.len() {
            let mut v = self.half_velocities[i] + self.accel[i] * half;
            let mut sync = v;
            rotate(&mut sync, self.rot_half);
            let state = IonState::new(self.positions[i], sync);
            self.synced[i] = state;
            let a = self.accel[i] + extra_force(i, &state) * inv_m;
            v += (a - self.accel[i]) * half;
            rotate(&mut v, self.rot_full);
            v += a * half;
            self.half_velocities[i] = v;
            self.positions[i] += v * dt;
        }
        self.step += 1;
        let r0 = fs.geometry.r0();
        for (i, x) in self.positions.iter().enumerate() {
            if !(x.norm() < r0) {
                return Err(Error::IonEscaped {
                    ion: i,
                    time: self.time(),
                });
            }
        }
        Ok(())
    }

    /// States at the current time with synchronised velocities.
    pub fn current_states(&mut self, fs: &FieldSet<'_>) -> Result<Vec<IonState>> {
        self.electric_accelerations(fs)?;
        let half = 0.5 * self.dt;
        Ok((0..self.positions.len())
            .map(|i| {
                let mut v = self.half_velocities[i] + self.accel[i] * half;
                rotate(&mut v, self.rot_half);
                IonState::new(self.positions[i], v)
            })
            .collect())
    }
}
