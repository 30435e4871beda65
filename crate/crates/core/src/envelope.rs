//! Slow radial-envelope model of axialisation.
//!
//! The cyclotron and magnetron radii obey the linear system
//!
//! ```text
//! dr_c/dt =  delta r_m - gamma_c r_c
//! dr_m/dt = -delta r_c - gamma_m r_m
//! ```
//!
//! where `delta` is the coupling rate set by the quadrupole drive and
//! `gamma_c`, `gamma_m` are the laser damping rates (positive = cooling).
//! The system matrix `[[-gamma_c, delta], [-delta, -gamma_m]]` has
//! trace `-(gamma_c + gamma_m)` and determinant `gamma_c gamma_m + delta^2`,
//! so the ion spirals in when `delta^2 > -gamma_c gamma_m` and settles on a
//! marginal orbit at equality.
//!
//! A finite laser beam reduces both damping rates once the orbit leaves the
//! beam; [`OverlapModel`] captures that with a ring-averaged Gaussian overlap
//! and [`find_stable_orbit_radius`] solves for the radius where the marginal
//! condition is restored.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{ensure, Error, Result};

/// Coupling and damping rates, all in s^-1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    pub delta: f64,
    pub gamma_c: f64,
    pub gamma_m: f64,
}

impl EnvelopeParams {
    pub fn new(delta: f64, gamma_c: f64, gamma_m: f64) -> Result<Self> {
        ensure(delta >= 0.0 && delta.is_finite(), || {
            format!("coupling must be non-negative, got {delta}")
        })?;
        ensure(gamma_c.is_finite() && gamma_m.is_finite(), || {
            "damping rates must be finite".into()
        })?;
        Ok(Self {
            delta,
            gamma_c,
            gamma_m,
        })
    }

    /// Both damping rates multiplied by the overlap factor `eta`.
    pub fn scaled(&self, eta: f64) -> Self {
        Self {
            delta: self.delta,
            gamma_c: self.gamma_c * eta,
            gamma_m: self.gamma_m * eta,
        }
    }

    /// Largest magnitude among the three rates.
    pub fn rate_scale(&self) -> f64 {
        self.delta.max(self.gamma_c.abs()).max(self.gamma_m.abs())
    }
}

/// Cyclotron and magnetron amplitudes.
///
/// The linear model is evolved on signed amplitudes so that a radius passing
/// through zero is not reflected; the accessors report magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeState {
    c: f64,
    m: f64,
}

impl EnvelopeState {
    pub fn new(r_c: f64, r_m: f64) -> Result<Self> {
        ensure(r_c >= 0.0 && r_m >= 0.0, || {
            format!("radii must be non-negative, got ({r_c}, {r_m})")
        })?;
        Ok(Self { c: r_c, m: r_m })
    }

    pub fn r_c(&self) -> f64 {
        self.c.abs()
    }

    pub fn r_m(&self) -> f64 {
        self.m.abs()
    }

    /// Signed amplitudes `(c, m)`.
    pub fn signed(&self) -> (f64, f64) {
        (self.c, self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeKind {
    /// Undamped exchange between the two motions.
    Cycling,
    /// Both eigenvalues decay: the ion spirals to the axis.
    Axialising,
    /// One eigenvalue is zero: a finite orbit persists.
    MarginalStableOrbit,
    /// A growing eigenvalue: the orbit expands.
    Expanding,
}

impl RegimeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeKind::Cycling => "cycling",
            RegimeKind::Axialising => "axialising",
            RegimeKind::MarginalStableOrbit => "marginal-stable-orbit",
            RegimeKind::Expanding => "expanding",
        }
    }
}

impl std::fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    pub kind: RegimeKind,
    pub eigenvalues: (Complex64, Complex64),
}

/// Eigenvalues `lambda_{+,-} = -(gamma_c+gamma_m)/2 +- sqrt(((gamma_c-gamma_m)/2)^2 - delta^2)`.
///
/// The larger real part comes first. Real roots are formed with the
/// cancellation-free product form so that a near-zero root keeps its
/// relative accuracy.
pub fn envelope_eigenvalues(p: &EnvelopeParams) -> (Complex64, Complex64) {
    let mean = -0.5 * (p.gamma_c + p.gamma_m);
    let half_diff = 0.5 * (p.gamma_c - p.gamma_m);
    let disc = half_diff * half_diff - p.delta * p.delta;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // lambda_+ lambda_- = det, pick the root without cancellation first
        let det = p.gamma_c * p.gamma_m + p.delta * p.delta;
        let big = if mean <= 0.0 { mean - s } else { mean + s };
        let small = if big != 0.0 { det / big } else { mean + s };
        let (hi, lo) = if small >= big {
            (small, big)
        } else {
            (big, small)
        };
        (Complex64::new(hi, 0.0), Complex64::new(lo, 0.0))
    } else {
        let w = (-disc).sqrt();
        (Complex64::new(mean, w), Complex64::new(mean, -w))
    }
}

/// Default regime tolerance, `1e-6` of the largest rate.
pub fn default_tolerance(p: &EnvelopeParams) -> f64 {
    1e-6 * p.rate_scale()
}

/// Classify the envelope dynamics.
///
/// `tol` is a rate (s^-1). The eigenvalue tests compare real parts against
/// `+-tol`; the marginal test uses the relative tolerance `tol / rate_scale`
/// on `|delta^2 + gamma_c gamma_m|`, so that scaling all rates and `tol`
/// together leaves the classification unchanged. Parameters where no
/// eigenvalue grows or decays beyond `tol` and the marginal test fails
/// (a balanced, neutrally oscillating system) are reported as cycling.
pub fn classify_regime(p: &EnvelopeParams, tol: f64) -> Result<Regime> {
    ensure(tol > 0.0, || {
        format!("tolerance must be positive, got {tol}")
    })?;
    let eigenvalues = envelope_eigenvalues(p);
    let kind = if p.gamma_c == 0.0 && p.gamma_m == 0.0 {
        RegimeKind::Cycling
    } else {
        let scale = p.rate_scale();
        let rel = tol / scale;
        let d2 = p.delta * p.delta;
        let prod = p.gamma_c * p.gamma_m;
        let max_re = eigenvalues.0.re.max(eigenvalues.1.re);
        let min_re = eigenvalues.0.re.min(eigenvalues.1.re);
        if (d2 + prod).abs() <= rel * d2.max(prod.abs()) && p.gamma_c + p.gamma_m > 0.0 {
            RegimeKind::MarginalStableOrbit
        } else if max_re < -tol && min_re < -tol {
            RegimeKind::Axialising
        } else if max_re > tol {
            RegimeKind::Expanding
        } else {
            RegimeKind::Cycling
        }
    };
    Ok(Regime { kind, eigenvalues })
}

/// Closed-form propagator `exp(A t)` of the envelope system.
fn propagator(p: &EnvelopeParams, t: f64) -> [[f64; 2]; 2] {
    let mu = -0.5 * (p.gamma_c + p.gamma_m);
    let h = 0.5 * (p.gamma_c - p.gamma_m);
    let disc = h * h - p.delta * p.delta;
    // exp(At) = e^{mu t} [ c(t) I + s(t) (A - mu I) ]
    let x2 = disc * t * t;
    let (c, s) = if x2.abs() < 1e-8 {
        // series in disc t^2, accurate through the crossover
        let c = 1.0 + x2 / 2.0 + x2 * x2 / 24.0;
        let s = t * (1.0 + x2 / 6.0 + x2 * x2 / 120.0);
        (c, s)
    } else if disc > 0.0 {
        let r = disc.sqrt();
        ((r * t).cosh(), (r * t).sinh() / r)
    } else {
        let w = (-disc).sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    };
    let e = (mu * t).exp();
    // A - mu I = [[-h, delta], [-delta, h]]
    [
        [e * (c - s * h), e * s * p.delta],
        [-e * s * p.delta, e * (c + s * h)],
    ]
}

/// Advance the envelope by `t` seconds with the exact matrix exponential.
pub fn evolve_envelope(p: &EnvelopeParams, s0: &EnvelopeState, t: f64) -> Result<EnvelopeState> {
    ensure(t >= 0.0 && t.is_finite(), || {
        format!("time must be non-negative, got {t}")
    })?;
    let m = propagator(p, t);
    Ok(EnvelopeState {
        c: m[0][0] * s0.c + m[0][1] * s0.m,
        m: m[1][0] * s0.c + m[1][1] * s0.m,
    })
}

/// Sampled envelope trajectory `(t, state)` on a uniform grid of spacing `dt`.
pub fn envelope_series(
    p: &EnvelopeParams,
    s0: &EnvelopeState,
    duration: f64,
    dt: f64,
) -> Result<Vec<(f64, EnvelopeState)>> {
    ensure(dt > 0.0 && duration >= 0.0, || {
        format!("need dt > 0 and duration >= 0, got dt={dt}, duration={duration}")
    })?;
    let n = (duration / dt).round() as usize;
    (0..=n)
        .map(|i| {
            let t = i as f64 * dt;
            evolve_envelope(p, s0, t).map(|s| (t, s))
        })
        .collect()
}

/// Gaussian laser beam seen by a circular orbit centred on the trap axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapModel {
    /// 1/e^2 intensity radius `w`, m.
    pub waist: f64,
    /// Beam-axis offset from the trap centre, m.
    pub offset: f64,
    /// Damping rates at full overlap, s^-1.
    pub gamma_c0: f64,
    pub gamma_m0: f64,
}

impl OverlapModel {
    pub fn new(waist: f64, offset: f64, gamma_c0: f64, gamma_m0: f64) -> Result<Self> {
        ensure(waist > 0.0, || {
            format!("waist must be positive, got {waist}")
        })?;
        Ok(Self {
            waist,
            offset,
            gamma_c0,
            gamma_m0,
        })
    }
}

const OVERLAP_POINTS: usize = 512;

/// Ring-averaged relative intensity
/// `eta(rho) = (1/2pi) \oint exp(-2 (rho cos(theta) - x_L)^2 / w^2) d theta`.
///
/// The integrand is smooth and periodic, so the trapezoid rule converges
/// geometrically.
pub fn overlap_factor(m: &OverlapModel, orbit_radius: f64) -> Result<f64> {
    ring_average(m, orbit_radius, |_| 1.0)
}

/// Overlap seen by the magnetron velocity along the beam,
/// `2 <cos^2(theta) exp(-2 (rho cos(theta) - x_L)^2 / w^2)>`.
///
/// Drag on a circular orbit acts only on the velocity component along the
/// beam, and that component peaks where the orbit is farthest from the beam
/// axis. Equal to [`overlap_factor`] at zero radius.
pub fn magnetron_overlap_factor(m: &OverlapModel, orbit_radius: f64) -> Result<f64> {
    if orbit_radius == 0.0 {
        return overlap_factor(m, 0.0);
    }
    ring_average(m, orbit_radius, |theta| 2.0 * theta.cos().powi(2))
}

// rho cos(theta) is the distance across the beam; the velocity along the beam
// goes as cos(theta) too.
fn ring_average(m: &OverlapModel, orbit_radius: f64, weight: impl Fn(f64) -> f64) -> Result<f64> {
    ensure(orbit_radius >= 0.0, || {
        format!("orbit radius must be non-negative, got {orbit_radius}")
    })?;
    let inv_w2 = 2.0 / (m.waist * m.waist);
    if orbit_radius == 0.0 {
        return Ok((-inv_w2 * m.offset * m.offset).exp());
    }
    let step = 2.0 * PI / OVERLAP_POINTS as f64;
    let sum: f64 = (0..OVERLAP_POINTS)
        .map(|k| {
            let theta = k as f64 * step;
            let d = orbit_radius * theta.cos() - m.offset;
            weight(theta) * (-inv_w2 * d * d).exp()
        })
        .sum();
    Ok(sum / OVERLAP_POINTS as f64)
}

/// Envelope with radius-dependent rates: the cyclotron damping is scaled by
/// [`overlap_factor`] and the magnetron damping by [`magnetron_overlap_factor`],
/// both at the current magnetron radius. Classical RK4 with step `dt`.
pub fn overlap_envelope_series(
    m: &OverlapModel,
    delta: f64,
    s0: &EnvelopeState,
    duration: f64,
    dt: f64,
) -> Result<Vec<(f64, EnvelopeState)>> {
    ensure(dt > 0.0 && duration >= 0.0, || {
        format!("need dt > 0 and duration >= 0, got dt={dt}, duration={duration}")
    })?;
    let rhs = |c: f64, r: f64| -> (f64, f64) {
        let rho = r.abs();
        let eta_c = overlap_factor(m, rho).expect("radius is non-negative");
        let eta_m = magnetron_overlap_factor(m, rho).expect("radius is non-negative");
        (
            delta * r - m.gamma_c0 * eta_c * c,
            -delta * c - m.gamma_m0 * eta_m * r,
        )
    };
    let n = (duration / dt).round() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let (mut c, mut r) = (s0.c, s0.m);
    out.push((0.0, *s0));
    for i in 1..=n {
        let k1 = rhs(c, r);
        let k2 = rhs(c + 0.5 * dt * k1.0, r + 0.5 * dt * k1.1);
        let k3 = rhs(c + 0.5 * dt * k2.0, r + 0.5 * dt * k2.1);
        let k4 = rhs(c + dt * k3.0, r + dt * k3.1);
        c += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        r += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        ensure(c.is_finite() && r.is_finite(), || "envelope diverged".into())?;
        out.push((i as f64 * dt, EnvelopeState { c, m: r }));
    }
    Ok(out)
}

/// Result of the stable-orbit search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableOrbit {
    pub radius: f64,
    pub overlap: f64,
}

/// Solve `delta^2 = -gamma_c0 gamma_m0 eta(rho)^2` for the orbit radius with
/// the ring-averaged overlap.
pub fn find_stable_orbit_radius(m: &OverlapModel, delta: f64) -> Result<StableOrbit> {
    find_stable_orbit_radius_with(m, delta, |rho| {
        overlap_factor(m, rho).expect("radius is non-negative")
    })
}

/// As [`find_stable_orbit_radius`] but with separate overlaps for the two modes:
/// `delta^2 = -gamma_c0 gamma_m0 eta(rho) eta_m(rho)`, where `eta_m` is
/// [`magnetron_overlap_factor`]. The reported overlap is the geometric mean.
pub fn find_stable_orbit_radius_resolved(m: &OverlapModel, delta: f64) -> Result<StableOrbit> {
    find_stable_orbit_radius_with(m, delta, |rho| {
        let c = overlap_factor(m, rho).expect("radius is non-negative");
        let g = magnetron_overlap_factor(m, rho).expect("radius is non-negative");
        (c * g).sqrt()
    })
}

/// [`find_stable_orbit_radius`] with a caller-supplied overlap function.
///
/// The radius returned is the first root reached when the orbit grows from
/// the centre, refined by bisection to well below `1e-3 w`.
pub fn find_stable_orbit_radius_with<F>(m: &OverlapModel, delta: f64, eta: F) -> Result<StableOrbit>
where
    F: Fn(f64) -> f64,
{
    ensure(delta >= 0.0, || {
        format!("coupling must be non-negative, got {delta}")
    })?;
    ensure(m.gamma_c0 > 0.0 && m.gamma_m0 < 0.0, || {
        format!(
            "a stable orbit needs gamma_c0 > 0 and gamma_m0 < 0, got ({}, {})",
            m.gamma_c0, m.gamma_m0
        )
    })?;
    if delta == 0.0 {
        return Err(Error::NoStableOrbit);
    }
    let strength = -m.gamma_c0 * m.gamma_m0;
    let d2 = delta * delta;
    let g = |rho: f64| strength * eta(rho).powi(2) - d2;
    if g(0.0) <= 0.0 {
        return Err(Error::NoExpansion);
    }
    // march outwards to the first sign change
    let h = 0.01 * m.waist;
    let limit = 1e4 * m.waist + 100.0 * m.offset.abs();
    let mut lo = 0.0;
    let mut hi = h;
    while g(hi) > 0.0 {
        lo = hi;
        hi += h;
        if hi > limit {
            return Err(Error::NoStableOrbit);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // endpoint with the smaller residual
    let radius = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    Ok(StableOrbit {
        radius,
        overlap: eta(radius),
    })
}

/// Linear calibration from axialisation drive amplitude (V) to coupling rate.
pub fn coupling_from_drive(drive_amplitude: f64, k_delta: f64) -> Result<f64> {
    ensure(drive_amplitude >= 0.0, || {
        format!("drive amplitude must be non-negative, got {drive_amplitude}")
    })?;
    Ok(k_delta * drive_amplitude)
}

/// Default calibration of [`coupling_from_drive`], s^-1 per volt.
pub const DEFAULT_K_DELTA: f64 = 400.0;
