//! Phase of the fluorescence modulation relative to an rf drive, and the
//! damping rate extracted from how that phase turns through a resonance.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::dynamics::PhotonRecord;
use crate::error::{Error, Result};

/// Fewest photons accepted by [`rf_photon_phase`].
pub const MIN_PHOTONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMeasurement {
    /// Angular frequency of the drive, rad/s.
    pub drive_frequency: f64,
    /// Drive phase at which the fluorescence peaks, in (-pi, pi].
    pub phase: f64,
    /// Modulation depth in [0, 1].
    pub depth: f64,
    /// One-sigma phase uncertainty, rad.
    pub uncertainty: f64,
    pub n_photons: usize,
}

/// Fold the photons onto the drive cycle and take the first circular moment.
///
/// For a detection rate proportional to `1 + b cos(theta - phi)` the moment
/// is `(b/2) exp(i phi)`, so the phase is its argument and the depth twice its
/// modulus. The uncertainty is `1 / sqrt(N |m|)`.
pub fn rf_photon_phase(
    photons: &PhotonRecord,
    drive_freq: f64,
    drive_phase0: f64,
) -> Result<PhaseMeasurement> {
    phase_of(&photons.timestamps, drive_freq, drive_phase0)
}

/// As [`rf_photon_phase`] for a bare timestamp slice.
pub fn phase_of(
    timestamps: &[f64],
    drive_freq: f64,
    drive_phase0: f64,
) -> Result<PhaseMeasurement> {
    let n = timestamps.len();
    if n < MIN_PHOTONS {
        return Err(Error::TooFewPhotons {
            needed: MIN_PHOTONS,
            have: n,
        });
    }
    let sum: Complex64 = timestamps
        .iter()
        .map(|&t| Complex64::from_polar(1.0, (drive_freq * t + drive_phase0).rem_euclid(2.0 * PI)))
        .sum();
    let m = sum / n as f64;
    let r = m.norm();
    let depth = (2.0 * r).min(1.0);
    let uncertainty = if r > 0.0 {
        1.0 / (n as f64 * r).sqrt()
    } else {
        f64::INFINITY
    };
    if !(depth >= 3.0 * uncertainty) {
        return Err(Error::NoModulation { depth, uncertainty });
    }
    let mut phase = m.arg();
    if phase <= -PI {
        phase += 2.0 * PI;
    }
    Ok(PhaseMeasurement {
        drive_frequency: drive_freq,
        phase,
        depth,
        uncertainty,
        n_photons: n,
    })
}

/// Result of fitting `phi(omega) = phi_0 - sense * atan((omega - omega_0) / gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFit {
    /// Damping rate, s^-1.
    pub gamma: f64,
    /// Resonance, rad/s.
    pub omega_0: f64,
    pub phi_0: f64,
    /// Root-mean-square weighted residual.
    pub residual: f64,
    /// Range of the unwrapped measured phases, rad.
    pub swing: f64,
    /// +1 when the phase falls through the resonance, -1 when it rises.
    /// Photon phases follow the motion, whose lag grows with frequency, so
    /// simulated scans come out with -1.
    pub sense: f64,
}

impl PhaseFit {
    pub fn model(&self, omega: f64) -> f64 {
        self.phi_0 - self.sense * ((omega - self.omega_0) / self.gamma).atan()
    }
}

/// Sort by frequency and remove 2 pi jumps between neighbouring points.
pub fn unwrap_scan(scan: &[PhaseMeasurement]) -> Vec<PhaseMeasurement> {
    let mut pts = scan.to_vec();
    pts.sort_by(|a, b| a.drive_frequency.total_cmp(&b.drive_frequency));
    for k in 1..pts.len() {
        let prev = pts[k - 1].phase;
        let mut p = pts[k].phase;
        while p - prev > PI {
            p -= 2.0 * PI;
        }
        while p - prev < -PI {
            p += 2.0 * PI;
        }
        pts[k].phase = p;
    }
    pts
}

/// Fit the response phase of a first-order resonance across a frequency scan.
///
/// A coarse grid over `(omega_0, gamma)` with `phi_0` solved in closed form
/// seeds a Levenberg-Marquardt refinement in `(phi_0, omega_0, ln gamma)`.
pub fn phase_response_scan(scan: &[PhaseMeasurement]) -> Result<PhaseFit> {
    if scan.len() < 5 {
        return Err(Error::FitFailed(format!(
            "need at least 5 scan points, have {}",
            scan.len()
        )));
    }
    let pts = unwrap_scan(scan);
    let w: Vec<f64> = pts.iter().map(|p| p.drive_frequency).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.phase).collect();
    let wt: Vec<f64> = pts
        .iter()
        .map(|p| {
            let s = if p.uncertainty.is_finite() && p.uncertainty > 0.0 {
                p.uncertainty
            } else {
                1.0
            };
            1.0 / (s * s)
        })
        .collect();
    if w.iter().chain(&y).any(|v| !v.is_finite()) {
        return Err(Error::FitFailed("non-finite scan point".into()));
    }
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let swing = hi - lo;
    if swing < FRAC_PI_2 {
        return Err(Error::IncompleteSwing { swing });
    }
    let span = w[w.len() - 1] - w[0];
    if !(span > 0.0) {
        return Err(Error::FitFailed("scan has no frequency span".into()));
    }
    let flipped: Vec<f64> = y.iter().map(|v| -v).collect();
    let (sense, (gamma, w0, phi0, chi2)) =
        match (fit_falling(&w, &y, &wt), fit_falling(&w, &flipped, &wt)) {
            (Ok(f), Ok(r)) if r.3 < f.3 => (-1.0, (r.0, r.1, -r.2, r.3)),
            (Ok(f), _) => (1.0, f),
            (Err(_), Ok(r)) => (-1.0, (r.0, r.1, -r.2, r.3)),
            (Err(e), Err(_)) => return Err(e),
        };
    let sw: f64 = wt.iter().sum();
    Ok(PhaseFit {
        gamma,
        omega_0: w0,
        phi_0: phi0,
        residual: (chi2 / sw).sqrt(),
        swing,
        sense,
    })
}

/// Weighted fit of `y = phi_0 - atan((w - w0) / gamma)`; returns `(gamma, w0, phi_0, chi2)`.
fn fit_falling(w: &[f64], y: &[f64], wt: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let span = w[w.len() - 1] - w[0];
    let best_phi0 = |w0: f64, g: f64| -> (f64, f64) {
        let (mut s, mut sw) = (0.0, 0.0);
        for k in 0..w.len() {
            s += wt[k] * (y[k] + ((w[k] - w0) / g).atan());
            sw += wt[k];
        }
        let phi0 = s / sw;
        let chi2 = (0..w.len())
            .map(|k| wt[k] * (y[k] - phi0 + ((w[k] - w0) / g).atan()).powi(2))
            .sum();
        (phi0, chi2)
    };

    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    for i in 0..=200 {
        let w0 = w[0] + span * i as f64 / 200.0;
        for j in 0..=80 {
            let g = span * 10f64.powf(-3.0 + 4.0 * j as f64 / 80.0);
            let (phi0, chi2) = best_phi0(w0, g);
            if chi2 < best.0 {
                best = (chi2, phi0, w0, g);
            }
        }
    }
    let (mut chi2, mut phi0, mut w0, g) = best;
    let mut lg = g.ln();

    let eval = |phi0: f64, w0: f64, lg: f64| -> f64 {
        let g = lg.exp();
        (0..w.len())
            .map(|k| wt[k] * (y[k] - phi0 + ((w[k] - w0) / g).atan()).powi(2))
            .sum()
    };
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let g = lg.exp();
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for k in 0..w.len() {
            let u = (w[k] - w0) / g;
            let d = 1.0 + u * u;
            let r = y[k] - (phi0 - u.atan());
            let jac = Vector3::new(1.0, 1.0 / (g * d), u / d);
            jtj += jac * jac.transpose() * wt[k];
            jtr += jac * (r * wt[k]);
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for i in 0..3 {
                a[(i, i)] *= 1.0 + lambda;
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let (p, c, l) = (phi0 + step[0], w0 + step[1], lg + step[2]);
            let c2 = eval(p, c, l);
            if c2.is_finite() && c2 <= chi2 {
                let done = (chi2 - c2) <= 1e-14 * chi2.max(1e-300);
                phi0 = p;
                w0 = c;
                lg = l;
                chi2 = c2;
                lambda = (lambda * 0.3).max(1e-12);
                improved = !done;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let gamma = lg.exp();
    if !(gamma.is_finite() && gamma > 0.0 && w0.is_finite()) {
        return Err(Error::FitFailed("phase fit diverged".into()));
    }
    Ok((gamma, w0, phi0, chi2))
}
