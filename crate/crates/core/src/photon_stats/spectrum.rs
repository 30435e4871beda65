//! Background removal, power spectrum and peak detection on waiting-time
//! histograms.

use rustfft::{num_complex::Complex64, FftPlanner};

use crate::error::{Error, Result};

use super::histogram::{fit_exponential, ExponentialFit, WaitingTimeHistogram};

/// Default detection threshold on the amplitude ratio `sqrt(P / median P)`.
pub const DEFAULT_SNR_THRESHOLD: f64 = 4.0;

/// Fewest histogram bins accepted by [`detrend_and_fft`].
pub const MIN_BINS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Hz.
    pub frequency: f64,
    pub power: f64,
    pub snr: f64,
}

/// Detrended histogram, its power spectrum and the peaks found in it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPeaks {
    /// Bin centres of the histogram, s.
    pub lags: Vec<f64>,
    pub counts: Vec<f64>,
    /// Expected background counts per bin.
    pub background: Vec<f64>,
    /// `counts / background - 1`.
    pub detrended: Vec<f64>,
    /// Hz, from 0 up to the Nyquist frequency.
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub noise_floor: f64,
    pub threshold: f64,
    /// Sorted by frequency.
    pub peaks: Vec<Peak>,
    pub fit: Option<ExponentialFit>,
    /// Set when the exponential fit failed and the mean was subtracted instead.
    pub fallback: bool,
}

impl SpectrumPeaks {
    /// Frequency resolution, Hz.
    pub fn bin_spacing(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }

    /// Detected peak closest to `frequency` within `tolerance` Hz.
    pub fn peak_near(&self, frequency: f64, tolerance: f64) -> Option<&Peak> {
        self.peaks
            .iter()
            .filter(|p| (p.frequency - frequency).abs() <= tolerance)
            .min_by(|a, b| {
                (a.frequency - frequency)
                    .abs()
                    .total_cmp(&(b.frequency - frequency).abs())
            })
    }
}

pub fn detrend_and_fft(h: &WaitingTimeHistogram) -> Result<SpectrumPeaks> {
    detrend_and_fft_with(h, DEFAULT_SNR_THRESHOLD)
}

/// Divide out the exponential background, window, transform and pick peaks.
///
/// The spectrum is taken of the noise-normalised residual
/// `(counts - background) / sqrt(background)` so that shot noise is white
/// across the histogram and the median power is a fair noise floor.
pub fn detrend_and_fft_with(h: &WaitingTimeHistogram, threshold: f64) -> Result<SpectrumPeaks> {
    let n = h.n_bins();
    if n < MIN_BINS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_BINS} histogram bins, have {n}"
        )));
    }
    let lags: Vec<f64> = (0..n).map(|k| h.lag(k)).collect();
    let counts: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();
    let (fit, background, fallback) = match fit_exponential(h) {
        Ok(f) => {
            let bg: Vec<f64> = lags.iter().map(|&t| f.model(t)).collect();
            (Some(f), bg, false)
        }
        Err(_) => {
            let mean = counts.iter().sum::<f64>() / n as f64;
            (None, vec![mean; n], true)
        }
    };
    let detrended: Vec<f64> = counts
        .iter()
        .zip(&background)
        .map(|(&c, &m)| if m > 0.0 { c / m - 1.0 } else { 0.0 })
        .collect();

    let mut buf: Vec<Complex64> = (0..n)
        .map(|k| {
            let m = background[k];
            let r = if m > 0.0 {
                (counts[k] - m) / m.sqrt()
            } else {
                0.0
            };
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos();
            Complex64::new(r * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let df = 1.0 / (n as f64 * h.bin_width);
    let frequencies: Vec<f64> = (0..=half).map(|j| j as f64 * df).collect();
    let power: Vec<f64> = buf[..=half].iter().map(|z| z.norm_sqr()).collect();

    let mut floor_sample: Vec<f64> = power[1..].to_vec();
    floor_sample.sort_by(f64::total_cmp);
    let noise_floor = floor_sample[floor_sample.len() / 2];

    let mut peaks = Vec::new();
    if noise_floor > 0.0 {
        // the window leaks the residual mean into bin 1, so start at bin 2
        for j in 2..=half {
            let p = power[j];
            let left = power[j - 1];
            let right = if j < half { power[j + 1] } else { 0.0 };
            if p > left && p >= right {
                let snr = (p / noise_floor).sqrt();
                if snr >= threshold {
                    peaks.push(Peak {
                        frequency: frequencies[j],
                        power: p,
                        snr,
                    });
                }
            }
        }
    }
    Ok(SpectrumPeaks {
        lags,
        counts,
        background,
        detrended,
        frequencies,
        power,
        noise_floor,
        threshold,
        peaks,
        fit,
        fallback,
    })
}

/// Share of the histogram carried by a coherent modulation at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatedFraction {
    /// Amplitude of the fitted modulation relative to the background, in [0, 1].
    pub fraction: f64,
    /// One-sigma shot-noise uncertainty.
    pub sigma: f64,
    /// Refined modulation frequency, Hz.
    pub frequency: f64,
}

/// Fit `detrended = a cos(2 pi f t) + b sin(2 pi f t)` weighted by the background
/// counts and report `sqrt(a^2 + b^2)`. The frequency is refined within one
/// bin of the detected peak.
pub fn correlated_fraction(spectrum: &SpectrumPeaks, peak_freq: f64) -> Result<CorrelatedFraction> {
    let df = spectrum.bin_spacing();
    let peak = spectrum
        .peak_near(peak_freq, 1.5 * df)
        .ok_or(Error::PeakNotFound {
            frequency: peak_freq,
        })?;
    Ok(fraction_at(spectrum, peak.frequency))
}

/// Cosine amplitude at `frequency` refined within one bin, whether or not a
/// peak was detected there. Used to bound the modulation of a null result.
pub fn fraction_at(spectrum: &SpectrumPeaks, frequency: f64) -> CorrelatedFraction {
    let df = spectrum.bin_spacing();
    let mut best = (0.0, frequency);
    for k in -40..=40 {
        let f = frequency + k as f64 * df / 40.0;
        let a = cosine_amplitude(spectrum, f);
        if a > best.0 {
            best = (a, f);
        }
    }
    let weight: f64 = spectrum.background.iter().sum();
    CorrelatedFraction {
        fraction: best.0.clamp(0.0, 1.0),
        sigma: (2.0 / weight.max(f64::MIN_POSITIVE)).sqrt(),
        frequency: best.1,
    }
}

fn cosine_amplitude(s: &SpectrumPeaks, f: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * f;
    let (mut cc, mut ss, mut cs, mut yc, mut ys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&t, &y), &m) in s.lags.iter().zip(&s.detrended).zip(&s.background) {
        let (sn, cn) = (w * t).sin_cos();
        cc += m * cn * cn;
        ss += m * sn * sn;
        cs += m * cn * sn;
        yc += m * y * cn;
        ys += m * y * sn;
    }
    let det = cc * ss - cs * cs;
    if det <= 0.0 {
        return 0.0;
    }
    let a = (ss * yc - cs * ys) / det;
    let b = (cc * ys - cs * yc) / det;
    a.hypot(b)
}
