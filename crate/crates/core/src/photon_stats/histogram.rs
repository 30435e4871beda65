//! Start-stop waiting-time histograms and their exponential background.

use crate::dynamics::PhotonRecord;
use crate::error::{ensure, Error, Result};

/// Histogram of the intervals between consecutive detected photons.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingTimeHistogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// Number of start events, one less than the number of photons.
    pub total_starts: u64,
    /// Intervals longer than the last bin.
    pub overflow: u64,
}

impl WaitingTimeHistogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Centre of bin `k`, s.
    pub fn lag(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn max_lag(&self) -> f64 {
        self.bin_width * self.counts.len() as f64
    }
}

/// Pair each photon with the next one only and histogram the gaps.
pub fn waiting_time_histogram(
    photons: &PhotonRecord,
    bin_width: f64,
    max_lag: f64,
) -> Result<WaitingTimeHistogram> {
    waiting_times_from(&photons.timestamps, bin_width, max_lag)
}

/// As [`waiting_time_histogram`] for a bare timestamp slice.
pub fn waiting_times_from(
    timestamps: &[f64],
    bin_width: f64,
    max_lag: f64,
) -> Result<WaitingTimeHistogram> {
    ensure(bin_width > 0.0 && bin_width.is_finite(), || {
        format!("bin width must be positive, got {bin_width}")
    })?;
    ensure(max_lag >= bin_width, || {
        format!("max lag {max_lag} must be at least one bin ({bin_width})")
    })?;
    if timestamps.len() < 2 {
        return Err(Error::TooFewPhotons {
            needed: 2,
            have: timestamps.len(),
        });
    }
    let n_bins = (max_lag / bin_width).round().max(1.0) as usize;
    let mut counts = vec![0u64; n_bins];
    let mut overflow = 0;
    for w in timestamps.windows(2) {
        let k = ((w[1] - w[0]) / bin_width).floor();
        if k >= 0.0 && (k as usize) < n_bins {
            counts[k as usize] += 1;
        } else {
            overflow += 1;
        }
    }
    Ok(WaitingTimeHistogram {
        bin_width,
        counts,
        total_starts: timestamps.len() as u64 - 1,
        overflow,
    })
}

/// Background `A exp(-R t)` fitted to a histogram (counts per bin at the bin centres).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFit {
    pub amplitude: f64,
    pub rate: f64,
    /// Pearson chi-square per degree of freedom.
    pub chi2_per_dof: f64,
    pub iterations: usize,
}

impl ExponentialFit {
    pub fn model(&self, t: f64) -> f64 {
        self.amplitude * (-self.rate * t).exp()
    }
}

/// Poisson maximum-likelihood fit by Newton iteration on `(ln A, R)`.
pub fn fit_exponential(h: &WaitingTimeHistogram) -> Result<ExponentialFit> {
    let n = h.n_bins();
    if n < 3 {
        return Err(Error::FitFailed(format!("need at least 3 bins, have {n}")));
    }
    let total = h.total() as f64;
    if total <= 0.0 {
        return Err(Error::FitFailed("histogram is empty".into()));
    }
    let t: Vec<f64> = (0..n).map(|k| h.lag(k)).collect();
    let c: Vec<f64> = h.counts.iter().map(|&x| x as f64).collect();

    // start from the mean lag of the in-range part and a matched total
    let mean_t = t.iter().zip(&c).map(|(t, c)| t * c).sum::<f64>() / total;
    let mut rate = (1.0 / mean_t).max(1.0 / h.max_lag());
    let norm = |rate: f64| t.iter().map(|&t| (-rate * t).exp()).sum::<f64>();
    let mut a = (total / norm(rate)).ln();

    let mut iterations = 0;
    let mut converged = false;
    for it in 0..200 {
        iterations = it + 1;
        let (mut ga, mut gr, mut haa, mut har, mut hrr) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..n {
            let m = (a - rate * t[k]).exp();
            let r = c[k] - m;
            ga += r;
            gr -= t[k] * r;
            haa += m;
            har -= t[k] * m;
            hrr += t[k] * t[k] * m;
        }
        // Newton step on the concave log-likelihood: solve H d = g with H = [[haa, har], [har, hrr]]
        let det = haa * hrr - har * har;
        if !(det > 0.0) {
            break;
        }
        let da = (hrr * ga - har * gr) / det;
        let dr = (haa * gr - har * ga) / det;
        let mut scale = 1.0;
        // keep the rate positive
        while rate + scale * dr <= 0.0 && scale > 1e-6 {
            scale *= 0.5;
        }
        a += scale * da;
        rate += scale * dr;
        if (scale * dr).abs() <= 1e-12 * rate.abs() && (scale * da).abs() <= 1e-12 {
            converged = true;
            break;
        }
    }
    if !converged || !rate.is_finite() || !a.is_finite() || rate <= 0.0 {
        return Err(Error::FitFailed(format!(
            "exponential fit did not converge after {iterations} iterations"
        )));
    }
    let amplitude = a.exp();
    let chi2: f64 = (0..n)
        .map(|k| {
            let m = amplitude * (-rate * t[k]).exp();
            if m > 0.0 {
                (c[k] - m).powi(2) / m
            } else {
                0.0
            }
        })
        .sum();
    Ok(ExponentialFit {
        amplitude,
        rate,
        chi2_per_dof: chi2 / (n as f64 - 2.0),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson_stream(rate: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = 0.0;
        (0..n)
            .map(|_| {
                t += -(1.0 - rng.random::<f64>()).ln() / rate;
                t
            })
            .collect()
    }

    #[test]
    fn two_photons_single_count() {
        let h = waiting_times_from(&[0.0, 1e-3], 1e-4, 2e-3).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts[10], 1);
        assert_eq!(h.total_starts, 1);
    }

    #[test]
    fn too_few_photons() {
        assert!(matches!(
            waiting_times_from(&[1.0], 1e-6, 1e-4),
            Err(Error::TooFewPhotons { needed: 2, have: 1 })
        ));
    }

    #[test]
    fn overflow_accounting() {
        let ts = poisson_stream(1e5, 20_000, 3);
        let h = waiting_times_from(&ts, 1e-7, 2e-5).unwrap();
        assert!(h.overflow > 0);
        assert_eq!(h.total() + h.overflow, ts.len() as u64 - 1);
    }

    #[test]
    fn poisson_background_fits() {
        let rate = 5e4;
        let ts = poisson_stream(rate, 100_000, 11);
        let h = waiting_times_from(&ts, 2e-7, 1e-4).unwrap();
        let f = fit_exponential(&h).unwrap();
        assert!(f.chi2_per_dof < 2.0, "{}", f.chi2_per_dof);
        assert!((f.rate / rate - 1.0).abs() < 0.03, "{}", f.rate);
    }

    #[test]
    fn periodic_pairs_cluster_at_half_period() {
        // one bright pulse every half period, gap between pulses otherwise dark
        let half = 1.0 / (2.0 * 30e3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ts = Vec::new();
        for k in 0..4000 {
            if rng.random::<f64>() < 0.3 {
                ts.push(k as f64 * half + 0.5e-6 * rng.random::<f64>());
            }
        }
        let h = waiting_times_from(&ts, 1e-6, 100e-6).unwrap();
        let near: u64 = h
            .counts
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let t = h.lag(*k);
                let m = (t / half).round();
                m >= 1.0 && (t - m * half).abs() < 1.5e-6
            })
            .map(|(_, &c)| c)
            .sum();
        assert!(near as f64 > 0.95 * h.total() as f64);
    }
}
