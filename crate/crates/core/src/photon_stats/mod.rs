//! Photon timing analysis: start-stop histograms, their spectra, and the
//! phase of the fluorescence relative to an rf drive.

pub mod histogram;
pub mod phase;
pub mod spectrum;

pub use histogram::{
    fit_exponential, waiting_time_histogram, waiting_times_from, ExponentialFit,
    WaitingTimeHistogram,
};
pub use phase::{
    phase_of, phase_response_scan, rf_photon_phase, unwrap_scan, PhaseFit, PhaseMeasurement,
};
pub use spectrum::{
    correlated_fraction, detrend_and_fft, detrend_and_fft_with, fraction_at, CorrelatedFraction,
    Peak, SpectrumPeaks, DEFAULT_SNR_THRESHOLD,
};
