use thiserror::Error;

/// Every failure the simulator and the analysis chain can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unstable trap: voltage exceeds the stability limit of {max_voltage} V")]
    UnstableTrap { max_voltage: f64 },

    #[error("unreachable target: {0}")]
    Unreachable(String),

    #[error("coupling is strong enough to axialise to the centre; no expanding orbit")]
    NoExpansion,

    #[error("no stable orbit exists for these parameters")]
    NoStableOrbit,

    #[error("ion {ion} escaped the trap at t = {time} s")]
    IonEscaped { ion: usize, time: f64 },

    #[error("ions {i} and {j} overlap (separation {separation} m)")]
    Overlap { i: usize, j: usize, separation: f64 },

    #[error("too few photons: need {needed}, have {have}")]
    TooFewPhotons { needed: usize, have: usize },

    #[error("no modulation: depth {depth} is below three times the uncertainty {uncertainty}")]
    NoModulation { depth: f64, uncertainty: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("incomplete phase swing of {swing} rad (need at least pi/2)")]
    IncompleteSwing { swing: f64 },

    #[error("no spectral peak near {frequency} Hz")]
    PeakNotFound { frequency: f64 },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("no signal: peak {peak} is below five times the background {background}")]
    NoSignal { peak: f64, background: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("scenario {scenario}: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Short machine-readable tag, used on the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::UnstableTrap { .. } => "UnstableTrap",
            Error::Unreachable(_) => "Unreachable",
            Error::NoExpansion => "NoExpansion",
            Error::NoStableOrbit => "NoStableOrbit",
            Error::IonEscaped { .. } => "IonEscaped",
            Error::Overlap { .. } => "Overlap",
            Error::TooFewPhotons { .. } => "TooFewPhotons",
            Error::NoModulation { .. } => "NoModulation",
            Error::FitFailed(_) => "FitFailed",
            Error::IncompleteSwing { .. } => "IncompleteSwing",
            Error::PeakNotFound { .. } => "PeakNotFound",
            Error::EmptyTrajectory => "EmptyTrajectory",
            Error::NoSignal { .. } => "NoSignal",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
            Error::Scenario { source, .. } => source.kind(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
