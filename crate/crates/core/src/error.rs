use thiserror::Error;

/// Everything that can go wrong while building, propagating, detecting or
/// analysing a pulse.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("grid too coarse: fwhm {fwhm:e} s needs dt < {limit:e} s")]
    GridTooCoarse { fwhm: f64, limit: f64 },
    #[error("pulse exceeds grid: {0}")]
    PulseExceedsGrid(String),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("grids differ")]
    GridMismatch,
    #[error("pulse carries no energy")]
    ZeroPulse,
    #[error("time {t:e} s outside grid [{start:e}, {end:e}]")]
    TimeOutsideGrid { t: f64, start: f64, end: f64 },

    #[error("invalid medium: {0}")]
    InvalidMedium(String),
    #[error("operation needs a physical medium, got empirical mode")]
    EmpiricalMode,
    #[error("probe offset {offset:e} Hz outside sampled band ±{band:e} Hz")]
    ProbeOutsideBand { offset: f64, band: f64 },
    #[error("pulse spectrum outside resolved band of the transfer function: {0}")]
    BandViolation(String),
    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("power gain {0} below unity for an amplifier")]
    GainBelowUnity(f64),
    #[error("invalid photon moments: mean {mean}, variance {variance}")]
    InvalidMoments { mean: f64, variance: f64 },

    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("gate [{start:e}, {end:e}] s outside pulse grid")]
    GateOutsideGrid { start: f64, end: f64 },

    #[error("invalid detector: {0}")]
    InvalidDetector(String),
    #[error("gate delays are not uniform")]
    NonUniformDelays,

    #[error("region {0} out of bounds")]
    RegionOutOfBounds(String),
    #[error("frame stack of {len} frames too short for window {window}")]
    StackTooShort { len: usize, window: usize },
    #[error("no valid pre-pulse SNR samples to estimate the background floor")]
    NoBackgroundRegion,
    #[error("traces do not share a delay axis")]
    AxisMismatch,

    #[error("config error: {0}")]
    Config(String),
    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),
    #[error("missing series: {0}")]
    MissingSeries(String),
    #[error("malformed frame stack container: {0}")]
    Container(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::UnknownParameter(_)
                | Error::InvalidScene(_)
                | Error::InvalidDetector(_)
                | Error::InvalidMedium(_)
                | Error::InvalidGrid(_)
                | Error::RegionOutOfBounds(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
