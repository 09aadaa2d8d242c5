use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate envelope")]
    DegenerateEnvelope,
    #[error("envelope needs at least {min} grid points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("time grid is not uniform and strictly increasing at index {index}")]
    NonUniformGrid { index: usize },
    #[error("envelope amplitudes ({amplitudes}) do not match grid length ({grid})")]
    LengthMismatch { grid: usize, amplitudes: usize },
    #[error("envelopes are sampled on different grids")]
    GridMismatch,
    #[error("envelope is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("modes coincide; complement undefined")]
    ModesCoincide,
    #[error("truncation cap exceeded (mean {mean}, cap {cap})")]
    TruncationCapExceeded { mean: f64, cap: u64 },
    #[error("invalid {name}: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("distortion out of [0,1]")]
    DistortionOutOfRange,
    #[error("negative pulse energy")]
    NegativePulseEnergy,
    #[error("invalid thresholds: k0 ({k0}) exceeds k1 ({k1})")]
    InvalidThresholds { k0: u64, k1: u64 },
    #[error("threshold span cap exceeded (span {span}, cap {cap})")]
    ThresholdSpanExceeded { span: u64, cap: u64 },
    #[error("insufficient slots: {slots} < {min}")]
    InsufficientSlots { slots: u64, min: u64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(&'static str),
}
