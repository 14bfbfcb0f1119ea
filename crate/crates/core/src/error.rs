use thiserror::Error;

/// Errors raised by the simulator, optimizer and sweep layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CpfError {
    #[error("invalid cavity-QED parameters: {0}")]
    InvalidParams(String),

    #[error("two-qubit state is not normalized (norm^2 = {norm_sqr})")]
    UnnormalizedState { norm_sqr: f64 },

    #[error("input pulse is not normalized (norm^2 = {norm_sqr})")]
    UnnormalizedPulse { norm_sqr: f64 },

    #[error("every branch of the photon is lost; the conditional state cannot be renormalized")]
    TotalLoss,

    #[error("no photon reaches either detector")]
    ZeroDetection,

    #[error("spectral grids do not match")]
    GridMismatch,

    #[error("invalid spectral grid: {0}")]
    InvalidGrid(String),

    #[error("time window {available} is shorter than the required {required}")]
    WindowTooShort { required: f64, available: f64 },

    #[error("spectral grid would need {required} points (limit {limit})")]
    GridTooLarge { required: usize, limit: usize },

    #[error("time step {dt} exceeds the stability limit {max}")]
    StepTooLarge { dt: f64, max: f64 },

    #[error("norm bookkeeping violated by {violation:e} at t = {time}")]
    NormBookkeeping { violation: f64, time: f64 },

    #[error("loss probability {p_loss} is beyond the loss-only threshold {limit}; no boundary exists")]
    NoBoundary { p_loss: f64, limit: f64 },

    #[error("loss-optimal coupling has no finite closed form for a lossless cavity (kappa_int = 0)")]
    LosslessCavity,

    #[error("invalid probability {0}")]
    InvalidProbability(f64),

    #[error("power-law fit failed: {0}")]
    FitFailed(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sweep failed at {failed} of {total} grid points")]
    SweepFailed { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, CpfError>;
