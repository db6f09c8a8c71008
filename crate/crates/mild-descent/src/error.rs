use thiserror::Error;

/// Errors shared by the solver modules.
///
/// Construction-time contract violations (dimension or alignment mistakes)
/// and runtime integration failures both land here; callers that can
/// distinguish them usually only need the message.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time {t} is not a fine-grid node (dt = {dt})")]
    NotGridAligned { t: f64, dt: f64 },

    #[error("control partitions cover different horizons: {left} vs {right}")]
    HorizonMismatch { left: f64, right: f64 },

    // Reads as "<name> must be ...": reasons start with the violated bound.
    #[error("{name} {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("control value at interval {interval} has norm {norm} > radius {radius}")]
    ControlOutOfBall {
        interval: usize,
        norm: f64,
        radius: f64,
    },

    #[error("state diverged at t = {t}: sup-norm {norm} exceeds 1e6")]
    Diverged { t: f64, norm: f64 },

    #[error("problem does not provide {field}, required for variational checks")]
    MissingDerivative { field: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;
