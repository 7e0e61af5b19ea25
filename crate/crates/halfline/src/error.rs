use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps `Param`, `Model`, `Regime` and I/O failures to exit code 1;
/// statistical gate failures are reported separately with exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("synthesis error: {0}")]
    Synthesis(String),

    #[error("horizon not reached: {0}")]
    Horizon(String),

    #[error("sampler failed to absorb: {0}")]
    Absorption(String),

    #[error("degenerate level grid: {0}")]
    DegenerateGrid(String),

    #[error("insufficient tail data: {0}")]
    TailData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
