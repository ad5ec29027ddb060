use thiserror::Error;

/// Errors raised by the simulator building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Inconsistent or out-of-range configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric parameter outside the domain of an operation.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Payload does not fit the resource grid.
    #[error("framing error: {0}")]
    Framing(String),

    /// No clear PSS correlation peak.
    #[error("synchronization failure: peak-to-secondary ratio {peak_ratio:.3}")]
    SyncFailure { peak_ratio: f64 },

    /// Filter specification not achievable within the tap budget.
    #[error(
        "filter design error: {taps} taps give {ripple_db:.4} dB ripple and {attenuation_db:.2} dB attenuation"
    )]
    Design {
        taps: usize,
        ripple_db: f64,
        attenuation_db: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
