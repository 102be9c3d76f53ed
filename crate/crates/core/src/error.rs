use thiserror::Error;

use crate::model::StreamId;

/// Errors raised by channel generation, beamformer construction and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix is rank deficient (rank {rank}, required {required})")]
    RankDeficient { rank: usize, required: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("relay has no antennas")]
    MissingRelay,

    #[error("effective desired gain of stream {stream} vanished (|g| = {magnitude:e})")]
    EffectiveGainVanished { stream: StreamId, magnitude: f64 },

    #[error("constraint residual {residual:e} for stream {stream} exceeds tolerance")]
    ResidualExceeded { stream: StreamId, residual: f64 },

    #[error("relay cannot decode the unknown streams after subtracting known ones (rank {rank})")]
    CognitionInsufficient { rank: usize },

    #[error("frame streams do not match the beamformer set of scheme {0}")]
    SchemeMismatch(String),

    #[error("slot {0} out of range")]
    SlotOutOfRange(usize),

    #[error("resample rate {rate:.3} exceeds the abort threshold")]
    ResampleRateExceeded { rate: f64 },
}

impl Error {
    /// True for failures caused by a degenerate channel draw, which the sweep
    /// driver handles by resampling.
    pub fn is_degenerate_draw(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::EffectiveGainVanished { .. }
                | Error::ResidualExceeded { .. }
                | Error::CognitionInsufficient { .. }
        )
    }

    /// True for configuration and contract violations (as opposed to runtime failures).
    pub fn is_contract_violation(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Precondition(_) | Error::SlotOutOfRange(_) | Error::MissingRelay
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
