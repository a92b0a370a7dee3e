//! Joint design of hybrid multi-group multicast transmit precoders and
//! per-user receive combiners for mmWave links.
//!
//! The transmit side cascades a digital precoder per multicast group with an
//! analog network of finite-resolution phase shifters; every user applies a
//! digital receive combiner. The three blocks are optimized alternately, each
//! through a semidefinite relaxation solved by the embedded [`conic`] solver
//! followed by randomized rank-one extraction.
//!
//! * [`channel`] — geometric channel model and correlation statistics.
//! * [`precoding`] — signal-domain types, SINR, power and beam patterns.
//! * [`sdr`] — the three relaxations and their randomization stages.
//! * [`algorithm`] — the alternating loop and the fully-digital baseline.
//! * [`harness`] — scenarios, presets, Monte-Carlo sweeps and CSV output.
//! * [`random`] — complex Gaussian draws and reproducible stream derivation.

pub mod algorithm;
pub mod channel;
pub mod harness;
pub mod precoding;
pub mod random;
pub mod sdr;

pub use conic::{CMat, CVec, C64};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("solver: {0}")]
    Solver(#[from] conic::ConicError),
    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl SimError {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, found: usize) -> Self {
        SimError::Dimension {
            context: context.into(),
            expected,
            found,
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Validation failures (as opposed to runtime failures) map to exit code 1.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SimError::Config { .. } | SimError::Json(_) | SimError::InvalidInput(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
