use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A network output block could not be projected onto a rotation.
    #[error("degenerate output for joint {joint}")]
    DegenerateOutput { joint: usize },

    #[error("incomplete frame: {0}")]
    IncompleteFrame(String),

    #[error("calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("cannot upsample from {from} fps to {to} fps")]
    UnsupportedUpsample { from: u32, to: u32 },

    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    TrainingDiverged { epoch: usize, reason: String },

    #[error("truncated {format} data: needed {needed} bytes at offset {offset}")]
    Truncated {
        format: &'static str,
        offset: usize,
        needed: usize,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported {format} version {version}")]
    UnsupportedVersion { format: &'static str, version: u32 },

    #[error("malformed {format} data: {reason}")]
    Malformed {
        format: &'static str,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
