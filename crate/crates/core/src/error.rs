use thiserror::Error;

use crate::ppfpca::EigenSystem;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("curves are defined on different grids")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("insufficient resolution: need at least {needed} grid points, got {got}")]
    InsufficientResolution { needed: usize, got: usize },

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("all residuals are zero; the M-scale is degenerate")]
    DegenerateScale,

    #[error("M-scale equation has no root: {zeros} of {n} residuals are exactly zero")]
    NoScaleRoot { zeros: usize, n: usize },

    #[error("no tuning constant attains the requested target {0}")]
    Unattainable(f64),

    #[error("rank exhausted while extracting component {component}")]
    RankExhausted {
        component: usize,
        partial: Box<EigenSystem>,
    },

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("degenerate leverage at row {row}: h = {h}")]
    DegenerateLeverage { row: usize, h: f64 },

    #[error("degenerate signal: the clean response has zero spread")]
    DegenerateSignal,

    #[error("Cholesky factorisation failed after diagonal jitter")]
    Cholesky,

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("no candidate number of components could be fitted")]
    SelectionFailed,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for problems with the caller's input, as opposed to numerical
    /// failures inside an estimator.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::GridMismatch
                | Error::InvalidGrid(_)
                | Error::InsufficientResolution { .. }
                | Error::InsufficientData { .. }
                | Error::NonFinite(_)
                | Error::OutOfRange { .. }
                | Error::InvalidArgument(_)
                | Error::Parse { .. }
                | Error::Io(_)
        )
    }
}
