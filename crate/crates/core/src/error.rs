use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("normalization violated: |a0|^2 + |a1|^2 = {norm_sqr} (must be 1)")]
    NormViolation { norm_sqr: f64 },

    #[error("degenerate delocalization: both a0 and a1 must be nonzero")]
    DegenerateDelocalization,

    #[error("required cutoff {required} exceeds the hard maximum {max}")]
    CutoffOverflow { required: usize, max: usize },

    #[error("zero-norm state")]
    ZeroNorm,

    #[error("outcome p = {p} lies beyond the mode cutoff {cutoff}")]
    OutcomeBeyondCutoff { p: usize, cutoff: usize },

    #[error("state is not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("no root of the residual inside the bracket")]
    NoRootInBracket,

    #[error("conditional state does not factor into two parity branches: {0}")]
    BranchFactorizationFailure(String),

    #[error("parity structure violated: {0}")]
    ParityViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// `true` for errors caused by bad input rather than a numerical failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::NormViolation { .. }
                | Error::DegenerateDelocalization
                | Error::CutoffOverflow { .. }
                | Error::OutcomeBeyondCutoff { .. }
                | Error::NoRootInBracket
        )
    }
}
