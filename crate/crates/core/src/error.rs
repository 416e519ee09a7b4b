use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no unique steady state: dynamical matrix is not Hurwitz (max Re(lambda) = {max_real:e})")]
    NotHurwitz { max_real: f64 },

    #[error("range error: {0}")]
    Range(String),

    #[error("unphysical parameters: {0}")]
    UnphysicalParameters(String),

    #[error("unphysical state: {0}")]
    UnphysicalState(String),

    #[error("parameters do not correspond to the requested exceptional point: {0}")]
    WrongEp(String),

    #[error("unsupported Jordan block size {0} (supported: 1, 2, 3)")]
    UnsupportedBlockSize(usize),

    #[error("branch function diverges at eps = 0 for inner sign '-'")]
    DivergentBranch,

    #[error("ambiguous eigenvalue clustering: EP order is {lower} or {upper}")]
    AmbiguousClassification { lower: u8, upper: u8 },

    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("criterion not met within trace (final gap {final_gap:e})")]
    NotConverged { final_gap: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures caused by the caller's parameters rather than by
    /// numerics.
    pub fn is_parameter_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::UnphysicalParameters(_)
                | Error::WrongEp(_)
                | Error::DivergentBranch
                | Error::UnsupportedBlockSize(_)
                | Error::Config(_)
        )
    }
}
