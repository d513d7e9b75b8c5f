use thiserror::Error;

/// Errors raised anywhere in the crate.
///
/// Variants split into two families: input validation (bad shapes, signs,
/// reducible networks) and numerical failure (budgets exhausted, singular
/// systems). [`Error::is_validation`] tells them apart for callers that map
/// errors onto exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative off-diagonal entry L[{row}][{col}] = {value}")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },

    #[error("negative entry M[{row}][{col}] = {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("connectivity matrix is not irreducible: patch {unreachable} cannot be reached from patch {from}")]
    NotIrreducible { from: usize, unreachable: usize },

    #[error("parameter `{name}` must be positive and finite, got {value}")]
    NonPositiveParameter { name: String, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("no convergence in {routine} after {iterations} iterations")]
    NoConvergence { routine: &'static str, iterations: usize },

    #[error("singular matrix V = diag(gamma) - dI*L")]
    SingularV,

    #[error("singular linear system in {0}")]
    SingularSystem(&'static str),

    #[error("no positive solution of the family equation at l = {l} (l * R0 = {l_r0})")]
    NoPositiveSolution { l: f64, l_r0: f64 },

    #[error("l = {l} is not a root of the balance equation (|F - N| = {defect})")]
    NotARoot { l: f64, defect: f64 },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("r is proportional to alpha; the highest-risk set is the whole network")]
    DegenerateOmegaStar,

    #[error("normalization target {target} not bracketed on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64, target: f64 },

    #[error("no interior root: {0}")]
    NoInteriorRoot(String),
}

impl Error {
    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::NegativeOffDiagonal { .. }
                | Error::NegativeEntry { .. }
                | Error::NotIrreducible { .. }
                | Error::NonPositiveParameter { .. }
                | Error::InvalidArgument(_)
                | Error::InvalidInitialData(_)
                | Error::DegenerateOmegaStar
                | Error::NoInteriorRoot(_)
        )
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NegativeOffDiagonal { .. } => "NegativeOffDiagonal",
            Error::NegativeEntry { .. } => "NegativeEntry",
            Error::NotIrreducible { .. } => "NotIrreducible",
            Error::NonPositiveParameter { .. } => "NonPositiveParameter",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::InvalidInitialData(_) => "InvalidInitialData",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::SingularV => "SingularV",
            Error::SingularSystem(_) => "SingularSystem",
            Error::NoPositiveSolution { .. } => "NoPositiveSolution",
            Error::NotARoot { .. } => "NotARoot",
            Error::StepUnderflow { .. } => "StepUnderflow",
            Error::DegenerateOmegaStar => "DegenerateOmegaStar",
            Error::NoBracket { .. } => "NoBracket",
            Error::NoInteriorRoot(_) => "NoInteriorRoot",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
