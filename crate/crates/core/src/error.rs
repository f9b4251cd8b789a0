use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is not unitary: max |U†U - 1| = {defect:e}")]
    NotUnitary { defect: f64 },

    #[error("photon-number cutoff {cutoff} too small: truncated tail mass {tail:e} exceeds 1e-10")]
    Truncation { cutoff: usize, tail: f64 },

    #[error("invalid statistics: {0}")]
    InvalidStatistics(String),

    #[error("eta is undefined for the vacuum (mean photon number is zero)")]
    UndefinedEta,

    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("need at least 2 active detectors, found {active}")]
    DegenerateSetup { active: usize },

    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("oracle photon budget exceeded: {photons} photons > limit {limit}")]
    OracleLimit { photons: usize, limit: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
