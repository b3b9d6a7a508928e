use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("basis size error: {sites} sites exceeds the enumeration cap of {cap}")]
    BasisTooLarge { sites: usize, cap: usize },

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("invalid state string '{0}': expected only 'g' and 'r'")]
    ParseState(String),

    #[error("length mismatch: {left} vs {right} sites")]
    LengthMismatch { left: usize, right: usize },

    #[error("interaction order {order} out of range 1..={kmax}")]
    OrderOutOfRange { order: usize, kmax: usize },

    #[error("state {0} has adjacent excitations (outside the primary V0 block)")]
    OutsidePrimaryBlock(String),

    #[error("basis is not closed: {from} couples to {to}, which is missing from the basis")]
    BasisNotClosed { from: String, to: String },

    #[error("basis mismatch between operator and state")]
    BasisMismatch,

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid drive: {0}")]
    InvalidDrive(String),

    #[error("subarray error: {0}")]
    Subarray(String),

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("empty window: {0}")]
    EmptyWindow(String),

    #[error("empty ensemble: no eigenstates within [{lo}, {hi}]")]
    EmptyEnsemble { lo: f64, hi: f64 },

    #[error("dimension {dim} exceeds the dense diagonalization cap {cap}")]
    DimensionOverCap { dim: usize, cap: usize },

    #[error("too few samples: {got} (need at least {need})")]
    TooFewSamples { got: usize, need: usize },

    #[error("non-uniform sampling in trace")]
    NonUniformSampling,

    #[error("invalid evolution plan: {0}")]
    InvalidPlan(String),

    #[error("tolerance contract unachievable: {0}")]
    ToleranceUnachievable(String),

    #[error("Krylov propagation failed to converge: {0}")]
    Convergence(String),

    #[error("invalid noise parameters: {0}")]
    InvalidNoise(String),
}

pub type Result<T> = std::result::Result<T, Error>;
