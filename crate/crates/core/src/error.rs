use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid coupling table: {0}")]
    InvalidCoupling(String),

    #[error("non-positive mode mass: 1/m_{k} = {inverse_mass}")]
    NonPositiveMass { k: usize, inverse_mass: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver did not converge after {iterations} iterations (estimate {estimate}, residual {residual:e})")]
    NotConverged {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },

    #[error("system too large for the dense path: L = {l} (limit {limit})")]
    TooLarge { l: usize, limit: usize },

    #[error("grid too coarse: error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    GridTooCoarse { estimate: f64, tolerance: f64 },

    #[error("closed-form factor out of range at k = {k}: {value}")]
    FactorOutOfRange { k: usize, value: f64 },

    #[error("root not bracketed for k = {k}, n = {n}: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    RootNotBracketed {
        k: usize,
        n: usize,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("no positive root found: {0}")]
    RootNotFound(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}
