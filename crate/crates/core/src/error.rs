use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spin: two_s = {0}")]
    InvalidSpin(i64),

    #[error("m = {m} is not a valid magnetic number for S = {s}")]
    InvalidM { s: f64, m: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("label continuation ambiguous at lambda = {lambda}: overlaps {first} and {second} too close, reduce grid_step")]
    AmbiguousLabel { lambda: f64, first: f64, second: f64 },

    #[error("Jacobi eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("no sign change of the target function in [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },

    #[error("|eta| = {0} must be below 1")]
    EtaOutOfRange(f64),

    #[error("near-degenerate levels: gap {gap:e} between m = {m} and m = {n}")]
    NearDegeneracy { m: f64, n: f64, gap: f64 },

    #[error("schedule violates boundary condition: {0}")]
    Boundary(String),

    #[error("schedule: {0}")]
    Schedule(String),

    #[error("Hamiltonian is not Hermitian at t = {t} (residual {residual:e})")]
    NonHermitian { t: f64, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
