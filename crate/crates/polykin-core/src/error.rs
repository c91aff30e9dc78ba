//! Error type shared by all modules.

use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum KineticError {
    /// Grid specification violates an invariant (counts, extents, delta).
    InvalidGrid(&'static str),
    /// Relaxation parameters outside the admissible range, or a derived
    /// quantity (collision-frequency denominator, temperature) degenerated.
    InvalidParams(&'static str),
    /// Value array length does not match the grid it is paired with.
    ShapeMismatch { expected: usize, got: usize },
    /// Mass below the vacuum threshold; temperatures are not extractable.
    VacuumState { rho: f64 },
    /// NaN or infinity encountered where finite data is required.
    NonFinite(&'static str),
    /// Distribution values must be nonnegative.
    NegativeValue { index: usize, value: f64 },
    /// Corrected temperature tensor has an eigenvalue at or below tolerance
    /// (possible only outside the theorem regime, nu < 0).
    NotPositiveDefinite { min_eigenvalue: f64 },
    /// Explicit scheme stability bound dt * A <= 1 violated.
    StabilityViolation { dt_a: f64 },
    /// Transport CFL bound max|v1| dt / dx <= 1 violated.
    CflViolation { cfl: f64 },
    /// Degenerate input outside any meaningful evaluation (e.g. A = B = 0).
    Degenerate(&'static str),
    /// Iterative kernel failed to converge.
    NoConvergence(&'static str),
}

impl fmt::Display for KineticError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidGrid(msg) => write!(f, "invalid grid spec: {msg}"),
            Self::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            Self::ShapeMismatch { expected, got } => {
                write!(f, "shape mismatch: grid has {expected} nodes, array has {got}")
            }
            Self::VacuumState { rho } => write!(f, "vacuum state: rho = {rho:e}"),
            Self::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Self::NegativeValue { index, value } => {
                write!(f, "negative distribution value {value:e} at node {index}")
            }
            Self::NotPositiveDefinite { min_eigenvalue } => {
                write!(f, "tensor not positive definite: min eigenvalue {min_eigenvalue:e}")
            }
            Self::StabilityViolation { dt_a } => {
                write!(f, "stability violation: dt * A = {dt_a} > 1")
            }
            Self::CflViolation { cfl } => write!(f, "CFL violation: max|v1| dt/dx = {cfl} > 1"),
            Self::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Self::NoConvergence(what) => write!(f, "no convergence in {what}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for KineticError {}

pub type Result<T> = core::result::Result<T, KineticError>;
