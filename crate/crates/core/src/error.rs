use thiserror::Error;

/// Error type shared by every operation in the crate.
///
/// The variants separate caller mistakes (`Parameter`), geometric
/// preconditions that a specific input fails to meet (`Domain`, `Pole`,
/// `Infeasible`), and numerical trouble discovered while computing
/// (`Numeric`, `Convergence`, `Stencil`).
#[derive(Debug, Error)]
pub enum CalcError {
    /// An argument is structurally invalid: wrong dimension, a weight that
    /// is not positive, an empty sample list, and so on.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The point lies outside the domain of the field being evaluated.
    #[error("point outside domain: {0}")]
    Domain(String),

    /// The field takes the value -inf here (a logarithmic pole). Callers
    /// that can absorb a pole (e.g. a regularized max whose other branch is
    /// finite) catch this variant and continue.
    #[error("logarithmic pole: {0}")]
    Pole(String),

    /// A finite-difference stencil stepped outside the field's domain, so
    /// the requested derivative cannot be formed at this point.
    #[error("stencil left the domain near {point:?}: {reason}")]
    Stencil { point: Vec<f64>, reason: String },

    /// Evaluation produced a NaN or infinity.
    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    /// An iterative solve (root finding, eigenvalue sweep) failed to reach
    /// its tolerance within the iteration budget.
    #[error("iteration failed to converge: {0}")]
    Convergence(String),

    /// The requested geometric construction cannot be carried out with the
    /// supplied constants (e.g. a gluing whose exactness tube would be
    /// thinner than the finite-difference stencil).
    #[error("construction infeasible: {0}")]
    Infeasible(String),
}

pub type CalcResult<T> = Result<T, CalcError>;

impl CalcError {
    pub fn parameter(msg: impl Into<String>) -> Self {
        CalcError::Parameter(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        CalcError::Domain(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        CalcError::Numeric(msg.into())
    }
}
