//! Error type shared by every module of the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the numerical layer.
///
/// `Invalid*` variants are rejected inputs; the remaining variants are runtime
/// failures of a well-posed computation (budget, convergence, consistency).
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Vector/matrix dimensions do not match the ambient dimension.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The root data violates a structural requirement (normalization,
    /// reduced-ness, invariance, multiplicity positivity, ...).
    #[error("invalid root system: {0}")]
    InvalidRootSystem(String),

    /// Invalid scalar argument (non-positive time, negative radius, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Group closure exceeded the element cap.
    #[error("reflection group exceeds cap of {cap} elements")]
    GroupTooLarge { cap: usize },

    /// An enumeration was requested whose size exceeds the hard budget.
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    /// A series or iterative procedure failed to converge.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Floating-point overflow or an otherwise unrepresentable value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The requested grid cannot represent the computation; `suggested_radius`
    /// is a radius that would bring truncation within tolerance.
    #[error("domain too small: {detail} (suggested radius {suggested_radius})")]
    DomainTooSmall { detail: String, suggested_radius: f64 },

    /// Two redundant internal computations disagreed beyond tolerance.
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    /// The requested quantity is mathematically divergent for these inputs.
    #[error("divergent quantity: {0}")]
    Divergent(String),
}
