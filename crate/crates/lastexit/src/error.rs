use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature failed on [{lo}, {hi}]: estimate {estimate:e}, error bound {error:e}")]
    QuadratureFailure {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
    },

    /// An argument was outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The truncated boundary integrals neither converged nor clearly
    /// diverged; both partial values are reported.
    #[error(
        "boundary classification indeterminate: exit integral partial {exit_partial:e}, \
         entrance integral partial {entrance_partial:e}"
    )]
    IndeterminateClassification {
        exit_partial: f64,
        entrance_partial: f64,
    },

    /// Re-anchoring the scale function at the lower endpoint failed.
    #[error("scale normalization failed: {0}")]
    Normalization(String),

    /// Reconstructing h from its representing measure missed the supplied h.
    #[error("representing measure inconsistent with h: deviation {deviation:e} at x = {at}")]
    InconsistentRepresentation { deviation: f64, at: f64 },

    /// `r_0(a,a) - r_lambda(a,a)` was not strictly positive.
    #[error("degenerate denominator r0(a,a) - r_lambda(a,a) = {0:e}")]
    DegenerateDenominator(f64),

    /// Probability mass escaping the truncation window exceeded its bound.
    #[error("truncation leak {leak:e} exceeds bound {bound:e}")]
    LeakExceeded { leak: f64, bound: f64 },

    /// A rejection sampler used up its proposal budget.
    #[error("rejection budget of {budget} proposals exhausted")]
    RejectionBudgetExhausted { budget: u64 },

    /// A path simulation hit the time horizon before terminating.
    #[error("horizon {0} reached before termination")]
    HorizonReached(f64),

    /// A simulated step left the open state interval.
    #[error("state {0} escaped the open state interval")]
    StateEscaped(f64),

    /// The finite-difference grid was malformed.
    #[error("grid error: {0}")]
    Grid(String),

    /// The tridiagonal solve encountered a zero pivot.
    #[error("singular tridiagonal system at row {0}")]
    SingularSystem(usize),

    /// The experiment configuration failed validation.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
