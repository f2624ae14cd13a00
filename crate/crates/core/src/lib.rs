//! Numerical toolkit for product measures with radial log-concave blocks.
//!
//! The library samples measures of the form `⊗_k exp(-U_k(||x_k||_{p_k}^{p_k})) dx_k`,
//! evaluates exact and surrogate moments of the linear process `X_t = <X, t>`,
//! runs empirical minoration experiments on cube-like point sets, and computes
//! chaining functionals from surrogate distance families.

pub mod acceptance;
pub mod alloc;
pub mod chaining;
pub mod estimate;
pub mod families;
pub mod measure;
pub mod minoration;
pub mod moments;
pub mod report;
pub mod rng;
pub mod sampling;
pub mod special;

pub use estimate::Estimate;
pub use measure::{BlockSpec, Potential, ProductMeasure};
pub use rng::RngStream;

/// Library-wide error type. The CLI maps variants onto exit codes:
/// configuration/domain errors -> 2, invariant violations -> 3,
/// capacity errors -> 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("block exponent p={p} violates the cutoff p >= 1 + {eps}")]
    Cutoff { p: f64, eps: f64 },
    #[error("conjugate exponent is infinite at p = 1")]
    InfiniteConjugate,
    #[error(
        "support budget infeasible: active supports total {support} but the moment order is p={p}; \
         the allocation formula requires p >= sum of active support sizes"
    )]
    SupportBudget { support: usize, p: f64 },
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("numeric range: {0}")]
    Numeric(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Cutoff { .. }
            | Error::InfiniteConjugate
            | Error::SupportBudget { .. }
            | Error::Numeric(_)
            | Error::Io(_) => 2,
            Error::Invariant(_) => 3,
            Error::Capacity(_) => 4,
        }
    }
}
