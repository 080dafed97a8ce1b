use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("ions {i} and {j} coincide; the Coulomb term is singular")]
    Singular { i: usize, j: usize },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("chain is not confined: hessian has non-positive eigenvalue {eigenvalue:e}")]
    Unstable { eigenvalue: f64 },

    #[error("mode {mode} is not a centre-of-mass mode: participation factors change sign")]
    DegenerateMode { mode: usize },

    #[error("mode {mode} is (near) degenerate: frequency gap {gap:e} below tolerance")]
    Degeneracy { mode: usize, gap: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("cooling rate is zero; no finite cooling limit")]
    NoCooling,

    #[error("{count} configurations exceed the enumeration guard of {limit}")]
    GuardExceeded { count: u128, limit: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
