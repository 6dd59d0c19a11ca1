use thiserror::Error;

/// Errors raised by map construction, numerics and experiment runs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("point {0} lies outside [0, 1)")]
    OutOfDomain(f64),

    #[error("symbolic-exact orbits require a dyadic-exact map (full linear branches with integer slopes)")]
    NotDyadic,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("power iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("degenerate variance sigma^2 = {0:e}: the observable behaves like a coboundary and the CLT hypothesis sigma^2 != 0 fails")]
    DegenerateVariance(f64),

    #[error("correlation series truncation failed: {0}")]
    Truncation(String),

    #[error("alpha = {alpha} lies outside the range [{lo}, {hi}] of F' on the beta grid")]
    AlphaOutOfRange { alpha: f64, lo: f64, hi: f64 },

    #[error("required length {required} exceeds the budget cap {cap}")]
    BudgetExceeded { required: u128, cap: u128 },

    #[error("Monte Carlo infeasible: {0}")]
    Infeasible(String),

    #[error("orbit hit a breakpoint preimage at step {step} (x = {x})")]
    BreakpointCollision { step: usize, x: f64 },

    #[error("inadmissible cylinder word {0:?}")]
    Inadmissible(Vec<usize>),

    #[error("no recurrence within {0} symbols")]
    Censored(u64),

    #[error("quadrature tolerance {tol:e} not reached within {budget} subdivisions")]
    Quadrature { tol: f64, budget: usize },

    #[error("non-finite atom position {0}")]
    NonFinite(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
