use thiserror::Error;

/// Errors raised by mesh construction, coefficient evaluation and the solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("relative error undefined: x and y are equal")]
    EqualOperands,

    #[error("Taylor truncation number {needed} exceeds cap {cap} (ratio {ratio})")]
    TruncationCap { needed: usize, cap: usize, ratio: f64 },

    #[error("quadrature did not converge: estimated error {err_est:e} after {subdivisions} subdivisions")]
    QuadratureBudget {
        value: f64,
        err_est: f64,
        subdivisions: usize,
    },

    #[error("SOE approximation failed to reach tolerance {tol:e}: achieved {achieved:e}")]
    SoeTolerance { tol: f64, achieved: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("history state out of sync: expected step {expected}, got {got}")]
    OutOfOrder { expected: usize, got: usize },

    #[error("length mismatch: {0}")]
    Length(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerics (quadrature budget, SOE construction,
    /// factorization) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureBudget { .. }
                | Error::SoeTolerance { .. }
                | Error::Singular(_)
                | Error::TruncationCap { .. }
        )
    }
}
