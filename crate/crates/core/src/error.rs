use thiserror::Error;

/// Failure modes of the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("exponent overflow evaluating the weight at {precision} bits")]
    PrecisionOverflow { precision: u32 },

    #[error("quadrature did not converge after {doublings} grid doublings")]
    NonConverged { doublings: u32 },

    #[error("evaluation point {z} is within {tol:e} of an edge singularity")]
    EdgeSingularity { z: f64, tol: f64 },

    #[error("no single-arc solution: {0}")]
    NoArcSolution(String),

    #[error("equilibrium density is negative ({min:e}) at lambda = {at}")]
    NegativeDensity { min: f64, at: f64 },

    #[error("alpha^2 + rho^2 = 1 residual still {residual:e} at the {max_precision}-bit cap")]
    PrecisionExhausted { residual: f64, max_precision: u32 },

    #[error("moment table covers frequencies up to {available}, {requested} needed")]
    MomentDeficit { requested: usize, available: usize },

    #[error("requested size {requested} exceeds the {available} available coefficients")]
    IndexDeficit { requested: usize, available: usize },

    #[error("window half-width {window} too small: doubling moved the result by {change:e}")]
    WindowTooSmall { window: usize, change: f64 },

    #[error("Fourier tail not resolved: |v_{index}| = {magnitude:e}")]
    TailUnresolved { index: usize, magnitude: f64 },

    #[error("Toeplitz symbol is not positive (min {min:e} at phi = {at})")]
    SymbolNonpositive { min: f64, at: f64 },

    #[error("offset {m} exceeds the asymptotic window {limit} for n = {n}")]
    WindowExceeded { n: usize, m: i64, limit: f64 },

    #[error("sign vote not unanimous: {agree} of {total} offsets agree")]
    SignInconsistent { agree: usize, total: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
