use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The implicit map equation could not be bracketed; the generating
    /// function violates its twist bound.
    #[error("root not bracketed solving the implicit map at x={x}, r={r}")]
    RootNotBracketed { x: f64, r: f64 },

    #[error("no restart converged for p/q = {p}/{q}")]
    NoConvergence { p: i64, q: usize },

    #[error("configuration is not critical (gradient sup-norm {gradient_inf_norm:e})")]
    NotCritical { gradient_inf_norm: f64 },

    #[error("rotation target is rational: expansion ends after {available} of {requested} terms")]
    RationalTarget { requested: usize, available: usize },

    #[error("point cloud is not a graph: two points at theta={theta} with r={r1} and r={r2}")]
    GraphViolation { theta: f64, r1: f64, r2: f64 },

    #[error("distance series is degenerate: {zeros} consecutive zeros out of {len}")]
    DegenerateSeries { zeros: usize, len: usize },

    #[error("point cloud provenance {0} does not lie on minimizing orbits")]
    ProvenanceMismatch(&'static str),

    #[error("invalid generating function: {0}")]
    InvalidGenerating(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
