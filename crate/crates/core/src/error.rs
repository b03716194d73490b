use thiserror::Error;

/// Errors produced by construction, validation, and solver entry points.
///
/// Library functions never panic on malformed input; every fallible path
/// reports one of these variants. Panics are reserved for broken internal
/// invariants.
#[derive(Debug, Error)]
pub enum Error {
    #[error("metric space must contain at least one point")]
    EmptySpace,

    #[error("point {index} has dimension {got}, expected {expected}")]
    PointDimension {
        index: usize,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("distance table must be square, got {rows}x{cols}")]
    NonSquareTable { rows: usize, cols: usize },

    #[error("distance table is not a metric: {0}")]
    MetricViolation(String),

    #[error("got {got} weights for {expected} support points")]
    WeightCount { expected: usize, got: usize },

    #[error("weight {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },

    #[error("weights sum to {sum}, expected 1 within 1e-12")]
    WeightSum { sum: f64 },

    #[error("measure carries no mass")]
    ZeroMass,

    #[error("cost table is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    CostShape {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },

    #[error("epsilon must be positive and finite, got {value}")]
    BadEpsilon { value: f64 },

    #[error("{context} requires supports given by coordinates, not a distance table")]
    CoordinatesRequired { context: String },

    #[error("supports live in different coordinate dimensions: {left} vs {right}")]
    CrossDimension { left: usize, right: usize },

    #[error("Lipschitz ratio undefined: every pair of support points coincides")]
    CoincidentSupport,

    #[error("function values must be strictly positive and finite")]
    NonPositiveFunction,

    #[error("length mismatch: {left} vs {right} in {context}")]
    LengthMismatch {
        left: usize,
        right: usize,
        context: String,
    },

    #[error("transport instance has {edges} edges, above the cap of {cap}")]
    InstanceTooLarge { edges: usize, cap: usize },

    #[error("no ground metric between the two supports: {0}")]
    MetricUndefined(String),

    #[error("total masses differ beyond tolerance: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("flow solver failed its optimality check: {0}")]
    SolverFailure(String),

    #[error("paired problems must share supports and cost: {0}")]
    InstanceMismatch(String),

    #[error("no convergence within {max_iters} iterations (marginal error {error:e})")]
    NonConvergence { max_iters: usize, error: f64 },

    #[error("invalid perturbation: {0}")]
    BadPerturbation(String),

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
