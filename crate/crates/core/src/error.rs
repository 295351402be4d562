use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A marginal p_s or p_x is zero; empty categories must be merged or dropped upstream.
    #[error("zero marginal probability for {axis} index {index}")]
    ZeroMarginal { axis: &'static str, index: usize },

    #[error("conditioning event has zero probability: {0}")]
    ZeroProbabilityEvent(String),

    #[error("polytope is empty")]
    EmptyPolytope,

    #[error("polytope is unbounded")]
    UnboundedPolytope,

    #[error("vertex enumeration exceeded the budget of {limit} rays")]
    BudgetExceeded { limit: usize },

    #[error("output alphabet too large: a = {a} exceeds the cap of {max}")]
    AlphabetTooLarge { a: usize, max: usize },

    #[error("too many attributes: m = {m} exceeds the cap of {max}")]
    AttributeBudgetExceeded { m: usize, max: usize },

    #[error("linear program is infeasible")]
    LpInfeasible,

    #[error("linear program is unbounded")]
    LpUnbounded,

    #[error("simplex iteration limit reached")]
    LpIterationLimit,

    #[error("leakage decreased from {before} to {after} between alpha = {alpha_lo} and {alpha_hi}")]
    NonMonotoneDetected {
        alpha_lo: f64,
        alpha_hi: f64,
        before: f64,
        after: f64,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("no usable rows left after filtering")]
    EmptyAfterFiltering,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable short name used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ZeroMarginal { .. } => "zero_marginal",
            Error::ZeroProbabilityEvent(_) => "zero_probability_event",
            Error::EmptyPolytope => "empty_polytope",
            Error::UnboundedPolytope => "unbounded_polytope",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::AlphabetTooLarge { .. } => "alphabet_too_large",
            Error::AttributeBudgetExceeded { .. } => "attribute_budget_exceeded",
            Error::LpInfeasible => "lp_infeasible",
            Error::LpUnbounded => "lp_unbounded",
            Error::LpIterationLimit => "lp_iteration_limit",
            Error::NonMonotoneDetected { .. } => "non_monotone",
            Error::SchemaMismatch(_) => "schema_mismatch",
            Error::EmptyAfterFiltering => "empty_after_filtering",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    /// True for errors caused by the computation rather than by malformed input.
    pub fn is_computational(&self) -> bool {
        matches!(
            self,
            Error::EmptyPolytope
                | Error::UnboundedPolytope
                | Error::BudgetExceeded { .. }
                | Error::AlphabetTooLarge { .. }
                | Error::AttributeBudgetExceeded { .. }
                | Error::LpInfeasible
                | Error::LpUnbounded
                | Error::LpIterationLimit
                | Error::NonMonotoneDetected { .. }
        )
    }
}
