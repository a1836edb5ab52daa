//! Error type shared by every module in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural defect in a transition matrix or word table.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The transition matrix is not irreducible (some state unreachable).
    #[error("model is not irreducible: {0}")]
    NotIrreducible(String),

    /// The transition matrix is irreducible but has period > 1.
    #[error("model is not primitive: period {period}")]
    NotPrimitive { period: usize },

    /// Exact integer arithmetic left the representable range.
    #[error("integer overflow in {context}")]
    Overflow { context: String },

    /// A potential table is missing a value or carries an inadmissible word.
    #[error("potential table error: {0}")]
    BadPotential(String),

    /// Domain violation (p outside the admissible mean interval, roof not
    /// positive, negative window half-width, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// An iteration failed to reach its convergence target.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// The requested computation exceeds a configured budget.
    /// `suggestion` tells the caller which knob to turn.
    #[error("resource limit: {what} needs {needed} but budget is {budget}; {suggestion}")]
    Resource {
        what: String,
        needed: u64,
        budget: u64,
        suggestion: String,
    },

    /// Operation requires a non-lattice observable but the lattice test
    /// produced a lattice verdict (or vice versa).
    #[error("lattice obstruction: {0}")]
    Lattice(String),

    /// Degenerate input that makes the requested quantity meaningless
    /// (e.g. asymptotic variance is zero, so no tilt exists).
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub fn resource(what: &str, needed: u64, budget: u64, suggestion: &str) -> Self {
        Error::Resource {
            what: what.to_string(),
            needed,
            budget,
            suggestion: suggestion.to_string(),
        }
    }
}
