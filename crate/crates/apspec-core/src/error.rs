use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input text could not be parsed. Positions are 1-based.
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    /// The substitution is not primitive, so the subshift machinery does not apply.
    #[error("substitution is not primitive: {detail}")]
    NotPrimitive { detail: String },

    /// A computation needs more depth (or a larger bound) than was provided.
    #[error("insufficient depth for {what}: need at least {need}, got {got}")]
    InsufficientDepth { what: String, need: usize, got: usize },

    /// An operation received structurally invalid data.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The substitution graph has no one-edge loop, so no self-similar
    /// choice function exists on its path space.
    #[error(
        "no one-edge loop in the substitution graph; pass to a power of the \
         substitution, whose graph always acquires one"
    )]
    NoOneEdgeLoop,

    /// Embedded paths failed to merge within the truncation depth.
    #[error("paths did not merge within depth {depth}")]
    NonMerging { depth: usize },

    /// Eigenvalue counting refused: too small a sample to fit an exponent.
    #[error("too few eigenvalues for a Weyl fit: got {got}, need at least {need}")]
    TooFewEigenvalues { got: usize, need: usize },

    /// Closed forms require a diagonalizable edge-count matrix.
    #[error("matrix is not diagonalizable over distinct eigenvalues; exact counts remain available but the closed form is refused")]
    NotDiagonalizable,

    /// A homomorphism violates the sheaf condition at the named vertex.
    #[error("sheaf condition violated at vertex '{word}': value {value} != children sum {children_sum}")]
    SheafViolation { word: String, value: i64, children_sum: i64 },

    /// A homomorphism with nonzero total mass cannot be realized.
    #[error("obstruction: phi(1) = {value} != 0, no edge set realizes this target")]
    RootObstruction { value: i64 },

    /// Star maps (and hence eigenvalue formulas) are implemented for degree <= 3.
    #[error("algebraic degree {degree} is not supported here (degree <= 3 only)")]
    UnsupportedDegree { degree: usize },

    /// Numeric routine failed to converge or produced an invalid value.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
