use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("undeclared identifier `{name}` at {line}:{column}")]
    UndeclaredIdentifier { name: String, line: usize, column: usize },

    #[error("division by non-constant expression `{expr}` at {line}:{column}")]
    NonConstantDivision { expr: String, line: usize, column: usize },

    #[error("unsupported term `{term}`: {reason}")]
    UnsupportedTerm { term: String, reason: String },

    #[error("non-rational structural coefficient in `{term}`")]
    NonRationalStructuralCoefficient { term: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("substitution is not in solved form: `{0}` appears in an image")]
    NotSolvedForm(String),

    #[error("inconsistent Lagrangian: persistence of {constraint} requires {residual} = 0")]
    Inconsistent { constraint: String, residual: String },

    #[error("non-affine secondary constraint from persistence of {constraint}: {residual} ≈ 0")]
    UnsupportedNonAffineConstraint { constraint: String, residual: String },

    #[error("odd number ({0}) of second-class constraints")]
    OddSecondClassCount(usize),

    #[error("expected {expected} gauge condition(s), one per first-class constraint, got {got}")]
    WrongGaugeCount { expected: usize, got: usize },

    #[error("degenerate gauge: {0}")]
    DegenerateGauge(String),

    #[error("selected constraints [{0}] have a singular bracket matrix")]
    SingularSelection(String),

    #[error("constraints are rank deficient: {0}")]
    RankDeficient(String),

    #[error("first-class constraints remain unfixed: {0}")]
    FirstClassRemaining(String),

    #[error("bracket structure has odd dimension {0}")]
    OddDimension(usize),

    #[error("bracket structure is singular")]
    SingularStructure,

    #[error("non-finite state at step {step} (t = {time}); last valid state {last_valid:?}")]
    NonFiniteState { step: usize, time: f64, last_valid: Vec<f64> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
