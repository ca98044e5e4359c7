use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("division by the zero rational function")]
    DivisionByZero,

    #[error("rational function is improper (numerator degree {num} > denominator degree {den})")]
    Improper { num: usize, den: usize },

    #[error("matrix is singular as a rational matrix")]
    Singular,

    #[error("intermediate polynomial degree {degree} exceeds cap {cap}")]
    DegreeOverflow { degree: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("rank sampling failed: every sampled point hit a pole")]
    PoleBudgetExhausted,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model validation failed: {0}")]
    Validation(String),

    #[error("theta assignment: {0}")]
    Theta(String),

    #[error("LDL decomposition breakdown at pivot {pivot}: residual {residual:e}")]
    LdlBreakdown { pivot: usize, residual: f64 },

    #[error("noise structure: {0}")]
    NoiseStructure(String),

    #[error("simulation diverged at sample {sample} (node {node})")]
    Diverged { sample: usize, node: usize },
}
