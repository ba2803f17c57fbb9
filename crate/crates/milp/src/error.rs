use thiserror::Error;

/// Structural problems detected before a solve starts.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("objective has {got} coefficients, expected {expected}")]
    ObjectiveLength { expected: usize, got: usize },
    #[error("name table has {got} entries, expected {expected}")]
    NamesLength { expected: usize, got: usize },
    #[error("objective coefficient of variable {var} is not finite")]
    NonFiniteCost { var: usize },
    #[error("variable {var} has invalid bounds [{lo}, {hi}]")]
    BadBounds { var: usize, lo: f64, hi: f64 },
    #[error("row {row} has a non-finite right-hand side")]
    NonFiniteRhs { row: usize },
    #[error("row {row} references variable {var} but the problem has {n_vars} variables")]
    IndexOutOfRange { row: usize, var: usize, n_vars: usize },
    #[error("row {row} has a non-finite coefficient on variable {var}")]
    NonFiniteCoefficient { row: usize, var: usize },
    #[error("binary marker {var} is out of range ({n_vars} variables)")]
    BinaryOutOfRange { var: usize, n_vars: usize },
    #[error("time limit must be positive")]
    NonPositiveTimeLimit,
}
