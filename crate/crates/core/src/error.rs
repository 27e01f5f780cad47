use thiserror::Error;

/// Errors raised by chain, kernel, sampler, renewal and statistics operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid probability: {0}")]
    InvalidProbability(String),

    #[error("transition graph has a cycle: {}", render_path(.cycle))]
    CycleDetected { cycle: Vec<String> },

    #[error("duplicate transition {from} -> {to}")]
    DuplicateTransition { from: String, to: String },

    #[error("duplicate state label {0}")]
    DuplicateState(String),

    #[error("unknown state {0}")]
    UnknownState(String),

    #[error("linear system is numerically singular")]
    SingularSystem,

    #[error("window is re-entered after exit: {}", render_path(.path))]
    ReturnToWindow { path: Vec<String> },

    #[error("gap probability {det:e} is numerically zero, L-ensemble undefined")]
    SingularGap { det: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("conjugation weight {value} at position {index} is not positive")]
    NonpositiveWeight { index: usize, value: f64 },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("sample batch is empty")]
    EmptyBatch,

    #[error("chain has {count} distinct trajectories, limit is {limit}")]
    TooManyPaths { count: f64, limit: usize },

    #[error("window of {size} states exceeds limit {limit}")]
    WindowTooLarge { size: usize, limit: usize },

    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("increment distribution is periodic with period {period}")]
    PeriodicInput { period: u64 },

    #[error("rate fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error("ratio {0} is not in (0, 1)")]
    InvalidRatio(f64),

    #[error("count distribution has negative mass {value:e} at n = {count}")]
    NegativeMass { count: usize, value: f64 },

    #[error("alpha {alpha} is not below the fitted decay rate {decay_rate}")]
    AlphaTooLarge { alpha: f64, decay_rate: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The input itself is malformed (bad numbers, unknown labels, bad shapes).
    Malformed,
    /// Well-formed input that violates an operation's precondition.
    Precondition,
    /// Numerical failure that valid input should never trigger.
    Internal,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidProbability(_)
            | DuplicateTransition { .. }
            | DuplicateState(_)
            | UnknownState(_)
            | DimensionMismatch { .. }
            | NonpositiveWeight { .. }
            | LengthMismatch(_)
            | InvalidPmf(_)
            | InvalidSpec(_)
            | InvalidRatio(_)
            | InvalidKernel(_) => ErrorClass::Malformed,
            CycleDetected { .. }
            | ReturnToWindow { .. }
            | SingularGap { .. }
            | EmptyBatch
            | TooManyPaths { .. }
            | WindowTooLarge { .. }
            | PeriodicInput { .. }
            | DegenerateFit(_)
            | AlphaTooLarge { .. } => ErrorClass::Precondition,
            SingularSystem | NegativeMass { .. } => ErrorClass::Internal,
        }
    }
}

fn render_path(path: &[String]) -> String {
    path.join("→")
}

pub type Result<T> = std::result::Result<T, Error>;
