use std::fmt;

use thiserror::Error;

/// Failures of the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("integrand is not finite near x = {at}")]
    NonFinite { at: f64 },
    #[error("quadrature did not converge: error estimate {achieved:e} above target {requested:e} (value {value:e})")]
    NoConvergence {
        achieved: f64,
        requested: f64,
        value: f64,
    },
}

/// A single rejected scenario field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
    /// 1-based source line, when the scenario came from a file.
    pub line: Option<usize>,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
            line: None,
        }
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: `{}`: {}", self.field, self.message),
            None => write!(f, "`{}`: {}", self.field, self.message),
        }
    }
}

/// Every violation found while validating a scenario or experiment.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{} invalid field(s): {}", .0.len(), join(.0))]
pub struct ValidationError(pub Vec<Violation>);

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Errors of the root-finding layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("objective is not monotone over [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    NotMonotone { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("could not bracket a solution within [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },
    #[error("bisection exceeded {0} iterations")]
    Iterations(usize),
}

/// Top-level error type of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
