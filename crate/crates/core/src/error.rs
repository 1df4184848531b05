use thiserror::Error;

/// Errors produced by model validation, analysis and the solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix {matrix}: expected shape {expected_rows}x{expected_cols}, found {found_rows}x{found_cols}")]
    DimensionMismatch {
        matrix: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        found_rows: usize,
        found_cols: usize,
    },

    #[error("matrix {matrix}: non-finite entry at ({row}, {col})")]
    NonFinite {
        matrix: &'static str,
        row: usize,
        col: usize,
    },

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("eigenvalue computation did not converge ({0}x{0} matrix)")]
    EigenFailure(usize),

    #[error("resolvent (jwI - A) is singular at w = {omega}")]
    SingularResolvent { omega: f64 },

    #[error("closed loop is not Hurwitz (spectral abscissa {abscissa:e})")]
    Unstable { abscissa: f64 },

    #[error("H-infinity bisection could not bracket the norm (last upper candidate {upper:e})")]
    BracketFailure { upper: f64 },

    #[error("decision vector has length {found}, expected {expected}")]
    DecisionLength { expected: usize, found: usize },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
