//! Error types shared across the crate.

use std::fmt;
use std::path::PathBuf;

/// Errors produced by model evaluation, fitting, and file handling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the physical domain of an operation
    /// (non-positive diffusivity, out-of-bounds parameters, mismatched
    /// vector lengths, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A composite input failed structural validation (empty stack, bad
    /// bounds ordering, inconsistent batch, ...).
    #[error("invalid input: {0}")]
    Validation(String),

    /// The surface-response denominator underflowed. Cannot occur for
    /// physical reflection coefficients but is guarded anyway.
    #[error("singular surface-response denominator (magnitude {magnitude:e})")]
    SingularDenominator { magnitude: f64 },

    /// A wave-train series has per-round-trip ratio of magnitude >= 1 and
    /// cannot be summed.
    #[error("divergent wave-train series (ratio magnitude {ratio})")]
    DivergentSeries { ratio: f64 },

    /// A structured text file failed to parse or validate.
    #[error(transparent)]
    Parse(#[from] ParseError),

    /// Underlying file-system failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Parse or validation failure in a config, manifest, or CSV file.
///
/// Carries the file path and, when known, the 1-based line and column so the
/// CLI can print `file:line:col: message` diagnostics.
#[derive(Debug)]
pub struct ParseError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ParseError {
    pub fn new(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            line: None,
            column: None,
            message: message.into(),
        }
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }

    pub fn at(mut self, line: usize, column: usize) -> Self {
        self.line = Some(line);
        self.column = Some(column);
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
            if let Some(col) = self.column {
                write!(f, ":{col}")?;
            }
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ParseError {}

/// Validation predicates used across the crate; NaN fails all of them.
pub(crate) fn positive_finite(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

pub(crate) fn non_negative_finite(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

pub(crate) fn within(x: f64, lower: f64, upper: f64) -> bool {
    x >= lower && x <= upper
}
