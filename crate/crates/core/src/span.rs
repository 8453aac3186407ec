//! Source positions for diagnostics.

use serde::{Deserialize, Serialize};

/// A position in the source text, 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }

    /// Placeholder span for synthesised nodes (desugaring, IR conversion).
    pub fn synthetic() -> Self {
        Span { line: 0, col: 0 }
    }

    pub fn is_synthetic(&self) -> bool {
        self.line == 0
    }
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}
