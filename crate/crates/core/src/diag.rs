//! Unified diagnostics for every pipeline stage.
//!
//! A `Diagnostic` carries the stage that produced it, a position, the rule
//! that failed (when the failure comes from a typing rule or a constraint),
//! and an optional rendering of the offending constraint. The JSON form is
//! loss-free with respect to the human-readable rendering.

use serde::{Deserialize, Serialize};

use crate::span::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Parse,
    Pretype,
    Constraints,
    Solve,
    Runtime,
    Io,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Phase::Parse => "parse",
            Phase::Pretype => "pretype",
            Phase::Constraints => "constraints",
            Phase::Solve => "solve",
            Phase::Runtime => "runtime",
            Phase::Io => "io",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub phase: Phase,
    pub span: Option<Span>,
    pub message: String,
    /// Name of the typing rule or operation that produced the error.
    pub rule: Option<String>,
    /// Rendering of the offending constraint, in concrete pattern syntax.
    pub constraint: Option<String>,
}

impl Diagnostic {
    pub fn error(phase: Phase, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            phase,
            span: None,
            message: message.into(),
            rule: None,
            constraint: None,
        }
    }

    pub fn at(mut self, span: Span) -> Self {
        if !span.is_synthetic() {
            self.span = Some(span);
        }
        self
    }

    pub fn with_rule(mut self, rule: impl Into<String>) -> Self {
        self.rule = Some(rule.into());
        self
    }

    pub fn with_constraint(mut self, constraint: impl Into<String>) -> Self {
        self.constraint = Some(constraint.into());
        self
    }

    /// Human-readable one-line rendering: `phase error at line:col: message [rule] {constraint}`.
    pub fn render(&self, file: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("{} error", self.phase));
        if let Some(span) = self.span {
            out.push_str(&format!(" at {file}:{span}"));
        }
        out.push_str(&format!(": {}", self.message));
        if let Some(rule) = &self.rule {
            out.push_str(&format!(" [{rule}]"));
        }
        if let Some(c) = &self.constraint {
            out.push_str(&format!(" {{{c}}}"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_includes_rule_and_constraint() {
        let d = Diagnostic::error(Phase::Solve, "unsatisfiable constraint")
            .at(Span::new(3, 7))
            .with_rule("guard")
            .with_constraint("Put . Put <= Put . *Get");
        let r = d.render("future.pat");
        assert!(r.contains("future.pat:3:7"));
        assert!(r.contains("[guard]"));
        assert!(r.contains("Put . Put <= Put . *Get"));
    }
}
