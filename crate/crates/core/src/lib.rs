//! Typechecker and interpreter for Pat, a first-order actor language with
//! mailbox types.
//!
//! The pipeline: parse, desugar, IR conversion, contextual pre-typing,
//! constraint generation, constraint solving. Well-typed programs run under
//! a small-step operational semantics with a seed-controlled scheduler.

pub mod diag;
pub mod patterns;
pub mod presburger;
pub mod solver;
pub mod span;
pub mod syntax;
pub mod typecheck;
pub mod types;

pub use diag::{Diagnostic, Phase, Severity};
pub use span::Span;
