//! Concrete syntax, surface AST, desugaring, and the fine-grain IR.

mod desugar;
mod ir;
mod lexer;
mod parser;
mod pretty;

pub use desugar::desugar;
pub use ir::{
    check_ir_wellformed, to_ir, Callee, IrClause, IrClauseKind, IrDef, IrProgram, IrTerm,
    IrTermKind, IrValue,
};
pub use parser::parse_program;
pub use pretty::pretty_program;

use crate::patterns::Pattern;
use crate::span::Span;

/// Base types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseType {
    Unit,
    Int,
    String,
    Bool,
}

impl std::fmt::Display for BaseType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaseType::Unit => "Unit",
            BaseType::Int => "Int",
            BaseType::String => "String",
            BaseType::Bool => "Bool",
        })
    }
}

/// Surface types, straight from the grammar. Mailbox types may omit the
/// pattern; desugaring fills in a fresh pattern variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SurfaceType {
    Base(BaseType),
    /// `I!`
    MbSend {
        iface: String,
        pattern: Option<Pattern>,
    },
    /// `I?` or `I?(pattern)`
    MbRecv {
        iface: String,
        pattern: Option<Pattern>,
    },
    /// `(T, U)`
    Pair(Box<SurfaceType>, Box<SurfaceType>),
    /// `T + U`
    Sum(Box<SurfaceType>, Box<SurfaceType>),
    /// `fun(T, ...) -> U` (unrestricted) or `linfun(T, ...) -> U` (linear)
    Fun {
        linear: bool,
        params: Vec<SurfaceType>,
        ret: Box<SurfaceType>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Literal {
    Unit,
    Int(i64),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constant {
    Lit(Literal),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Var(String),
    Const(Constant),
    /// `let x = M in N`, optionally `let x: T = M in N`
    Let {
        var: String,
        ann: Option<SurfaceType>,
        subject: Box<Expr>,
        body: Box<Expr>,
    },
    /// `let (x, y) = M in N`, optionally annotated with a pair type
    LetPair {
        left: String,
        right: String,
        ann: Option<SurfaceType>,
        subject: Box<Expr>,
        body: Box<Expr>,
    },
    /// `M; N`
    Seq(Box<Expr>, Box<Expr>),
    /// `case V { inl(x) -> M inr(y) -> N }`, arms optionally annotated
    Case {
        subject: Box<Expr>,
        left_var: String,
        left_ann: Option<SurfaceType>,
        left_body: Box<Expr>,
        right_var: String,
        right_ann: Option<SurfaceType>,
        right_body: Box<Expr>,
    },
    /// `if V { M } else { N }`
    If {
        cond: Box<Expr>,
        then_body: Box<Expr>,
        else_body: Box<Expr>,
    },
    Pair(Box<Expr>, Box<Expr>),
    Inl(Box<Expr>),
    Inr(Box<Expr>),
    /// `fun(x: T, ...): U { M }` or `linfun(...): U { M }`
    Lambda {
        linear: bool,
        params: Vec<(String, SurfaceType)>,
        ret: SurfaceType,
        body: Box<Expr>,
    },
    /// `f(args)` where the head is an expression (a definition name,
    /// builtin, or function-typed variable)
    App {
        head: Box<Expr>,
        args: Vec<Expr>,
    },
    /// binary builtin operators `+ - * <`
    BinOp {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// `spawn { M }`
    Spawn(Box<Expr>),
    /// `new[I]`
    New { iface: String },
    /// `V ! Tag(args)`
    Send {
        target: Box<Expr>,
        tag: String,
        args: Vec<Expr>,
    },
    /// `guard V: E { clauses }`
    Guard {
        subject: Box<Expr>,
        pattern: Pattern,
        clauses: Vec<GuardClause>,
    },
    /// `free(V)`, sugar for `guard V: 1 { free -> () }`
    FreeSugar(Box<Expr>),
    /// `fail(V)`, sugar for `guard V: 0 { fail }`
    FailSugar(Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Less,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Less => "<",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuardClause {
    pub kind: GuardClauseKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GuardClauseKind {
    /// `receive Tag(x, ...) from y -> M`
    Receive {
        tag: String,
        params: Vec<String>,
        rebind: String,
        body: Box<Expr>,
    },
    /// `free -> M`
    Free { body: Box<Expr> },
    /// `fail`
    Fail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceDecl {
    pub name: String,
    /// tag -> payload types, in declaration order
    pub messages: Vec<(String, Vec<SurfaceType>)>,
    pub span: Span,
}

impl InterfaceDecl {
    pub fn lookup(&self, tag: &str) -> Option<&Vec<SurfaceType>> {
        self.messages.iter().find(|(t, _)| t == tag).map(|(_, p)| p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefDecl {
    pub name: String,
    pub params: Vec<(String, SurfaceType)>,
    pub ret: SurfaceType,
    pub body: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceProgram {
    pub interfaces: Vec<InterfaceDecl>,
    pub defs: Vec<DefDecl>,
    pub body: Option<Expr>,
    /// Pattern variables consumed so far (desugaring allocates from here).
    pub next_pattern_var: u32,
}

impl SurfaceProgram {
    pub fn interface(&self, name: &str) -> Option<&InterfaceDecl> {
        self.interfaces.iter().find(|i| i.name == name)
    }

    pub fn def(&self, name: &str) -> Option<&DefDecl> {
        self.defs.iter().find(|d| d.name == name)
    }
}

/// Builtin signature table: `print`, `intToString`, and the integer
/// operators handled by `BinOp`.
pub fn builtin_signature(name: &str) -> Option<(Vec<BaseType>, BaseType)> {
    match name {
        "print" => Some((vec![BaseType::String], BaseType::Unit)),
        "intToString" => Some((vec![BaseType::Int], BaseType::String)),
        _ => None,
    }
}

/// Free variables of an expression (no binders counted).
pub fn free_vars(e: &Expr) -> std::collections::BTreeSet<String> {
    let mut acc = std::collections::BTreeSet::new();
    collect_free(e, &mut Vec::new(), &mut acc);
    acc
}

fn collect_free(
    e: &Expr,
    bound: &mut Vec<String>,
    acc: &mut std::collections::BTreeSet<String>,
) {
    match &e.kind {
        ExprKind::Var(x) => {
            if !bound.contains(x) {
                acc.insert(x.clone());
            }
        }
        ExprKind::Const(_) | ExprKind::New { .. } => {}
        ExprKind::Let {
            var,
            subject,
            body,
            ..
        } => {
            collect_free(subject, bound, acc);
            bound.push(var.clone());
            collect_free(body, bound, acc);
            bound.pop();
        }
        ExprKind::LetPair {
            left,
            right,
            subject,
            body,
            ..
        } => {
            collect_free(subject, bound, acc);
            bound.push(left.clone());
            bound.push(right.clone());
            collect_free(body, bound, acc);
            bound.pop();
            bound.pop();
        }
        ExprKind::Seq(a, b) => {
            collect_free(a, bound, acc);
            collect_free(b, bound, acc);
        }
        ExprKind::Case {
            subject,
            left_var,
            left_body,
            right_var,
            right_body,
            ..
        } => {
            collect_free(subject, bound, acc);
            bound.push(left_var.clone());
            collect_free(left_body, bound, acc);
            bound.pop();
            bound.push(right_var.clone());
            collect_free(right_body, bound, acc);
            bound.pop();
        }
        ExprKind::If {
            cond,
            then_body,
            else_body,
        } => {
            collect_free(cond, bound, acc);
            collect_free(then_body, bound, acc);
            collect_free(else_body, bound, acc);
        }
        ExprKind::Pair(a, b) => {
            collect_free(a, bound, acc);
            collect_free(b, bound, acc);
        }
        ExprKind::Inl(a) | ExprKind::Inr(a) | ExprKind::Spawn(a) => collect_free(a, bound, acc),
        ExprKind::Lambda { params, body, .. } => {
            let n = params.len();
            for (p, _) in params {
                bound.push(p.clone());
            }
            collect_free(body, bound, acc);
            for _ in 0..n {
                bound.pop();
            }
        }
        ExprKind::App { head, args } => {
            // a definition or builtin name in head position is not a
            // variable occurrence
            if !matches!(&head.kind, ExprKind::Var(_)) {
                collect_free(head, bound, acc);
            } else if let ExprKind::Var(x) = &head.kind {
                if bound.contains(x) {
                    // locally bound: a function-typed variable use
                } else {
                    acc.insert(x.clone());
                }
            }
            for a in args {
                collect_free(a, bound, acc);
            }
        }
        ExprKind::BinOp { lhs, rhs, .. } => {
            collect_free(lhs, bound, acc);
            collect_free(rhs, bound, acc);
        }
        ExprKind::Send { target, args, .. } => {
            collect_free(target, bound, acc);
            for a in args {
                collect_free(a, bound, acc);
            }
        }
        ExprKind::Guard {
            subject, clauses, ..
        } => {
            collect_free(subject, bound, acc);
            for c in clauses {
                match &c.kind {
                    GuardClauseKind::Receive {
                        params,
                        rebind,
                        body,
                        ..
                    } => {
                        let n = params.len() + 1;
                        for p in params {
                            bound.push(p.clone());
                        }
                        bound.push(rebind.clone());
                        collect_free(body, bound, acc);
                        for _ in 0..n {
                            bound.pop();
                        }
                    }
                    GuardClauseKind::Free { body } => collect_free(body, bound, acc),
                    GuardClauseKind::Fail => {}
                }
            }
        }
        ExprKind::FreeSugar(v) | ExprKind::FailSugar(v) => collect_free(v, bound, acc),
    }
}
