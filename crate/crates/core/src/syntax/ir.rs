//! Fine-grain IR: every operator argument is a value; compound
//! subexpressions are let-bound. Conversion runs on desugared programs.

use crate::patterns::Pattern;
use crate::span::Span;

use super::{
    BinOp, Constant, DefDecl, Expr, ExprKind, GuardClauseKind, InterfaceDecl, Literal,
    SurfaceProgram, SurfaceType,
};

#[derive(Debug, Clone, PartialEq)]
pub enum IrValue {
    Var(String),
    Unit,
    Int(i64),
    Bool(bool),
    Str(String),
    Pair(Box<IrValue>, Box<IrValue>),
    Inl(Box<IrValue>),
    Inr(Box<IrValue>),
    Lambda {
        linear: bool,
        params: Vec<(String, SurfaceType)>,
        ret: SurfaceType,
        body: Box<IrTerm>,
    },
    /// A runtime mailbox name; never produced by IR conversion.
    Name(u64),
}

impl IrValue {
    pub fn is_runtime_name(&self) -> bool {
        matches!(self, IrValue::Name(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrTerm {
    pub kind: IrTermKind,
    pub span: Span,
}

impl IrTerm {
    pub fn new(kind: IrTermKind, span: Span) -> Self {
        IrTerm { kind, span }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Callee {
    /// A top-level definition.
    Def(String),
    /// A function value (variable before substitution, lambda after).
    Val(IrValue),
}

#[derive(Debug, Clone, PartialEq)]
pub enum IrTermKind {
    Value(IrValue),
    Let {
        var: String,
        ann: Option<SurfaceType>,
        subject: Box<IrTerm>,
        body: Box<IrTerm>,
    },
    LetPair {
        left: String,
        right: String,
        ann: Option<SurfaceType>,
        subject: IrValue,
        body: Box<IrTerm>,
    },
    Case {
        subject: IrValue,
        left_var: String,
        left_ann: Option<SurfaceType>,
        left_body: Box<IrTerm>,
        right_var: String,
        right_ann: Option<SurfaceType>,
        right_body: Box<IrTerm>,
    },
    If {
        cond: IrValue,
        then_body: Box<IrTerm>,
        else_body: Box<IrTerm>,
    },
    App {
        callee: Callee,
        args: Vec<IrValue>,
        /// Function type annotation, filled by pre-typing for
        /// first-class-function calls.
        fn_ty: Option<crate::types::UsageType>,
    },
    Builtin {
        name: String,
        args: Vec<IrValue>,
    },
    BinOp {
        op: BinOp,
        lhs: IrValue,
        rhs: IrValue,
    },
    Spawn(Box<IrTerm>),
    New {
        iface: String,
    },
    Send {
        target: IrValue,
        tag: String,
        args: Vec<IrValue>,
        /// Interface of the target, filled by pre-typing.
        iface: Option<String>,
    },
    Guard {
        subject: IrValue,
        pattern: Pattern,
        clauses: Vec<IrClause>,
        /// Interface of the subject, filled by pre-typing.
        iface: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrClause {
    pub kind: IrClauseKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IrClauseKind {
    Receive {
        tag: String,
        params: Vec<String>,
        rebind: String,
        body: Box<IrTerm>,
    },
    Free {
        body: Box<IrTerm>,
    },
    Fail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrDef {
    pub name: String,
    pub params: Vec<(String, SurfaceType)>,
    pub ret: SurfaceType,
    pub body: IrTerm,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrProgram {
    pub interfaces: Vec<InterfaceDecl>,
    pub defs: Vec<IrDef>,
    pub body: Option<IrTerm>,
    pub next_pattern_var: u32,
}

impl IrProgram {
    pub fn interface(&self, name: &str) -> Option<&InterfaceDecl> {
        self.interfaces.iter().find(|i| i.name == name)
    }

    pub fn def(&self, name: &str) -> Option<&IrDef> {
        self.defs.iter().find(|d| d.name == name)
    }
}

/// Convert a desugared program to fine-grain form.
pub fn to_ir(p: &SurfaceProgram) -> IrProgram {
    let def_names: Vec<String> = p.defs.iter().map(|d| d.name.clone()).collect();
    let mut cx = Lower {
        def_names,
        next_temp: 0,
    };
    let defs = p
        .defs
        .iter()
        .map(|d: &DefDecl| {
            let mut scope: Vec<String> = d.params.iter().map(|(x, _)| x.clone()).collect();
            IrDef {
                name: d.name.clone(),
                params: d.params.clone(),
                ret: d.ret.clone(),
                body: cx.term(&d.body, &mut scope),
                span: d.span,
            }
        })
        .collect();
    let body = p.body.as_ref().map(|b| cx.term(b, &mut Vec::new()));
    IrProgram {
        interfaces: p.interfaces.clone(),
        defs,
        body,
        next_pattern_var: p.next_pattern_var,
    }
}

struct Lower {
    def_names: Vec<String>,
    next_temp: u32,
}

impl Lower {
    fn temp(&mut self) -> String {
        let n = self.next_temp;
        self.next_temp += 1;
        format!("%t{n}")
    }

    /// Lower to a term, wrapping any bindings created by atomising
    /// subexpressions.
    fn term(&mut self, e: &Expr, scope: &mut Vec<String>) -> IrTerm {
        let mut binds: Vec<(String, IrTerm)> = Vec::new();
        let base = self.term_inner(e, scope, &mut binds);
        wrap_binds(binds, base)
    }

    fn term_inner(
        &mut self,
        e: &Expr,
        scope: &mut Vec<String>,
        binds: &mut Vec<(String, IrTerm)>,
    ) -> IrTerm {
        let span = e.span;
        match &e.kind {
            ExprKind::Var(_) | ExprKind::Const(_) | ExprKind::Lambda { .. }
            | ExprKind::Pair(..) | ExprKind::Inl(_) | ExprKind::Inr(_) => {
                let v = self.value(e, scope, binds);
                IrTerm::new(IrTermKind::Value(v), span)
            }
            ExprKind::Let {
                var,
                ann,
                subject,
                body,
            } => {
                let subject = self.term(subject, scope);
                scope.push(var.clone());
                let body = self.term(body, scope);
                scope.pop();
                IrTerm::new(
                    IrTermKind::Let {
                        var: var.clone(),
                        ann: ann.clone(),
                        subject: Box::new(subject),
                        body: Box::new(body),
                    },
                    span,
                )
            }
            ExprKind::LetPair {
                left,
                right,
                ann,
                subject,
                body,
            } => {
                let subject = self.value(subject, scope, binds);
                scope.push(left.clone());
                scope.push(right.clone());
                let body = self.term(body, scope);
                scope.pop();
                scope.pop();
                IrTerm::new(
                    IrTermKind::LetPair {
                        left: left.clone(),
                        right: right.clone(),
                        ann: ann.clone(),
                        subject,
                        body: Box::new(body),
                    },
                    span,
                )
            }
            ExprKind::Seq(..) | ExprKind::FreeSugar(_) | ExprKind::FailSugar(_) => {
                unreachable!("IR conversion requires a desugared program")
            }
            ExprKind::Case {
                subject,
                left_var,
                left_ann,
                left_body,
                right_var,
                right_ann,
                right_body,
            } => {
                let subject = self.value(subject, scope, binds);
                scope.push(left_var.clone());
                let left_body = self.term(left_body, scope);
                scope.pop();
                scope.push(right_var.clone());
                let right_body = self.term(right_body, scope);
                scope.pop();
                IrTerm::new(
                    IrTermKind::Case {
                        subject,
                        left_var: left_var.clone(),
                        left_ann: left_ann.clone(),
                        left_body: Box::new(left_body),
                        right_var: right_var.clone(),
                        right_ann: right_ann.clone(),
                        right_body: Box::new(right_body),
                    },
                    span,
                )
            }
            ExprKind::If {
                cond,
                then_body,
                else_body,
            } => {
                let cond = self.value(cond, scope, binds);
                let then_body = self.term(then_body, scope);
                let else_body = self.term(else_body, scope);
                IrTerm::new(
                    IrTermKind::If {
                        cond,
                        then_body: Box::new(then_body),
                        else_body: Box::new(else_body),
                    },
                    span,
                )
            }
            ExprKind::App { head, args } => {
                let callee = match &head.kind {
                    ExprKind::Var(name) if !scope.contains(name) => {
                        if super::builtin_signature(name).is_some() {
                            let args = args
                                .iter()
                                .map(|a| self.value(a, scope, binds))
                                .collect();
                            return IrTerm::new(
                                IrTermKind::Builtin {
                                    name: name.clone(),
                                    args,
                                },
                                span,
                            );
                        }
                        // unknown names resolve as definition calls; the
                        // pre-typing pass reports undeclared ones
                        let _ = &self.def_names;
                        Callee::Def(name.clone())
                    }
                    _ => Callee::Val(self.value(head, scope, binds)),
                };
                let args = args.iter().map(|a| self.value(a, scope, binds)).collect();
                IrTerm::new(
                    IrTermKind::App {
                        callee,
                        args,
                        fn_ty: None,
                    },
                    span,
                )
            }
            ExprKind::BinOp { op, lhs, rhs } => {
                let lhs = self.value(lhs, scope, binds);
                let rhs = self.value(rhs, scope, binds);
                IrTerm::new(IrTermKind::BinOp { op: *op, lhs, rhs }, span)
            }
            ExprKind::Spawn(body) => {
                let body = self.term(body, scope);
                IrTerm::new(IrTermKind::Spawn(Box::new(body)), span)
            }
            ExprKind::New { iface } => IrTerm::new(
                IrTermKind::New {
                    iface: iface.clone(),
                },
                span,
            ),
            ExprKind::Send { target, tag, args } => {
                let target = self.value(target, scope, binds);
                let args = args.iter().map(|a| self.value(a, scope, binds)).collect();
                IrTerm::new(
                    IrTermKind::Send {
                        target,
                        tag: tag.clone(),
                        args,
                        iface: None,
                    },
                    span,
                )
            }
            ExprKind::Guard {
                subject,
                pattern,
                clauses,
            } => {
                let subject = self.value(subject, scope, binds);
                let clauses = clauses
                    .iter()
                    .map(|c| IrClause {
                        kind: match &c.kind {
                            GuardClauseKind::Receive {
                                tag,
                                params,
                                rebind,
                                body,
                            } => {
                                for p in params {
                                    scope.push(p.clone());
                                }
                                scope.push(rebind.clone());
                                let body = self.term(body, scope);
                                for _ in 0..=params.len() {
                                    scope.pop();
                                }
                                IrClauseKind::Receive {
                                    tag: tag.clone(),
                                    params: params.clone(),
                                    rebind: rebind.clone(),
                                    body: Box::new(body),
                                }
                            }
                            GuardClauseKind::Free { body } => IrClauseKind::Free {
                                body: Box::new(self.term(body, scope)),
                            },
                            GuardClauseKind::Fail => IrClauseKind::Fail,
                        },
                        span: c.span,
                    })
                    .collect();
                IrTerm::new(
                    IrTermKind::Guard {
                        subject,
                        pattern: pattern.clone(),
                        clauses,
                        iface: None,
                    },
                    span,
                )
            }
        }
    }

    /// Lower an expression in value position. Non-value forms are bound to
    /// a fresh temporary.
    fn value(
        &mut self,
        e: &Expr,
        scope: &mut Vec<String>,
        binds: &mut Vec<(String, IrTerm)>,
    ) -> IrValue {
        match &e.kind {
            ExprKind::Var(x) => IrValue::Var(x.clone()),
            ExprKind::Const(Constant::Lit(Literal::Unit)) => IrValue::Unit,
            ExprKind::Const(Constant::Lit(Literal::Int(n))) => IrValue::Int(*n),
            ExprKind::Const(Constant::Lit(Literal::Bool(b))) => IrValue::Bool(*b),
            ExprKind::Const(Constant::Str(s)) => IrValue::Str(s.clone()),
            ExprKind::Pair(a, b) => {
                let va = self.value(a, scope, binds);
                let vb = self.value(b, scope, binds);
                IrValue::Pair(Box::new(va), Box::new(vb))
            }
            ExprKind::Inl(a) => IrValue::Inl(Box::new(self.value(a, scope, binds))),
            ExprKind::Inr(a) => IrValue::Inr(Box::new(self.value(a, scope, binds))),
            ExprKind::Lambda {
                linear,
                params,
                ret,
                body,
            } => {
                let n = params.len();
                for (x, _) in params {
                    scope.push(x.clone());
                }
                let body = self.term(body, scope);
                for _ in 0..n {
                    scope.pop();
                }
                IrValue::Lambda {
                    linear: *linear,
                    params: params.clone(),
                    ret: ret.clone(),
                    body: Box::new(body),
                }
            }
            _ => {
                let subject = self.term(e, scope);
                let t = self.temp();
                binds.push((t.clone(), subject));
                scope.push(t.clone());
                IrValue::Var(t)
            }
        }
    }
}

fn wrap_binds(binds: Vec<(String, IrTerm)>, base: IrTerm) -> IrTerm {
    let mut term = base;
    for (var, subject) in binds.into_iter().rev() {
        let span = subject.span;
        term = IrTerm::new(
            IrTermKind::Let {
                var,
                ann: None,
                subject: Box::new(subject),
                body: Box::new(term),
            },
            span,
        );
    }
    term
}

/// Check the fine-grain invariant: every value position holds a value and
/// every temporary is bound before use. Returns problems found.
pub fn check_ir_wellformed(p: &IrProgram) -> Vec<String> {
    let mut problems = Vec::new();
    for d in &p.defs {
        let mut scope: Vec<String> = d.params.iter().map(|(x, _)| x.clone()).collect();
        wf_term(&d.body, &mut scope, &mut problems);
    }
    if let Some(b) = &p.body {
        wf_term(b, &mut Vec::new(), &mut problems);
    }
    problems
}

fn wf_value(v: &IrValue, scope: &[String], problems: &mut Vec<String>) {
    match v {
        IrValue::Var(x) => {
            if x.starts_with('%') && !scope.contains(x) {
                problems.push(format!("temporary {x} used out of scope"));
            }
        }
        IrValue::Pair(a, b) => {
            wf_value(a, scope, problems);
            wf_value(b, scope, problems);
        }
        IrValue::Inl(a) | IrValue::Inr(a) => wf_value(a, scope, problems),
        _ => {}
    }
}

fn wf_term(t: &IrTerm, scope: &mut Vec<String>, problems: &mut Vec<String>) {
    match &t.kind {
        IrTermKind::Value(v) => wf_value(v, scope, problems),
        IrTermKind::Let {
            var,
            subject,
            body,
            ..
        } => {
            wf_term(subject, scope, problems);
            scope.push(var.clone());
            wf_term(body, scope, problems);
            scope.pop();
        }
        IrTermKind::LetPair {
            left,
            right,
            subject,
            body,
            ..
        } => {
            wf_value(subject, scope, problems);
            scope.push(left.clone());
            scope.push(right.clone());
            wf_term(body, scope, problems);
            scope.pop();
            scope.pop();
        }
        IrTermKind::Case {
            subject,
            left_var,
            left_body,
            right_var,
            right_body,
            ..
        } => {
            wf_value(subject, scope, problems);
            scope.push(left_var.clone());
            wf_term(left_body, scope, problems);
            scope.pop();
            scope.push(right_var.clone());
            wf_term(right_body, scope, problems);
            scope.pop();
        }
        IrTermKind::If {
            cond,
            then_body,
            else_body,
        } => {
            wf_value(cond, scope, problems);
            wf_term(then_body, scope, problems);
            wf_term(else_body, scope, problems);
        }
        IrTermKind::App { callee, args, .. } => {
            if let Callee::Val(v) = callee {
                wf_value(v, scope, problems);
            }
            for a in args {
                wf_value(a, scope, problems);
            }
        }
        IrTermKind::Builtin { args, .. } => {
            for a in args {
                wf_value(a, scope, problems);
            }
        }
        IrTermKind::BinOp { lhs, rhs, .. } => {
            wf_value(lhs, scope, problems);
            wf_value(rhs, scope, problems);
        }
        IrTermKind::Spawn(body) => wf_term(body, scope, problems),
        IrTermKind::New { .. } => {}
        IrTermKind::Send { target, args, .. } => {
            wf_value(target, scope, problems);
            for a in args {
                wf_value(a, scope, problems);
            }
        }
        IrTermKind::Guard {
            subject, clauses, ..
        } => {
            wf_value(subject, scope, problems);
            for c in clauses {
                match &c.kind {
                    IrClauseKind::Receive {
                        params,
                        rebind,
                        body,
                        ..
                    } => {
                        for p in params {
                            scope.push(p.clone());
                        }
                        scope.push(rebind.clone());
                        wf_term(body, scope, problems);
                        for _ in 0..=params.len() {
                            scope.pop();
                        }
                    }
                    IrClauseKind::Free { body } => wf_term(body, scope, problems),
                    IrClauseKind::Fail => {}
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{desugar, parse_program};
    use super::*;

    fn lower(src: &str) -> IrProgram {
        let p = parse_program(src).unwrap();
        to_ir(&desugar(&p))
    }

    #[test]
    fn nested_call_is_let_bound() {
        // f(g(x)) becomes let t = g(x) in f(t)
        let ir = lower("def g(x: Int): Int { x } def f(y: Int): Int { f(g(y)) }");
        let body = &ir.defs[1].body;
        match &body.kind {
            IrTermKind::Let { var, subject, body, .. } if var.starts_with("%t") => {
                assert!(matches!(
                    &subject.kind,
                    IrTermKind::App { callee: Callee::Def(n), .. } if n == "g"
                ));
                assert!(matches!(
                    &body.kind,
                    IrTermKind::App { callee: Callee::Def(n), args, .. }
                        if n == "f" && args[0] == IrValue::Var(var.clone())
                ));
            }
            other => panic!("expected let, got {other:?}"),
        }
        assert!(check_ir_wellformed(&ir).is_empty());
    }

    #[test]
    fn constants_stay_in_place() {
        // door ! Want(0, self) keeps the constant argument inline
        let ir = lower("def f(door: D!, self: S?): Unit { door ! Want(0, self); free(self) }");
        fn find_send(t: &IrTerm) -> Option<&IrTermKind> {
            match &t.kind {
                IrTermKind::Send { .. } => Some(&t.kind),
                IrTermKind::Let { subject, body, .. } => {
                    find_send(subject).or_else(|| find_send(body))
                }
                _ => None,
            }
        }
        let send = find_send(&ir.defs[0].body).expect("send present");
        match send {
            IrTermKind::Send { args, .. } => {
                assert_eq!(args[0], IrValue::Int(0));
                assert_eq!(args[1], IrValue::Var("self".into()));
            }
            _ => unreachable!(),
        }
        assert!(check_ir_wellformed(&ir).is_empty());
    }

    #[test]
    fn values_are_fixed_points() {
        let ir = lower("def f(x: Int): Int { x }");
        assert!(matches!(
            &ir.defs[0].body.kind,
            IrTermKind::Value(IrValue::Var(x)) if x == "x"
        ));
    }

    #[test]
    fn conversion_is_idempotent() {
        let src = r#"
interface D { Want(Int), Go(D!) }
def f(door: D!, k: Int): Unit {
  door ! Want(k + 1);
  spawn { door ! Go(door) };
  if k < 2 { () } else { f(door, k - 1) }
}
"#;
        let p = desugar(&parse_program(src).unwrap());
        let ir1 = to_ir(&p);
        // converting the embedded IR again must not change its structure
        let ir2 = to_ir(&ir_embed(&ir1));
        assert_eq!(
            format!("{:?}", strip(&ir1)),
            format!("{:?}", strip(&ir2))
        );
    }

    /// Replace every span with the synthetic one for structural comparison.
    fn strip(p: &IrProgram) -> IrProgram {
        let mut out = p.clone();
        fn strip_term(t: &mut IrTerm) {
            t.span = Span::synthetic();
            match &mut t.kind {
                IrTermKind::Let { subject, body, .. } => {
                    strip_term(subject);
                    strip_term(body);
                }
                IrTermKind::LetPair { body, .. } => strip_term(body),
                IrTermKind::Case {
                    left_body,
                    right_body,
                    ..
                } => {
                    strip_term(left_body);
                    strip_term(right_body);
                }
                IrTermKind::If {
                    then_body,
                    else_body,
                    ..
                } => {
                    strip_term(then_body);
                    strip_term(else_body);
                }
                IrTermKind::Spawn(body) => strip_term(body),
                IrTermKind::Guard { clauses, .. } => {
                    for c in clauses {
                        c.span = Span::synthetic();
                        match &mut c.kind {
                            IrClauseKind::Receive { body, .. }
                            | IrClauseKind::Free { body } => strip_term(body),
                            IrClauseKind::Fail => {}
                        }
                    }
                }
                _ => {}
            }
        }
        for d in &mut out.defs {
            strip_term(&mut d.body);
        }
        if let Some(b) = &mut out.body {
            strip_term(b);
        }
        out
    }

    /// Embed an IR program back into the surface syntax (IR is a
    /// sub-language of the surface language).
    fn ir_embed(p: &IrProgram) -> SurfaceProgram {
        SurfaceProgram {
            interfaces: p.interfaces.clone(),
            defs: p
                .defs
                .iter()
                .map(|d| DefDecl {
                    name: d.name.clone(),
                    params: d.params.clone(),
                    ret: d.ret.clone(),
                    body: embed_term(&d.body),
                    span: d.span,
                })
                .collect(),
            body: p.body.as_ref().map(embed_term),
            next_pattern_var: p.next_pattern_var,
        }
    }

    fn embed_value(v: &IrValue) -> Expr {
        let s = Span::synthetic();
        match v {
            IrValue::Var(x) => Expr::new(ExprKind::Var(x.clone()), s),
            IrValue::Unit => Expr::new(ExprKind::Const(Constant::Lit(Literal::Unit)), s),
            IrValue::Int(n) => Expr::new(ExprKind::Const(Constant::Lit(Literal::Int(*n))), s),
            IrValue::Bool(b) => Expr::new(ExprKind::Const(Constant::Lit(Literal::Bool(*b))), s),
            IrValue::Str(x) => Expr::new(ExprKind::Const(Constant::Str(x.clone())), s),
            IrValue::Pair(a, b) => Expr::new(
                ExprKind::Pair(Box::new(embed_value(a)), Box::new(embed_value(b))),
                s,
            ),
            IrValue::Inl(a) => Expr::new(ExprKind::Inl(Box::new(embed_value(a))), s),
            IrValue::Inr(a) => Expr::new(ExprKind::Inr(Box::new(embed_value(a))), s),
            IrValue::Lambda {
                linear,
                params,
                ret,
                body,
            } => Expr::new(
                ExprKind::Lambda {
                    linear: *linear,
                    params: params.clone(),
                    ret: ret.clone(),
                    body: Box::new(embed_term(body)),
                },
                s,
            ),
            IrValue::Name(_) => unreachable!("runtime name in static IR"),
        }
    }

    fn embed_term(t: &IrTerm) -> Expr {
        let s = t.span;
        match &t.kind {
            IrTermKind::Value(v) => embed_value(v),
            IrTermKind::Let {
                var,
                ann,
                subject,
                body,
            } => Expr::new(
                ExprKind::Let {
                    var: var.clone(),
                    ann: ann.clone(),
                    subject: Box::new(embed_term(subject)),
                    body: Box::new(embed_term(body)),
                },
                s,
            ),
            IrTermKind::LetPair {
                left,
                right,
                ann,
                subject,
                body,
            } => Expr::new(
                ExprKind::LetPair {
                    left: left.clone(),
                    right: right.clone(),
                    ann: ann.clone(),
                    subject: Box::new(embed_value(subject)),
                    body: Box::new(embed_term(body)),
                },
                s,
            ),
            IrTermKind::Case {
                subject,
                left_var,
                left_ann,
                left_body,
                right_var,
                right_ann,
                right_body,
            } => Expr::new(
                ExprKind::Case {
                    subject: Box::new(embed_value(subject)),
                    left_var: left_var.clone(),
                    left_ann: left_ann.clone(),
                    left_body: Box::new(embed_term(left_body)),
                    right_var: right_var.clone(),
                    right_ann: right_ann.clone(),
                    right_body: Box::new(embed_term(right_body)),
                },
                s,
            ),
            IrTermKind::If {
                cond,
                then_body,
                else_body,
            } => Expr::new(
                ExprKind::If {
                    cond: Box::new(embed_value(cond)),
                    then_body: Box::new(embed_term(then_body)),
                    else_body: Box::new(embed_term(else_body)),
                },
                s,
            ),
            IrTermKind::App { callee, args, .. } => {
                let head = match callee {
                    Callee::Def(n) => Expr::new(ExprKind::Var(n.clone()), s),
                    Callee::Val(v) => embed_value(v),
                };
                Expr::new(
                    ExprKind::App {
                        head: Box::new(head),
                        args: args.iter().map(embed_value).collect(),
                    },
                    s,
                )
            }
            IrTermKind::Builtin { name, args } => Expr::new(
                ExprKind::App {
                    head: Box::new(Expr::new(ExprKind::Var(name.clone()), s)),
                    args: args.iter().map(embed_value).collect(),
                },
                s,
            ),
            IrTermKind::BinOp { op, lhs, rhs } => Expr::new(
                ExprKind::BinOp {
                    op: *op,
                    lhs: Box::new(embed_value(lhs)),
                    rhs: Box::new(embed_value(rhs)),
                },
                s,
            ),
            IrTermKind::Spawn(body) => Expr::new(ExprKind::Spawn(Box::new(embed_term(body))), s),
            IrTermKind::New { iface } => Expr::new(
                ExprKind::New {
                    iface: iface.clone(),
                },
                s,
            ),
            IrTermKind::Send {
                target, tag, args, ..
            } => Expr::new(
                ExprKind::Send {
                    target: Box::new(embed_value(target)),
                    tag: tag.clone(),
                    args: args.iter().map(embed_value).collect(),
                },
                s,
            ),
            IrTermKind::Guard {
                subject,
                pattern,
                clauses,
                ..
            } => Expr::new(
                ExprKind::Guard {
                    subject: Box::new(embed_value(subject)),
                    pattern: pattern.clone(),
                    clauses: clauses
                        .iter()
                        .map(|c| super::super::GuardClause {
                            kind: match &c.kind {
                                IrClauseKind::Receive {
                                    tag,
                                    params,
                                    rebind,
                                    body,
                                } => GuardClauseKind::Receive {
                                    tag: tag.clone(),
                                    params: params.clone(),
                                    rebind: rebind.clone(),
                                    body: Box::new(embed_term(body)),
                                },
                                IrClauseKind::Free { body } => GuardClauseKind::Free {
                                    body: Box::new(embed_term(body)),
                                },
                                IrClauseKind::Fail => GuardClauseKind::Fail,
                            },
                            span: c.span,
                        })
                        .collect(),
                },
                s,
            ),
        }
    }
}
