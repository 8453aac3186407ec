//! Desugaring: expands `free(V)` and `fail(V)`, rewrites `M; N` to a
//! unit-annotated let, and fills omitted mailbox-type patterns with fresh
//! pattern variables.

use crate::patterns::Pattern;
use crate::span::Span;

use super::{
    BaseType, Constant, Expr, ExprKind, GuardClause, GuardClauseKind, Literal, SurfaceProgram,
    SurfaceType,
};

/// Fresh-name and fresh-pattern-variable supply. Internal names contain
/// `%`, which cannot be lexed, so they never collide with user variables.
struct Fresh {
    next_var: u32,
    next_name: u32,
}

impl Fresh {
    fn pattern_var(&mut self) -> Pattern {
        let v = self.next_var;
        self.next_var += 1;
        Pattern::Var(v)
    }

    fn name(&mut self, hint: &str) -> String {
        let n = self.next_name;
        self.next_name += 1;
        format!("%{hint}{n}")
    }
}

pub fn desugar(p: &SurfaceProgram) -> SurfaceProgram {
    let mut fresh = Fresh {
        next_var: p.next_pattern_var,
        next_name: 0,
    };
    let interfaces = p
        .interfaces
        .iter()
        .map(|i| {
            let messages = i
                .messages
                .iter()
                .map(|(tag, payloads)| {
                    (
                        tag.clone(),
                        payloads.iter().map(|t| fill_type(t, &mut fresh)).collect(),
                    )
                })
                .collect();
            super::InterfaceDecl {
                name: i.name.clone(),
                messages,
                span: i.span,
            }
        })
        .collect();
    let defs = p
        .defs
        .iter()
        .map(|d| super::DefDecl {
            name: d.name.clone(),
            params: d
                .params
                .iter()
                .map(|(x, t)| (x.clone(), fill_type(t, &mut fresh)))
                .collect(),
            ret: fill_type(&d.ret, &mut fresh),
            body: desugar_expr(&d.body, &mut fresh),
            span: d.span,
        })
        .collect();
    let body = p.body.as_ref().map(|b| desugar_expr(b, &mut fresh));
    SurfaceProgram {
        interfaces,
        defs,
        body,
        next_pattern_var: fresh.next_var,
    }
}

/// Insert a fresh pattern variable wherever a mailbox type omits its
/// pattern.
fn fill_type(t: &SurfaceType, fresh: &mut Fresh) -> SurfaceType {
    match t {
        SurfaceType::Base(b) => SurfaceType::Base(*b),
        SurfaceType::MbSend { iface, pattern } => SurfaceType::MbSend {
            iface: iface.clone(),
            pattern: Some(pattern.clone().unwrap_or_else(|| fresh.pattern_var())),
        },
        SurfaceType::MbRecv { iface, pattern } => SurfaceType::MbRecv {
            iface: iface.clone(),
            pattern: Some(pattern.clone().unwrap_or_else(|| fresh.pattern_var())),
        },
        SurfaceType::Pair(a, b) => SurfaceType::Pair(
            Box::new(fill_type(a, fresh)),
            Box::new(fill_type(b, fresh)),
        ),
        SurfaceType::Sum(a, b) => SurfaceType::Sum(
            Box::new(fill_type(a, fresh)),
            Box::new(fill_type(b, fresh)),
        ),
        SurfaceType::Fun {
            linear,
            params,
            ret,
        } => SurfaceType::Fun {
            linear: *linear,
            params: params.iter().map(|p| fill_type(p, fresh)).collect(),
            ret: Box::new(fill_type(ret, fresh)),
        },
    }
}

fn unit_expr(span: Span) -> Expr {
    Expr::new(ExprKind::Const(Constant::Lit(Literal::Unit)), span)
}

fn desugar_expr(e: &Expr, fresh: &mut Fresh) -> Expr {
    let span = e.span;
    let kind = match &e.kind {
        ExprKind::Var(_) | ExprKind::Const(_) | ExprKind::New { .. } => e.kind.clone(),
        ExprKind::Let {
            var,
            ann,
            subject,
            body,
        } => ExprKind::Let {
            var: var.clone(),
            ann: ann.as_ref().map(|t| fill_type(t, fresh)),
            subject: Box::new(desugar_expr(subject, fresh)),
            body: Box::new(desugar_expr(body, fresh)),
        },
        ExprKind::LetPair {
            left,
            right,
            ann,
            subject,
            body,
        } => ExprKind::LetPair {
            left: left.clone(),
            right: right.clone(),
            ann: ann.as_ref().map(|t| fill_type(t, fresh)),
            subject: Box::new(desugar_expr(subject, fresh)),
            body: Box::new(desugar_expr(body, fresh)),
        },
        // M; N becomes let %seq: Unit = M in N with the binder unused
        ExprKind::Seq(a, b) => ExprKind::Let {
            var: fresh.name("seq"),
            ann: Some(SurfaceType::Base(BaseType::Unit)),
            subject: Box::new(desugar_expr(a, fresh)),
            body: Box::new(desugar_expr(b, fresh)),
        },
        ExprKind::Case {
            subject,
            left_var,
            left_ann,
            left_body,
            right_var,
            right_ann,
            right_body,
        } => ExprKind::Case {
            subject: Box::new(desugar_expr(subject, fresh)),
            left_var: left_var.clone(),
            left_ann: left_ann.as_ref().map(|t| fill_type(t, fresh)),
            left_body: Box::new(desugar_expr(left_body, fresh)),
            right_var: right_var.clone(),
            right_ann: right_ann.as_ref().map(|t| fill_type(t, fresh)),
            right_body: Box::new(desugar_expr(right_body, fresh)),
        },
        ExprKind::If {
            cond,
            then_body,
            else_body,
        } => ExprKind::If {
            cond: Box::new(desugar_expr(cond, fresh)),
            then_body: Box::new(desugar_expr(then_body, fresh)),
            else_body: Box::new(desugar_expr(else_body, fresh)),
        },
        ExprKind::Pair(a, b) => ExprKind::Pair(
            Box::new(desugar_expr(a, fresh)),
            Box::new(desugar_expr(b, fresh)),
        ),
        ExprKind::Inl(a) => ExprKind::Inl(Box::new(desugar_expr(a, fresh))),
        ExprKind::Inr(a) => ExprKind::Inr(Box::new(desugar_expr(a, fresh))),
        ExprKind::Lambda {
            linear,
            params,
            ret,
            body,
        } => ExprKind::Lambda {
            linear: *linear,
            params: params
                .iter()
                .map(|(x, t)| (x.clone(), fill_type(t, fresh)))
                .collect(),
            ret: fill_type(ret, fresh),
            body: Box::new(desugar_expr(body, fresh)),
        },
        ExprKind::App { head, args } => ExprKind::App {
            head: Box::new(desugar_expr(head, fresh)),
            args: args.iter().map(|a| desugar_expr(a, fresh)).collect(),
        },
        ExprKind::BinOp { op, lhs, rhs } => ExprKind::BinOp {
            op: *op,
            lhs: Box::new(desugar_expr(lhs, fresh)),
            rhs: Box::new(desugar_expr(rhs, fresh)),
        },
        ExprKind::Spawn(b) => ExprKind::Spawn(Box::new(desugar_expr(b, fresh))),
        ExprKind::Send { target, tag, args } => ExprKind::Send {
            target: Box::new(desugar_expr(target, fresh)),
            tag: tag.clone(),
            args: args.iter().map(|a| desugar_expr(a, fresh)).collect(),
        },
        ExprKind::Guard {
            subject,
            pattern,
            clauses,
        } => ExprKind::Guard {
            subject: Box::new(desugar_expr(subject, fresh)),
            pattern: pattern.clone(),
            clauses: clauses
                .iter()
                .map(|c| GuardClause {
                    kind: match &c.kind {
                        GuardClauseKind::Receive {
                            tag,
                            params,
                            rebind,
                            body,
                        } => GuardClauseKind::Receive {
                            tag: tag.clone(),
                            params: params.clone(),
                            rebind: rebind.clone(),
                            body: Box::new(desugar_expr(body, fresh)),
                        },
                        GuardClauseKind::Free { body } => GuardClauseKind::Free {
                            body: Box::new(desugar_expr(body, fresh)),
                        },
                        GuardClauseKind::Fail => GuardClauseKind::Fail,
                    },
                    span: c.span,
                })
                .collect(),
        },
        // free(V) becomes guard V: 1 { free -> () }
        ExprKind::FreeSugar(v) => ExprKind::Guard {
            subject: Box::new(desugar_expr(v, fresh)),
            pattern: Pattern::One,
            clauses: vec![GuardClause {
                kind: GuardClauseKind::Free {
                    body: Box::new(unit_expr(span)),
                },
                span,
            }],
        },
        // fail(V) becomes guard V: 0 { fail }
        ExprKind::FailSugar(v) => ExprKind::Guard {
            subject: Box::new(desugar_expr(v, fresh)),
            pattern: Pattern::Zero,
            clauses: vec![GuardClause {
                kind: GuardClauseKind::Fail,
                span,
            }],
        },
    };
    Expr::new(kind, span)
}

#[cfg(test)]
mod tests {
    use super::super::{free_vars, parse_program};
    use super::*;

    #[test]
    fn free_sugar_expands() {
        let p = parse_program("def f(x: M?): Unit { free(x) }").unwrap();
        let d = desugar(&p);
        match &d.defs[0].body.kind {
            ExprKind::Guard {
                pattern, clauses, ..
            } => {
                assert_eq!(*pattern, Pattern::One);
                assert_eq!(clauses.len(), 1);
                match &clauses[0].kind {
                    GuardClauseKind::Free { body } => {
                        assert!(matches!(
                            body.kind,
                            ExprKind::Const(Constant::Lit(Literal::Unit))
                        ));
                    }
                    other => panic!("expected free clause, got {other:?}"),
                }
            }
            other => panic!("expected guard, got {other:?}"),
        }
    }

    #[test]
    fn fail_sugar_expands() {
        let p = parse_program("def f(x: M?): Unit { fail(x) }").unwrap();
        let d = desugar(&p);
        match &d.defs[0].body.kind {
            ExprKind::Guard {
                pattern, clauses, ..
            } => {
                assert_eq!(*pattern, Pattern::Zero);
                assert!(matches!(clauses[0].kind, GuardClauseKind::Fail));
            }
            other => panic!("expected guard, got {other:?}"),
        }
    }

    #[test]
    fn seq_becomes_unit_let_with_unused_binder() {
        let p = parse_program("def f(): Unit { (); () }").unwrap();
        let d = desugar(&p);
        match &d.defs[0].body.kind {
            ExprKind::Let { var, ann, body, .. } => {
                assert!(var.starts_with('%'));
                assert_eq!(*ann, Some(SurfaceType::Base(BaseType::Unit)));
                assert!(!free_vars(body).contains(var));
            }
            other => panic!("expected let, got {other:?}"),
        }
    }

    #[test]
    fn bare_capabilities_get_fresh_variables() {
        let p = parse_program(
            "interface A { M(B!) } interface B { N() } def f(x: A?, y: B!): Unit { () }",
        )
        .unwrap();
        let d = desugar(&p);
        let mut vars = std::collections::BTreeSet::new();
        for (_, t) in &d.defs[0].params {
            match t {
                SurfaceType::MbRecv { pattern, .. } | SurfaceType::MbSend { pattern, .. } => {
                    match pattern {
                        Some(Pattern::Var(v)) => {
                            vars.insert(*v);
                        }
                        other => panic!("expected a fresh variable, got {other:?}"),
                    }
                }
                other => panic!("expected mailbox type, got {other:?}"),
            }
        }
        // the interface payload B! also received one
        match &d.interfaces[0].messages[0].1[0] {
            SurfaceType::MbSend {
                pattern: Some(Pattern::Var(v)),
                ..
            } => {
                vars.insert(*v);
            }
            other => panic!("expected filled payload, got {other:?}"),
        }
        assert_eq!(vars.len(), 3, "each occurrence gets its own variable");
        // explicit patterns survive
        let p2 = parse_program("def g(x: A?(M + 1)): Unit { () }").unwrap();
        let d2 = desugar(&p2);
        match &d2.defs[0].params[0].1 {
            SurfaceType::MbRecv {
                pattern: Some(p), ..
            } => assert_eq!(*p, Pattern::plus(Pattern::tag("M"), Pattern::One)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn desugar_introduces_no_new_free_variables() {
        let src = r#"
def f(x: M?, d: D!): Unit {
  d ! Go(x);
  free(x)
}
"#;
        let p = parse_program(src).unwrap();
        let d = desugar(&p);
        assert_eq!(free_vars(&p.defs[0].body), free_vars(&d.defs[0].body));
    }
}
