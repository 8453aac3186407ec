//! Contextual pre-typing: a simply-typed pass over pre-types (types with
//! patterns erased) that resolves scopes, annotates sends and guards with
//! their subject's interface, and annotates first-class function
//! applications with the applied function type.

use indexmap::IndexMap;

use crate::diag::{Diagnostic, Phase};
use crate::span::Span;
use crate::syntax::{
    builtin_signature, BaseType, BinOp, Callee, IrProgram, IrTerm, IrTermKind, IrValue,
};
use crate::syntax::{IrClauseKind, SurfaceType};
use crate::types::{from_surface, UsageType};

use super::{Mode, ProgramTables};

/// Types with patterns and usages erased; what the contextual pass tracks.
#[derive(Debug, Clone, PartialEq)]
enum PreType {
    /// The pre-type of a fail-only guard: compatible with anything.
    Any,
    Base(BaseType),
    /// A mailbox of the given interface, either capability.
    Mb(String),
    Pair(Box<PreType>, Box<PreType>),
    Sum(Box<PreType>, Box<PreType>),
    /// Functions keep their full annotation for application sites.
    Fun(UsageType),
}

impl std::fmt::Display for PreType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PreType::Any => write!(f, "_"),
            PreType::Base(b) => write!(f, "{b}"),
            PreType::Mb(i) => write!(f, "a {i} mailbox"),
            PreType::Pair(a, b) => write!(f, "({a}, {b})"),
            PreType::Sum(a, b) => write!(f, "{a} + {b}"),
            PreType::Fun(t) => write!(f, "{t}"),
        }
    }
}

fn erase(t: &UsageType) -> PreType {
    match t {
        UsageType::Base(b) => PreType::Base(*b),
        UsageType::Mailbox { iface, .. } => PreType::Mb(iface.clone()),
        UsageType::Pair(a, b) => PreType::Pair(Box::new(erase(a)), Box::new(erase(b))),
        UsageType::Sum(a, b) => PreType::Sum(Box::new(erase(a)), Box::new(erase(b))),
        UsageType::Fun { .. } => PreType::Fun(t.clone()),
    }
}

fn erase_surface(t: &SurfaceType) -> PreType {
    erase(&from_surface(t))
}

/// Pre-type compatibility. Interfaces are compared in both modes: the
/// surface syntax names interfaces on every mailbox type, and confusing two
/// of them is a shape error even when the strict aliasing check is in use.
fn compatible(a: &PreType, b: &PreType) -> bool {
    match (a, b) {
        (PreType::Any, _) | (_, PreType::Any) => true,
        (PreType::Base(x), PreType::Base(y)) => x == y,
        (PreType::Mb(i), PreType::Mb(j)) => i == j,
        (PreType::Pair(a1, b1), PreType::Pair(a2, b2))
        | (PreType::Sum(a1, b1), PreType::Sum(a2, b2)) => {
            compatible(a1, a2) && compatible(b1, b2)
        }
        (PreType::Fun(t1), PreType::Fun(t2)) => fun_compatible(t1, t2),
        _ => false,
    }
}

fn fun_compatible(a: &UsageType, b: &UsageType) -> bool {
    match (a, b) {
        (
            UsageType::Fun {
                params: p1,
                ret: r1,
                ..
            },
            UsageType::Fun {
                params: p2,
                ret: r2,
                ..
            },
        ) => {
            p1.len() == p2.len()
                && p1
                    .iter()
                    .zip(p2)
                    .all(|(x, y)| compatible(&erase(x), &erase(y)))
                && compatible(&erase(r1), &erase(r2))
        }
        _ => false,
    }
}

struct Pre<'a> {
    tables: &'a ProgramTables,
}

type Scope = IndexMap<String, PreType>;

impl<'a> Pre<'a> {
    fn err(&self, span: Span, msg: String) -> Diagnostic {
        Diagnostic::error(Phase::Pretype, msg).at(span)
    }

    fn payloads(&self, iface: &str, tag: &str, span: Span) -> Result<Vec<UsageType>, Diagnostic> {
        match self.tables.payloads(iface, tag) {
            Some(p) => Ok(p.clone()),
            None => {
                let msg = if self.tables.mode == Mode::Strict {
                    format!("tag {tag} is not declared by any interface")
                } else {
                    format!("interface {iface} does not declare tag {tag}")
                };
                Err(Diagnostic::error(Phase::Pretype, msg)
                    .at(span)
                    .with_rule("send-unknown-tag"))
            }
        }
    }

    fn value(&self, v: &mut IrValue, scope: &Scope, span: Span) -> Result<PreType, Diagnostic> {
        match v {
            IrValue::Var(x) => scope
                .get(x.as_str())
                .cloned()
                .ok_or_else(|| self.err(span, format!("unbound variable {x}"))),
            IrValue::Unit => Ok(PreType::Base(BaseType::Unit)),
            IrValue::Int(_) => Ok(PreType::Base(BaseType::Int)),
            IrValue::Bool(_) => Ok(PreType::Base(BaseType::Bool)),
            IrValue::Str(_) => Ok(PreType::Base(BaseType::String)),
            IrValue::Pair(a, b) => {
                let at = self.value(a, scope, span)?;
                let bt = self.value(b, scope, span)?;
                Ok(PreType::Pair(Box::new(at), Box::new(bt)))
            }
            // sum injections need a checking context for the missing side;
            // the pre-pass leaves that to annotations on the binding form
            IrValue::Inl(_) | IrValue::Inr(_) => Err(self.err(
                span,
                "sum injections need an annotated binding or case".to_string(),
            )),
            IrValue::Lambda { .. } => self.lambda(v, scope, span),
            IrValue::Name(_) => unreachable!("runtime name during pre-typing"),
        }
    }

    /// Pre-type a value in a checked position: sum injections take their
    /// type from the expectation.
    fn value_against(
        &self,
        v: &mut IrValue,
        expected: &PreType,
        scope: &Scope,
        span: Span,
    ) -> Result<(), Diagnostic> {
        match (&mut *v, expected) {
            (IrValue::Inl(inner), PreType::Sum(l, _)) => {
                self.value_against(inner, l, scope, span)
            }
            (IrValue::Inr(inner), PreType::Sum(_, r)) => {
                self.value_against(inner, r, scope, span)
            }
            (IrValue::Pair(a, b), PreType::Pair(l, r)) => {
                self.value_against(a, l, scope, span)?;
                self.value_against(b, r, scope, span)
            }
            _ => {
                let found = self.value(v, scope, span)?;
                if compatible(&found, expected) {
                    Ok(())
                } else {
                    Err(self.err(span, format!("expected {expected}, found {found}")))
                }
            }
        }
    }

    fn lambda(
        &self,
        v: &mut IrValue,
        scope: &Scope,
        span: Span,
    ) -> Result<PreType, Diagnostic> {
        let IrValue::Lambda {
            linear,
            params,
            ret,
            body,
        } = v
        else {
            unreachable!()
        };
        let mut inner = scope.clone();
        for (x, t) in params.iter() {
            inner.insert(x.clone(), erase_surface(t));
        }
        let ret_pre = erase_surface(ret);
        let found = self.term(body, &mut inner)?;
        if !compatible(&found, &ret_pre) {
            return Err(self.err(
                span,
                format!("function body has pre-type {found}, annotation says {ret_pre}"),
            ));
        }
        Ok(PreType::Fun(UsageType::Fun {
            linear: *linear,
            params: params.iter().map(|(_, t)| from_surface(t)).collect(),
            ret: Box::new(from_surface(ret)),
        }))
    }

    fn term(&self, t: &mut IrTerm, scope: &mut Scope) -> Result<PreType, Diagnostic> {
        let span = t.span;
        match &mut t.kind {
            IrTermKind::Value(v) => {
                if matches!(v, IrValue::Lambda { .. }) {
                    self.lambda(v, scope, span)
                } else {
                    self.value(v, scope, span)
                }
            }
            IrTermKind::Let {
                var,
                ann,
                subject,
                body,
            } => {
                let subject_t = self.term(subject, scope)?;
                if let Some(a) = ann {
                    let want = erase_surface(a);
                    if !compatible(&subject_t, &want) {
                        return Err(self.err(
                            span,
                            format!("let annotation {want} does not match subject {subject_t}"),
                        ));
                    }
                }
                let shadowed = scope.insert(var.clone(), subject_t);
                let out = self.term(body, scope)?;
                restore(scope, var, shadowed);
                Ok(out)
            }
            IrTermKind::LetPair {
                left,
                right,
                ann,
                subject,
                body,
            } => {
                let subject_t = match ann {
                    Some(a) => {
                        let want = erase_surface(a);
                        self.value_against(subject, &want, scope, span)?;
                        want
                    }
                    None => self.value(subject, scope, span)?,
                };
                let PreType::Pair(lt, rt) = subject_t else {
                    return Err(
                        self.err(span, format!("splitting a non-pair value ({subject_t})"))
                    );
                };
                let sl = scope.insert(left.clone(), *lt);
                let sr = scope.insert(right.clone(), *rt);
                let out = self.term(body, scope)?;
                restore(scope, right, sr);
                restore(scope, left, sl);
                Ok(out)
            }
            IrTermKind::Case {
                subject,
                left_var,
                left_ann,
                left_body,
                right_var,
                right_ann,
                right_body,
            } => {
                let subject_t = match (&left_ann, &right_ann) {
                    (Some(l), Some(r)) => {
                        let want =
                            PreType::Sum(Box::new(erase_surface(l)), Box::new(erase_surface(r)));
                        self.value_against(subject, &want, scope, span)?;
                        want
                    }
                    _ => self.value(subject, scope, span)?,
                };
                let PreType::Sum(lt, rt) = subject_t else {
                    return Err(self.err(span, format!("case on a non-sum value ({subject_t})")));
                };
                let sl = scope.insert(left_var.clone(), *lt);
                let left_t = self.term(left_body, scope)?;
                restore(scope, left_var, sl);
                let sr = scope.insert(right_var.clone(), *rt);
                let right_t = self.term(right_body, scope)?;
                restore(scope, right_var, sr);
                if !compatible(&left_t, &right_t) {
                    return Err(self.err(
                        span,
                        format!("case arms disagree: {left_t} vs {right_t}"),
                    ));
                }
                Ok(left_t)
            }
            IrTermKind::If {
                cond,
                then_body,
                else_body,
            } => {
                let ct = self.value(cond, scope, span)?;
                if !compatible(&ct, &PreType::Base(BaseType::Bool)) {
                    return Err(self.err(span, format!("if condition must be Bool, found {ct}")));
                }
                let tt = self.term(then_body, scope)?;
                let et = self.term(else_body, scope)?;
                if !compatible(&tt, &et) {
                    return Err(self.err(span, format!("if branches disagree: {tt} vs {et}")));
                }
                Ok(tt)
            }
            IrTermKind::App {
                callee,
                args,
                fn_ty,
            } => match callee {
                Callee::Def(name) => {
                    let Some((params, ret)) = self.tables.defs.get(name.as_str()) else {
                        return Err(self.err(span, format!("unknown definition {name}")));
                    };
                    if params.len() != args.len() {
                        return Err(self.err(
                            span,
                            format!(
                                "{name} takes {} arguments, {} given",
                                params.len(),
                                args.len()
                            ),
                        ));
                    }
                    let param_pres: Vec<PreType> =
                        params.iter().map(|(_, t)| erase(t)).collect();
                    for (a, want) in args.iter_mut().zip(&param_pres) {
                        self.value_against(a, want, scope, span)?;
                    }
                    Ok(erase(ret))
                }
                Callee::Val(head) => {
                    let head_t = self.value(head, scope, span)?;
                    let PreType::Fun(annot) = head_t else {
                        return Err(
                            self.err(span, format!("applying a non-function ({head_t})"))
                        );
                    };
                    let UsageType::Fun { params, ret, .. } = &annot else {
                        unreachable!()
                    };
                    if params.len() != args.len() {
                        return Err(self.err(span, "function arity mismatch".to_string()));
                    }
                    for (a, want) in args.iter_mut().zip(params) {
                        self.value_against(a, &erase(want), scope, span)?;
                    }
                    let out = erase(ret);
                    *fn_ty = Some(annot);
                    Ok(out)
                }
            },
            IrTermKind::Builtin { name, args } => {
                let (params, ret) =
                    builtin_signature(name).expect("builtin table consulted at IR conversion");
                if params.len() != args.len() {
                    return Err(self.err(
                        span,
                        format!("{name} takes {} arguments, {} given", params.len(), args.len()),
                    ));
                }
                for (a, want) in args.iter_mut().zip(&params) {
                    self.value_against(a, &PreType::Base(*want), scope, span)?;
                }
                Ok(PreType::Base(ret))
            }
            IrTermKind::BinOp { op, lhs, rhs } => {
                self.value_against(lhs, &PreType::Base(BaseType::Int), scope, span)?;
                self.value_against(rhs, &PreType::Base(BaseType::Int), scope, span)?;
                Ok(PreType::Base(match op {
                    BinOp::Less => BaseType::Bool,
                    _ => BaseType::Int,
                }))
            }
            IrTermKind::Spawn(body) => {
                let bt = self.term(body, scope)?;
                if !compatible(&bt, &PreType::Base(BaseType::Unit)) {
                    return Err(
                        self.err(span, format!("spawned process must have type Unit, found {bt}"))
                    );
                }
                Ok(PreType::Base(BaseType::Unit))
            }
            IrTermKind::New { iface } => {
                if !self.tables.interfaces.contains_key(iface.as_str()) {
                    return Err(self.err(span, format!("unknown interface {iface}")));
                }
                Ok(PreType::Mb(iface.clone()))
            }
            IrTermKind::Send {
                target,
                tag,
                args,
                iface,
            } => {
                let tt = self.value(target, scope, span)?;
                let PreType::Mb(i) = tt else {
                    return Err(self.err(span, format!("sending on a non-mailbox ({tt})")));
                };
                let payloads = self.payloads(&i, tag, span)?;
                if payloads.len() != args.len() {
                    return Err(self.err(
                        span,
                        format!(
                            "tag {tag} carries {} payloads, {} given",
                            payloads.len(),
                            args.len()
                        ),
                    ));
                }
                for (a, want) in args.iter_mut().zip(&payloads) {
                    self.value_against(a, &erase(want), scope, span)?;
                }
                *iface = Some(i);
                Ok(PreType::Base(BaseType::Unit))
            }
            IrTermKind::Guard {
                subject,
                clauses,
                iface,
                ..
            } => {
                let st = self.value(subject, scope, span)?;
                let PreType::Mb(i) = st else {
                    return Err(self.err(span, format!("guarding a non-mailbox ({st})")));
                };
                let mut result: Option<PreType> = None;
                for c in clauses.iter_mut() {
                    let clause_t = match &mut c.kind {
                        IrClauseKind::Receive {
                            tag,
                            params,
                            rebind,
                            body,
                        } => {
                            let payloads = self.payloads(&i, tag, c.span)?;
                            if payloads.len() != params.len() {
                                return Err(self.err(
                                    c.span,
                                    format!(
                                        "tag {tag} carries {} payloads, {} bound",
                                        payloads.len(),
                                        params.len()
                                    ),
                                ));
                            }
                            let mut saved: Vec<(String, Option<PreType>)> = Vec::new();
                            for (x, pt) in params.iter().zip(&payloads) {
                                saved.push((x.clone(), scope.insert(x.clone(), erase(pt))));
                            }
                            saved.push((
                                rebind.clone(),
                                scope.insert(rebind.clone(), PreType::Mb(i.clone())),
                            ));
                            let out = self.term(body, scope);
                            for (x, old) in saved.into_iter().rev() {
                                restore(scope, &x, old);
                            }
                            out?
                        }
                        IrClauseKind::Free { body } => self.term(body, scope)?,
                        IrClauseKind::Fail => continue,
                    };
                    match &result {
                        None => result = Some(clause_t),
                        Some(prev) => {
                            if !compatible(prev, &clause_t) {
                                return Err(self.err(
                                    c.span,
                                    format!("guard clauses disagree: {prev} vs {clause_t}"),
                                ));
                            }
                        }
                    }
                }
                *iface = Some(i);
                // a fail-only guard can take any type
                Ok(result.unwrap_or(PreType::Any))
            }
        }
    }
}

fn restore(scope: &mut Scope, key: &str, old: Option<PreType>) {
    match old {
        Some(v) => {
            scope.insert(key.to_string(), v);
        }
        None => {
            scope.shift_remove(key);
        }
    }
}

/// Run the contextual pass over a program, annotating sends, guards, and
/// function applications in place.
pub fn pre_type(p: &mut IrProgram, tables: &ProgramTables) -> Result<(), Diagnostic> {
    let pre = Pre { tables };
    // interface payload types must themselves be well-formed
    for i in &p.interfaces {
        for (_, payloads) in &i.messages {
            for t in payloads {
                check_surface_type(t, tables, i.span)?;
            }
        }
    }
    let defs: Vec<(String, Vec<(String, SurfaceType)>, SurfaceType, Span)> = p
        .defs
        .iter()
        .map(|d| (d.name.clone(), d.params.clone(), d.ret.clone(), d.span))
        .collect();
    for (idx, (name, params, ret, dspan)) in defs.iter().enumerate() {
        for (_, t) in params {
            check_surface_type(t, tables, *dspan)?;
        }
        check_surface_type(ret, tables, *dspan)?;
        let mut scope: Scope = params
            .iter()
            .map(|(x, t)| (x.clone(), erase_surface(t)))
            .collect();
        let found = pre.term(&mut p.defs[idx].body, &mut scope)?;
        let want = erase_surface(ret);
        if !compatible(&found, &want) {
            return Err(Diagnostic::error(
                Phase::Pretype,
                format!("body of {name} has pre-type {found}, annotation says {want}"),
            )
            .at(*dspan));
        }
    }
    if let Some(body) = &mut p.body {
        let found = pre.term(body, &mut Scope::new())?;
        if !compatible(&found, &PreType::Base(BaseType::Unit)) {
            return Err(Diagnostic::error(
                Phase::Pretype,
                format!("program body must have type Unit, found {found}"),
            )
            .at(body.span));
        }
    }
    Ok(())
}

fn check_surface_type(
    t: &SurfaceType,
    tables: &ProgramTables,
    span: Span,
) -> Result<(), Diagnostic> {
    match t {
        SurfaceType::Base(_) => Ok(()),
        SurfaceType::MbSend { iface, .. } | SurfaceType::MbRecv { iface, .. } => {
            if tables.interfaces.contains_key(iface.as_str()) {
                Ok(())
            } else {
                Err(Diagnostic::error(
                    Phase::Pretype,
                    format!("unknown interface {iface}"),
                )
                .at(span))
            }
        }
        SurfaceType::Pair(a, b) | SurfaceType::Sum(a, b) => {
            check_surface_type(a, tables, span)?;
            check_surface_type(b, tables, span)
        }
        SurfaceType::Fun { params, ret, .. } => {
            for p in params {
                check_surface_type(p, tables, span)?;
            }
            check_surface_type(ret, tables, span)
        }
    }
}
