//! Backwards-bidirectional constraint generation. Checking judgements
//! produce an inferred environment and pattern-inclusion constraints;
//! synthesis covers the forms whose type is determined by the program
//! tables.

use indexmap::IndexMap;

use crate::diag::{Diagnostic, Phase};
use crate::patterns::{residual, Capability, Pattern};
use crate::span::Span;
use crate::syntax::{
    builtin_signature, BaseType, BinOp, Callee, IrClauseKind, IrProgram, IrTerm, IrTermKind,
    IrValue,
};
use crate::types::{from_surface, NullableEnv, TypeEnv, Usage, UsageType};

use super::{
    env_combine_n, env_join_n, env_lookup_check, env_merge_n, subty_constr, unr_constr,
    ConstraintSet, GenCtx, Mode, Origin, ProgramTables,
};

/// Result of checking a whole program.
#[derive(Debug)]
pub struct CheckOutput {
    pub constraints: ConstraintSet,
    /// Inferred environment of each definition body (before parameter
    /// removal), for diagnostics and tests.
    pub def_envs: IndexMap<String, TypeEnv>,
    pub var_origins: IndexMap<u32, Origin>,
    pub next_var: u32,
}

/// Generate constraints for every definition and the program body.
pub fn check_program(p: &IrProgram, tables: &ProgramTables) -> Result<CheckOutput, Diagnostic> {
    let mut ctx = GenCtx::new(tables, p.next_pattern_var);
    let mut def_envs = IndexMap::new();

    for d in &p.defs {
        let ret = from_surface(&d.ret);
        let env = check(&mut ctx, &d.body, &ret)?;
        let env = match env {
            NullableEnv::Env(e) => e,
            NullableEnv::Top => TypeEnv::new(),
        };
        let origin = Origin::new(d.span, "def");
        for (x, t) in &d.params {
            env_lookup_check(&mut ctx, &env, x, &from_surface(t), &origin)
                .map_err(|diag| in_def(diag, &d.name))?;
        }
        let mut leftover = env.clone();
        for (x, _) in &d.params {
            leftover.shift_remove(x);
        }
        if !leftover.is_empty() {
            let names: Vec<&str> = leftover.keys().map(|s| s.as_str()).collect();
            return Err(Diagnostic::error(
                Phase::Constraints,
                format!(
                    "definition {} leaves free variables {}",
                    d.name,
                    names.join(", ")
                ),
            )
            .at(d.span)
            .with_rule("def"));
        }
        def_envs.insert(d.name.clone(), env);
    }

    if let Some(body) = &p.body {
        let env = check(&mut ctx, body, &UsageType::UNIT)?;
        if let NullableEnv::Env(e) = &env {
            if !e.is_empty() {
                let names: Vec<&str> = e.keys().map(|s| s.as_str()).collect();
                return Err(Diagnostic::error(
                    Phase::Constraints,
                    format!("program body leaves free variables {}", names.join(", ")),
                )
                .at(body.span)
                .with_rule("program"));
            }
        }
    }

    Ok(CheckOutput {
        constraints: ctx.constraints,
        def_envs,
        var_origins: ctx.var_origins,
        next_var: ctx.next_var,
    })
}

fn in_def(d: Diagnostic, name: &str) -> Diagnostic {
    Diagnostic {
        message: format!("{} (in definition {name})", d.message),
        ..d
    }
}

fn base_of_value(v: &IrValue) -> Option<BaseType> {
    match v {
        IrValue::Unit => Some(BaseType::Unit),
        IrValue::Int(_) => Some(BaseType::Int),
        IrValue::Bool(_) => Some(BaseType::Bool),
        IrValue::Str(_) => Some(BaseType::String),
        _ => None,
    }
}

/// Check a value against a type, producing the inferred environment.
fn check_value(
    ctx: &mut GenCtx,
    v: &IrValue,
    expected: &UsageType,
    span: Span,
) -> Result<TypeEnv, Diagnostic> {
    match v {
        IrValue::Var(x) => {
            let mut env = TypeEnv::new();
            env.insert(x.clone(), expected.clone());
            Ok(env)
        }
        IrValue::Unit | IrValue::Int(_) | IrValue::Bool(_) | IrValue::Str(_) => {
            let found = UsageType::Base(base_of_value(v).unwrap());
            let origin = Origin::new(span, "const");
            subty_constr(ctx, &found, expected, &origin)?;
            Ok(TypeEnv::new())
        }
        IrValue::Pair(a, b) => {
            let UsageType::Pair(ta, tb) = expected else {
                return Err(Diagnostic::error(
                    Phase::Constraints,
                    format!("pair value where {expected} is required"),
                )
                .at(span)
                .with_rule("pair"));
            };
            let ea = check_value(ctx, a, ta, span)?;
            let eb = check_value(ctx, b, tb, span)?;
            let origin = Origin::new(span, "pair");
            super::env_combine(ctx, &ea, &eb, &origin)
        }
        IrValue::Inl(inner) => {
            let UsageType::Sum(ta, _) = expected else {
                return Err(Diagnostic::error(
                    Phase::Constraints,
                    format!("inl value where {expected} is required"),
                )
                .at(span)
                .with_rule("inl"));
            };
            check_value(ctx, inner, ta, span)
        }
        IrValue::Inr(inner) => {
            let UsageType::Sum(_, tb) = expected else {
                return Err(Diagnostic::error(
                    Phase::Constraints,
                    format!("inr value where {expected} is required"),
                )
                .at(span)
                .with_rule("inr"));
            };
            check_value(ctx, inner, tb, span)
        }
        IrValue::Lambda { .. } => {
            let (found, env) = synth_lambda(ctx, v, span)?;
            let origin = Origin::new(span, "sub");
            subty_constr(ctx, &found, expected, &origin)?;
            Ok(env)
        }
        IrValue::Name(_) => unreachable!("runtime name during typechecking"),
    }
}

fn synth_lambda(
    ctx: &mut GenCtx,
    v: &IrValue,
    span: Span,
) -> Result<(UsageType, TypeEnv), Diagnostic> {
    let IrValue::Lambda {
        linear,
        params,
        ret,
        body,
    } = v
    else {
        unreachable!()
    };
    let rule: &'static str = if *linear { "lambda-lin" } else { "lambda-unr" };
    let origin = Origin::new(span, rule);
    let ret_ty = from_surface(ret);
    let env = check(ctx, body, &ret_ty)?;
    let mut env = match env {
        NullableEnv::Env(e) => e,
        NullableEnv::Top => TypeEnv::new(),
    };
    for (x, t) in params {
        env_lookup_check(ctx, &env, x, &from_surface(t), &origin)?;
    }
    for (x, _) in params {
        env.shift_remove(x);
    }
    // the closure may capture only returnable values
    for (x, t) in &env {
        if !t.is_returnable() {
            return Err(Diagnostic::error(
                Phase::Constraints,
                format!("function captures {x} at second-class type {t}"),
            )
            .at(span)
            .with_rule(rule));
        }
    }
    if !*linear {
        for (_, t) in env.clone() {
            unr_constr(ctx, &t, &origin)?;
        }
    }
    let fn_ty = UsageType::Fun {
        linear: *linear,
        params: params.iter().map(|(_, t)| from_surface(t)).collect(),
        ret: Box::new(ret_ty),
    };
    Ok((fn_ty, env))
}

/// Synthesis: forms whose type comes from the tables or the construct
/// itself. Everything else must be checked.
fn synth(ctx: &mut GenCtx, t: &IrTerm) -> Result<(UsageType, NullableEnv), Diagnostic> {
    let span = t.span;
    match &t.kind {
        IrTermKind::Value(v) => match v {
            IrValue::Unit | IrValue::Int(_) | IrValue::Bool(_) | IrValue::Str(_) => Ok((
                UsageType::Base(base_of_value(v).unwrap()),
                NullableEnv::empty(),
            )),
            IrValue::Lambda { .. } => {
                let (ty, env) = synth_lambda(ctx, v, span)?;
                Ok((ty, NullableEnv::Env(env)))
            }
            _ => Err(Diagnostic::error(
                Phase::Constraints,
                "cannot synthesise a type here; add a let annotation".to_string(),
            )
            .at(span)
            .with_rule("synth")),
        },
        IrTermKind::New { iface } => Ok((
            UsageType::Mailbox {
                cap: Capability::Receive,
                pattern: Pattern::One,
                iface: iface.clone(),
                usage: Usage::Returnable,
            },
            NullableEnv::empty(),
        )),
        IrTermKind::Spawn(body) => {
            let env = check(ctx, body, &UsageType::UNIT)?;
            let masked = match env {
                NullableEnv::Top => NullableEnv::Top,
                NullableEnv::Env(e) => NullableEnv::Env(
                    e.into_iter().map(|(x, t)| (x, t.make_usable())).collect(),
                ),
            };
            Ok((UsageType::UNIT, masked))
        }
        IrTermKind::Send {
            target,
            tag,
            args,
            iface,
        } => {
            let iface = iface.as_deref().expect("send annotated by pre-typing");
            let origin = Origin::new(span, "send");
            let payloads = ctx
                .tables
                .payloads(iface, tag)
                .expect("payloads resolved by pre-typing")
                .clone();
            let target_ty = UsageType::Mailbox {
                cap: Capability::Send,
                pattern: Pattern::tag(tag.as_str()),
                iface: iface.to_string(),
                usage: Usage::SecondClass,
            };
            let mut env = check_value(ctx, target, &target_ty, span)?;
            for (a, pt) in args.iter().zip(&payloads) {
                let arg_env = check_value(ctx, a, &pt.make_usable(), span)?;
                env = super::env_combine(ctx, &env, &arg_env, &origin)?;
            }
            Ok((UsageType::UNIT, NullableEnv::Env(env)))
        }
        IrTermKind::App {
            callee,
            args,
            fn_ty,
        } => {
            let origin = Origin::new(span, "call");
            let (params, ret, mut env): (Vec<UsageType>, UsageType, TypeEnv) = match callee {
                Callee::Def(name) => {
                    let (ps, ret) = ctx
                        .tables
                        .defs
                        .get(name.as_str())
                        .expect("definitions resolved by pre-typing")
                        .clone();
                    (
                        ps.into_iter().map(|(_, t)| t).collect(),
                        ret,
                        TypeEnv::new(),
                    )
                }
                Callee::Val(head) => {
                    let annot = fn_ty.clone().expect("application annotated by pre-typing");
                    let UsageType::Fun { params, ret, .. } = &annot else {
                        unreachable!()
                    };
                    let (params, ret) = (params.clone(), (**ret).clone());
                    let env = check_value(ctx, head, &annot, span)?;
                    (params, ret, env)
                }
            };
            for (a, pt) in args.iter().zip(&params) {
                let arg_env = check_value(ctx, a, pt, span)?;
                env = super::env_combine(ctx, &env, &arg_env, &origin)?;
            }
            Ok((ret, NullableEnv::Env(env)))
        }
        IrTermKind::Builtin { name, args } => {
            let origin = Origin::new(span, "builtin");
            let (params, ret) = builtin_signature(name).expect("builtin names fixed");
            let mut env = TypeEnv::new();
            for (a, bt) in args.iter().zip(&params) {
                let arg_env = check_value(ctx, a, &UsageType::Base(*bt), span)?;
                env = super::env_combine(ctx, &env, &arg_env, &origin)?;
            }
            Ok((UsageType::Base(ret), NullableEnv::Env(env)))
        }
        IrTermKind::BinOp { op, lhs, rhs } => {
            let origin = Origin::new(span, "builtin");
            let le = check_value(ctx, lhs, &UsageType::Base(BaseType::Int), span)?;
            let re = check_value(ctx, rhs, &UsageType::Base(BaseType::Int), span)?;
            let env = super::env_combine(ctx, &le, &re, &origin)?;
            let ret = match op {
                BinOp::Less => BaseType::Bool,
                _ => BaseType::Int,
            };
            Ok((UsageType::Base(ret), NullableEnv::Env(env)))
        }
        _ => Err(Diagnostic::error(
            Phase::Constraints,
            "cannot synthesise a type here; add a let annotation".to_string(),
        )
        .at(span)
        .with_rule("synth")),
    }
}

/// Check a term against a type, producing the inferred nullable
/// environment.
pub(super) fn check(
    ctx: &mut GenCtx,
    t: &IrTerm,
    expected: &UsageType,
) -> Result<NullableEnv, Diagnostic> {
    let span = t.span;
    match &t.kind {
        IrTermKind::Value(IrValue::Var(x)) => {
            Ok(NullableEnv::singleton(x, expected.clone()))
        }
        IrTermKind::Value(v @ (IrValue::Pair(..) | IrValue::Inl(_) | IrValue::Inr(_))) => {
            Ok(NullableEnv::Env(check_value(ctx, v, expected, span)?))
        }
        IrTermKind::Let {
            var,
            ann,
            subject,
            body,
        } => check_let(ctx, span, var, ann.as_ref(), subject, body, expected),
        IrTermKind::LetPair {
            left,
            right,
            ann,
            subject,
            body,
        } => check_let_pair(ctx, span, left, right, ann.as_ref(), subject, body, expected),
        IrTermKind::Case {
            subject,
            left_var,
            left_ann,
            left_body,
            right_var,
            right_ann,
            right_body,
        } => {
            let origin = Origin::new(span, "case");
            let lenv = check(ctx, left_body, expected)?;
            let renv = check(ctx, right_body, expected)?;
            let lt = branch_binder_type(ctx, &lenv, left_var, left_ann.as_ref(), span, "case")?;
            let rt = branch_binder_type(ctx, &renv, right_var, right_ann.as_ref(), span, "case")?;
            let lenv = drop_binder(ctx, lenv, left_var, &lt, &origin)?;
            let renv = drop_binder(ctx, renv, right_var, &rt, &origin)?;
            let merged = env_merge_n(ctx, &lenv, &renv, &origin)?;
            let subject_env = check_value(
                ctx,
                subject,
                &UsageType::Sum(Box::new(lt), Box::new(rt)),
                span,
            )?;
            env_combine_n(ctx, &NullableEnv::Env(subject_env), &merged, &origin)
        }
        IrTermKind::If {
            cond,
            then_body,
            else_body,
        } => {
            let origin = Origin::new(span, "if");
            let cond_env = check_value(ctx, cond, &UsageType::Base(BaseType::Bool), span)?;
            let tenv = check(ctx, then_body, expected)?;
            let eenv = check(ctx, else_body, expected)?;
            let merged = env_merge_n(ctx, &tenv, &eenv, &origin)?;
            env_combine_n(ctx, &NullableEnv::Env(cond_env), &merged, &origin)
        }
        IrTermKind::Guard {
            subject,
            pattern,
            clauses,
            iface,
        } => {
            let origin = Origin::new(span, "guard");
            if !pattern.is_closed() {
                return Err(Diagnostic::error(
                    Phase::Constraints,
                    "guard patterns must not contain pattern variables".to_string(),
                )
                .at(span)
                .with_rule("guard"));
            }
            let iface = iface.as_deref().expect("guard annotated by pre-typing");
            let (clause_env, literal_sum) =
                check_guards(ctx, pattern, clauses, expected, iface, span)?;
            let subject_ty = UsageType::Mailbox {
                cap: Capability::Receive,
                pattern: literal_sum.clone(),
                iface: iface.to_string(),
                usage: Usage::Returnable,
            };
            let subject_env = check_value(ctx, subject, &subject_ty, span)?;
            let out = env_combine_n(ctx, &clause_env, &NullableEnv::Env(subject_env), &origin)?;
            ctx.constraints
                .push(pattern.clone(), literal_sum, origin.clone());
            Ok(out)
        }
        // everything else synthesises and flows through subsumption
        _ => {
            let (found, env) = synth(ctx, t)?;
            let origin = Origin::new(span, "sub");
            subty_constr(ctx, &found, expected, &origin)?;
            Ok(env)
        }
    }
}

fn check_let(
    ctx: &mut GenCtx,
    span: Span,
    var: &str,
    ann: Option<&crate::syntax::SurfaceType>,
    subject: &IrTerm,
    body: &IrTerm,
    expected: &UsageType,
) -> Result<NullableEnv, Diagnostic> {
    if let Some(ann) = ann {
        // annotated let: the annotation, lifted to returnable, is the
        // contract between subject and body
        let origin = Origin::new(span, "let");
        let bind_ty = from_surface(ann).make_returnable();
        let subj_env = check(ctx, subject, &bind_ty)?;
        let body_env = check(ctx, body, expected)?;
        let body_env = match body_env {
            NullableEnv::Top => return env_join_n(ctx, &subj_env, &NullableEnv::Top, &origin),
            NullableEnv::Env(e) => e,
        };
        env_lookup_check(ctx, &body_env, var, &bind_ty, &origin)?;
        let mut rest = body_env;
        rest.shift_remove(var);
        env_join_n(ctx, &subj_env, &NullableEnv::Env(rest), &origin)
    } else {
        let body_env = check(ctx, body, expected)?;
        match body_env {
            NullableEnv::Top => {
                // the continuation fails unconditionally; the subject still
                // runs first
                let origin = Origin::new(span, "let-infer");
                let (_, subj_env) = synth(ctx, subject).map_err(|d| annotate_hint(d))?;
                env_join_n(ctx, &subj_env, &NullableEnv::Top, &origin)
            }
            NullableEnv::Env(mut env) => {
                if let Some(inferred) = env.get(var).cloned() {
                    // the binder's type is read off the continuation,
                    // lifted to returnable for the frame return
                    let origin = Origin::new(span, "let-infer");
                    let bind_ty = inferred.make_returnable();
                    let subj_env = check(ctx, subject, &bind_ty)?;
                    env.shift_remove(var);
                    env_join_n(ctx, &subj_env, &NullableEnv::Env(env), &origin)
                } else {
                    // unused binder: the subject must synthesise a
                    // returnable, discardable type
                    let origin = Origin::new(span, "let-drop");
                    let (ty, subj_env) = synth(ctx, subject).map_err(annotate_hint)?;
                    if !ty.is_returnable() {
                        return Err(Diagnostic::error(
                            Phase::Constraints,
                            format!("cannot bind a value of second-class type {ty}"),
                        )
                        .at(span)
                        .with_rule("let-drop"));
                    }
                    unr_constr(ctx, &ty, &origin)?;
                    env_join_n(ctx, &subj_env, &NullableEnv::Env(env), &origin)
                }
            }
        }
    }
}

fn annotate_hint(d: Diagnostic) -> Diagnostic {
    Diagnostic {
        message: format!("{}; the bound variable is unused", d.message),
        ..d
    }
}

#[allow(clippy::too_many_arguments)]
fn check_let_pair(
    ctx: &mut GenCtx,
    span: Span,
    left: &str,
    right: &str,
    ann: Option<&crate::syntax::SurfaceType>,
    subject: &IrValue,
    body: &IrTerm,
    expected: &UsageType,
) -> Result<NullableEnv, Diagnostic> {
    let origin = Origin::new(span, "let-pair");
    let body_env = check(ctx, body, expected)?;
    let body_env = match body_env {
        NullableEnv::Top => {
            return if let Some(ann) = ann {
                let pair_ty = from_surface(ann).make_returnable();
                let subj_env = check_value(ctx, subject, &pair_ty, span)?;
                Ok(NullableEnv::Env(subj_env))
            } else {
                Err(Diagnostic::error(
                    Phase::Constraints,
                    "cannot infer the pair type; annotate the binding".to_string(),
                )
                .at(span)
                .with_rule("let-pair"))
            };
        }
        NullableEnv::Env(e) => e,
    };
    let (lt, rt) = match ann {
        Some(crate::syntax::SurfaceType::Pair(a, b)) => (
            from_surface(a).make_returnable(),
            from_surface(b).make_returnable(),
        ),
        Some(other) => {
            return Err(Diagnostic::error(
                Phase::Constraints,
                format!("pair binding annotated with non-pair type {other:?}"),
            )
            .at(span)
            .with_rule("let-pair"))
        }
        None => {
            let lt = body_env.get(left).cloned().ok_or_else(|| {
                Diagnostic::error(
                    Phase::Constraints,
                    format!("cannot infer a type for unused binder {left}; annotate"),
                )
                .at(span)
                .with_rule("let-pair")
            })?;
            let rt = body_env.get(right).cloned().ok_or_else(|| {
                Diagnostic::error(
                    Phase::Constraints,
                    format!("cannot infer a type for unused binder {right}; annotate"),
                )
                .at(span)
                .with_rule("let-pair")
            })?;
            (lt.make_returnable(), rt.make_returnable())
        }
    };
    let mut rest = body_env;
    env_lookup_check(ctx, &rest, left, &lt, &origin)?;
    env_lookup_check(ctx, &rest, right, &rt, &origin)?;
    rest.shift_remove(left);
    rest.shift_remove(right);
    let pair_ty = UsageType::Pair(Box::new(lt), Box::new(rt));
    let subj_env = check_value(ctx, subject, &pair_ty, span)?;
    let combined = super::env_combine(ctx, &subj_env, &rest, &origin)?;
    Ok(NullableEnv::Env(combined))
}

/// Determine the binder type of a case arm from its annotation or its use
/// in the arm's environment.
fn branch_binder_type(
    ctx: &mut GenCtx,
    env: &NullableEnv,
    var: &str,
    ann: Option<&crate::syntax::SurfaceType>,
    span: Span,
    rule: &'static str,
) -> Result<UsageType, Diagnostic> {
    let _ = ctx;
    if let Some(a) = ann {
        return Ok(from_surface(a).make_returnable());
    }
    match env {
        NullableEnv::Env(e) => match e.get(var) {
            Some(t) => Ok(t.make_returnable()),
            None => Err(Diagnostic::error(
                Phase::Constraints,
                format!("cannot infer a type for unused case binder {var}; annotate"),
            )
            .at(span)
            .with_rule(rule)),
        },
        NullableEnv::Top => Err(Diagnostic::error(
            Phase::Constraints,
            format!("cannot infer a type for case binder {var} in a failing arm; annotate"),
        )
        .at(span)
        .with_rule(rule)),
    }
}

fn drop_binder(
    ctx: &mut GenCtx,
    env: NullableEnv,
    var: &str,
    expected: &UsageType,
    origin: &Origin,
) -> Result<NullableEnv, Diagnostic> {
    match env {
        NullableEnv::Top => Ok(NullableEnv::Top),
        NullableEnv::Env(mut e) => {
            env_lookup_check(ctx, &e, var, expected, origin)?;
            e.shift_remove(var);
            Ok(NullableEnv::Env(e))
        }
    }
}

/// Check a guard's clause list: produces the merged clause environment and
/// the pattern-normal-form disjunction of per-clause literals.
fn check_guards(
    ctx: &mut GenCtx,
    guard_pattern: &Pattern,
    clauses: &[crate::syntax::IrClause],
    expected: &UsageType,
    iface: &str,
    span: Span,
) -> Result<(NullableEnv, Pattern), Diagnostic> {
    let mut merged: Option<NullableEnv> = None;
    let mut literal_sum = Pattern::Zero;

    for c in clauses {
        let (env, literal) = match &c.kind {
            IrClauseKind::Fail => (NullableEnv::Top, Pattern::Zero),
            IrClauseKind::Free { body } => {
                let env = check(ctx, body, expected)?;
                (env, Pattern::One)
            }
            IrClauseKind::Receive {
                tag,
                params,
                rebind,
                body,
            } => {
                let origin = Origin::new(c.span, "guard-recv");
                let after = residual(guard_pattern, tag).expect("guard patterns are closed");
                let literal = Pattern::dot(Pattern::tag(tag.as_str()), after.clone());
                let env = check(ctx, body, expected)?;
                let NullableEnv::Env(full) = env else {
                    // a clause that fails unconditionally constrains nothing
                    merged = Some(match merged {
                        None => NullableEnv::Top,
                        Some(m) => env_merge_n(ctx, &m, &NullableEnv::Top, &origin)?,
                    });
                    literal_sum = Pattern::plus(literal_sum, literal);
                    continue;
                };
                let payloads = ctx
                    .tables
                    .payloads(iface, tag)
                    .expect("payloads resolved by pre-typing")
                    .clone();
                // the rebound mailbox must be used, at a returnable receive
                // type
                let Some(rebind_ty) = full.get(rebind) else {
                    return Err(Diagnostic::error(
                        Phase::Constraints,
                        format!("receive clause must use the rebound mailbox {rebind}"),
                    )
                    .at(c.span)
                    .with_rule("guard-recv"));
                };
                let gamma = match rebind_ty {
                    UsageType::Mailbox {
                        cap: Capability::Receive,
                        pattern,
                        usage: Usage::Returnable,
                        ..
                    } => pattern.clone(),
                    other => {
                        return Err(Diagnostic::error(
                            Phase::Constraints,
                            format!(
                                "rebound mailbox {rebind} is used at {other}, expected a \
                                 returnable receive capability"
                            ),
                        )
                        .at(c.span)
                        .with_rule("guard-recv"))
                    }
                };
                let mut without_rebind = full.clone();
                without_rebind.shift_remove(rebind);
                for (x, pt) in params.iter().zip(&payloads) {
                    env_lookup_check(ctx, &without_rebind, x, &pt.make_usable(), &origin)?;
                }
                let mut residual_env = without_rebind;
                for x in params {
                    residual_env.shift_remove(x);
                }
                aliasing_check(ctx, &payloads, &residual_env, c.span)?;
                ctx.constraints.push(after, gamma, origin.clone());
                (NullableEnv::Env(residual_env), literal)
            }
        };
        literal_sum = Pattern::plus(literal_sum, literal);
        merged = Some(match merged {
            None => env,
            Some(m) => {
                let origin = Origin::new(span, "guard-merge");
                env_merge_n(ctx, &m, &env, &origin)?
            }
        });
    }

    let merged = merged.ok_or_else(|| {
        Diagnostic::error(Phase::Constraints, "guard has no clauses".to_string())
            .at(span)
            .with_rule("guard")
    })?;
    Ok((merged, literal_sum))
}

/// The receive-clause aliasing check: in strict mode either all payloads or
/// the whole residual environment must be base-typed; in interface mode the
/// payload interfaces must be disjoint from the residual environment's.
fn aliasing_check(
    ctx: &GenCtx,
    payloads: &[UsageType],
    residual_env: &TypeEnv,
    span: Span,
) -> Result<(), Diagnostic> {
    match ctx.tables.mode {
        Mode::Strict => {
            let payloads_base = payloads.iter().all(UsageType::is_base);
            let env_base = residual_env.values().all(UsageType::is_base);
            if payloads_base || env_base {
                Ok(())
            } else {
                Err(Diagnostic::error(
                    Phase::Constraints,
                    "strict mode: a receive clause may bind mailbox payloads only when \
                     no other mailbox is free in its body"
                        .to_string(),
                )
                .at(span)
                .with_rule("guard-recv-alias"))
            }
        }
        Mode::Interface => {
            let mut payload_ifaces = std::collections::BTreeSet::new();
            for p in payloads {
                payload_ifaces.extend(p.interfaces());
            }
            let mut env_ifaces = std::collections::BTreeSet::new();
            for t in residual_env.values() {
                env_ifaces.extend(t.interfaces());
            }
            let clash: Vec<&String> = payload_ifaces.intersection(&env_ifaces).collect();
            if clash.is_empty() {
                Ok(())
            } else {
                let names: Vec<&str> = clash.iter().map(|s| s.as_str()).collect();
                Err(Diagnostic::error(
                    Phase::Constraints,
                    format!(
                        "receive payloads and free variables share interfaces {}; \
                         the bound names could alias",
                        names.join(", ")
                    ),
                )
                .at(span)
                .with_rule("guard-recv-alias"))
            }
        }
    }
}

// a narrow re-export so unit tests can drive single judgements
#[cfg(test)]
pub(super) fn check_term_for_tests(
    ctx: &mut GenCtx,
    t: &IrTerm,
    expected: &UsageType,
) -> Result<NullableEnv, Diagnostic> {
    check(ctx, t, expected)
}

#[cfg(test)]
mod tests {
    use super::super::tests_support::*;
    use super::*;
    use crate::patterns::Capability;
    use crate::span::Span;
    use crate::types::Usage;
    use crate::patterns::includes;

    #[test]
    fn variable_rule_yields_singleton() {
        let (tables, ir) = setup(
            "interface A { M() } def f(x: A?): Unit { free(x) }",
            Mode::Strict,
        );
        let mut ctx = GenCtx::new(&tables, ir.next_pattern_var);
        let term = IrTerm::new(
            IrTermKind::Value(IrValue::Var("y".into())),
            Span::new(1, 1),
        );
        let expected = UsageType::mailbox(
            Capability::Receive,
            Pattern::tag("M"),
            "A",
            Usage::Returnable,
        );
        let env = check_term_for_tests(&mut ctx, &term, &expected).unwrap();
        match env {
            NullableEnv::Env(e) => {
                assert_eq!(e.len(), 1);
                assert_eq!(e.get("y"), Some(&expected));
            }
            NullableEnv::Top => panic!("variable produced top"),
        }
        assert!(ctx.constraints.is_empty());
    }

    #[test]
    fn fail_guard_produces_top() {
        let (tables, ir) = setup(
            "interface A { M() } def f(x: A?): Unit { fail(x) }",
            Mode::Strict,
        );
        // the def body is guard x: 0 { fail }; checking it gives the
        // combination of top (clauses) with the subject env
        let out = check_program(&ir, &tables).unwrap();
        let env = &out.def_envs["f"];
        assert!(env.contains_key("x"));
        match env.get("x").unwrap() {
            UsageType::Mailbox {
                cap: Capability::Receive,
                pattern,
                usage: Usage::Returnable,
                ..
            } => assert_eq!(*pattern, Pattern::Zero),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spawn_masks_environment() {
        let src = r#"
interface A { M() }
def g(x: A?): Unit { free(x) }
def f(x: A?): Unit { spawn { g(x) } }
"#;
        let (tables, ir) = setup(src, Mode::Strict);
        let out = check_program(&ir, &tables).unwrap();
        let env = &out.def_envs["f"];
        match env.get("x").unwrap() {
            UsageType::Mailbox { usage, .. } => assert_eq!(*usage, Usage::SecondClass),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn send_infers_payload_uses() {
        // synth(f ! Put(5)) gives Unit with f at a second-class send type
        let src = r#"
interface Future { Put(Int) }
def f(fut: Future!): Unit { fut ! Put(5) }
"#;
        let (tables, ir) = setup(src, Mode::Strict);
        let out = check_program(&ir, &tables).unwrap();
        let env = &out.def_envs["f"];
        match env.get("fut").unwrap() {
            UsageType::Mailbox {
                cap: Capability::Send,
                pattern,
                usage: Usage::SecondClass,
                ..
            } => assert_eq!(*pattern, Pattern::tag("Put")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn guard_emits_inclusion_and_residual_constraints() {
        let src = r#"
interface C { Reply(Int) }
def await(self: C?(Reply)): Unit {
  guard self: Reply {
    receive Reply(r) from self2 ->
      free(self2);
      print(intToString(r))
  }
}
"#;
        let (tables, ir) = setup(src, Mode::Strict);
        let out = check_program(&ir, &tables).unwrap();
        // among the constraints: Reply <= Reply . 1 (guard annotation vs
        // clause literals) and 1 <= 1-ish residual bounds; all closed ones
        // must hold
        let mut saw_guard_inclusion = false;
        for c in out.constraints.iter() {
            if c.lhs.is_closed() && c.rhs.is_closed() {
                assert!(
                    includes(&c.lhs, &c.rhs).unwrap(),
                    "closed constraint failed: {}",
                    c.render()
                );
            }
            if c.origin.rule == "guard" {
                saw_guard_inclusion = true;
                assert_eq!(c.lhs, Pattern::tag("Reply"));
                // literal sum is Reply . (Reply/Reply) = Reply . 1 = Reply
                assert_eq!(c.rhs, Pattern::tag("Reply"));
            }
        }
        // the normalised literal equals the annotation here, so the guard
        // inclusion may be dropped as trivially reflexive
        let _ = saw_guard_inclusion;
    }

    #[test]
    fn unused_receive_capability_is_an_error() {
        let src = r#"
interface A { M() }
def f(x: A?): Unit { () }
"#;
        let (tables, ir) = setup(src, Mode::Strict);
        let err = check_program(&ir, &tables).unwrap_err();
        assert_eq!(err.rule.as_deref(), Some("def"));
    }

    #[test]
    fn receive_clause_must_use_rebound_mailbox() {
        let src = r#"
interface A { M() }
def f(x: A?): Unit {
  guard x: M {
    receive M() from y -> ()
  }
}
"#;
        let (tables, ir) = setup(src, Mode::Strict);
        let err = check_program(&ir, &tables).unwrap_err();
        assert_eq!(err.rule.as_deref(), Some("guard-recv"));
    }
}
