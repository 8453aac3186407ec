//! The algorithmic type system: contextual pre-typing, then co-contextual
//! constraint generation. Typechecking a program produces an inferred
//! environment per definition and a global set of pattern-inclusion
//! constraints for the solver.

mod gen;
mod pretype;

pub use gen::{check_program, CheckOutput};
pub use pretype::pre_type;

use indexmap::IndexMap;

use crate::diag::{Diagnostic, Phase};
use crate::patterns::{Capability, Pattern};
use crate::span::Span;
use crate::syntax::IrProgram;
use crate::types::{from_surface, NullableEnv, TypeEnv, Usage, UsageType};

/// Typechecking mode: `Strict` uses the base-type aliasing check in receive
/// clauses; `Interface` relaxes it to interface disjointness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Strict,
    Interface,
}

/// Where a constraint (or fresh pattern variable) came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Origin {
    pub span: Span,
    pub rule: &'static str,
}

impl Origin {
    pub fn new(span: Span, rule: &'static str) -> Self {
        Origin { span, rule }
    }
}

/// A pattern-inclusion constraint `lhs <= rhs` with provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub lhs: Pattern,
    pub rhs: Pattern,
    pub origin: Origin,
}

impl Constraint {
    pub fn render(&self) -> String {
        format!("{} ⊑ {}", self.lhs.render(), self.rhs.render())
    }
}

/// An insertion-ordered, deduplicated set of constraints.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    items: Vec<Constraint>,
    seen: std::collections::BTreeSet<(Pattern, Pattern)>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, lhs: Pattern, rhs: Pattern, origin: Origin) {
        // trivially true by reflexivity; keeps the set small
        if lhs == rhs {
            return;
        }
        if self.seen.insert((lhs.clone(), rhs.clone())) {
            self.items.push(Constraint { lhs, rhs, origin });
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// All pattern variables mentioned by any constraint.
    pub fn vars(&self) -> std::collections::BTreeSet<u32> {
        let mut acc = std::collections::BTreeSet::new();
        for c in &self.items {
            acc.extend(c.lhs.vars());
            acc.extend(c.rhs.vars());
        }
        acc
    }
}

/// Resolved program tables shared by pre-typing and constraint generation.
#[derive(Debug, Clone)]
pub struct ProgramTables {
    pub mode: Mode,
    /// interface name -> tag -> payload types
    pub interfaces: IndexMap<String, IndexMap<String, Vec<UsageType>>>,
    /// strict-mode global signature: tag -> (owning interface, payloads)
    pub signature: IndexMap<String, (String, Vec<UsageType>)>,
    /// definition name -> (parameters, return type)
    pub defs: IndexMap<String, (Vec<(String, UsageType)>, UsageType)>,
}

impl ProgramTables {
    pub fn build(p: &IrProgram, mode: Mode) -> Result<ProgramTables, Diagnostic> {
        let mut interfaces = IndexMap::new();
        let mut signature: IndexMap<String, (String, Vec<UsageType>)> = IndexMap::new();
        for i in &p.interfaces {
            let mut msgs = IndexMap::new();
            for (tag, payloads) in &i.messages {
                let tys: Vec<UsageType> = payloads.iter().map(from_surface).collect();
                if let Some((other, _)) = signature.get(tag) {
                    if mode == Mode::Strict {
                        return Err(Diagnostic::error(
                            Phase::Pretype,
                            format!(
                                "tag {tag} declared in both {other} and {}; strict mode \
                                 requires globally unique tags",
                                i.name
                            ),
                        )
                        .at(i.span));
                    }
                } else {
                    signature.insert(tag.clone(), (i.name.clone(), tys.clone()));
                }
                msgs.insert(tag.clone(), tys);
            }
            interfaces.insert(i.name.clone(), msgs);
        }
        let mut defs = IndexMap::new();
        for d in &p.defs {
            let params: Vec<(String, UsageType)> = d
                .params
                .iter()
                .map(|(x, t)| (x.clone(), from_surface(t)))
                .collect();
            defs.insert(d.name.clone(), (params, from_surface(&d.ret)));
        }
        Ok(ProgramTables {
            mode,
            interfaces,
            signature,
            defs,
        })
    }

    /// Payload types for a tag sent or received on a mailbox with the given
    /// interface.
    pub fn payloads(&self, iface: &str, tag: &str) -> Option<&Vec<UsageType>> {
        if let Some(msgs) = self.interfaces.get(iface) {
            if let Some(p) = msgs.get(tag) {
                return Some(p);
            }
        }
        if self.mode == Mode::Strict {
            // the base system uses one global signature
            return self.signature.get(tag).map(|(_, p)| p);
        }
        None
    }
}

/// Mutable state threaded through constraint generation.
pub struct GenCtx<'a> {
    pub tables: &'a ProgramTables,
    pub constraints: ConstraintSet,
    pub next_var: u32,
    pub var_origins: IndexMap<u32, Origin>,
}

impl<'a> GenCtx<'a> {
    pub fn new(tables: &'a ProgramTables, next_var: u32) -> Self {
        GenCtx {
            tables,
            constraints: ConstraintSet::new(),
            next_var,
            var_origins: IndexMap::new(),
        }
    }

    pub fn fresh_var(&mut self, origin: Origin) -> Pattern {
        let v = self.next_var;
        self.next_var += 1;
        self.var_origins.insert(v, origin);
        Pattern::Var(v)
    }

    fn err(&self, span: Span, rule: &'static str, msg: String) -> Diagnostic {
        Diagnostic::error(Phase::Constraints, msg)
            .at(span)
            .with_rule(rule)
    }
}

// ---------------------------------------------------------------------------
// Algorithmic type operations
// ---------------------------------------------------------------------------

/// Subtyping `sub <= sup`, emitting pattern constraints: contravariant for
/// send capabilities, covariant for receive.
pub fn subty_constr(
    ctx: &mut GenCtx,
    sub: &UsageType,
    sup: &UsageType,
    origin: &Origin,
) -> Result<(), Diagnostic> {
    match (sub, sup) {
        (UsageType::Base(a), UsageType::Base(b)) if a == b => Ok(()),
        (
            UsageType::Mailbox {
                cap: c1,
                pattern: p1,
                iface: i1,
                usage: u1,
            },
            UsageType::Mailbox {
                cap: c2,
                pattern: p2,
                iface: i2,
                usage: u2,
            },
        ) => {
            if !u1.subtype_of(*u2) {
                return Err(ctx.err(
                    origin.span,
                    origin.rule,
                    format!("a {u1} mailbox reference cannot be used where a {u2} one is required"),
                ));
            }
            if c1 != c2 {
                return Err(ctx.err(
                    origin.span,
                    origin.rule,
                    format!("capability mismatch: {c1} vs {c2}"),
                ));
            }
            if ctx.tables.mode == Mode::Interface && i1 != i2 {
                return Err(ctx.err(
                    origin.span,
                    origin.rule,
                    format!("interface mismatch: {i1} vs {i2}"),
                ));
            }
            match c1 {
                Capability::Send => {
                    ctx.constraints
                        .push(p2.clone(), p1.clone(), origin.clone());
                }
                Capability::Receive => {
                    ctx.constraints
                        .push(p1.clone(), p2.clone(), origin.clone());
                }
            }
            Ok(())
        }
        (UsageType::Pair(a1, b1), UsageType::Pair(a2, b2)) => {
            subty_constr(ctx, a1, a2, origin)?;
            subty_constr(ctx, b1, b2, origin)
        }
        (UsageType::Sum(a1, b1), UsageType::Sum(a2, b2)) => {
            subty_constr(ctx, a1, a2, origin)?;
            subty_constr(ctx, b1, b2, origin)
        }
        (
            UsageType::Fun {
                linear: l1,
                params: ps1,
                ret: r1,
            },
            UsageType::Fun {
                linear: l2,
                params: ps2,
                ret: r2,
            },
        ) => {
            // an unrestricted function may be used where a linear one is
            // expected, not vice versa
            if *l1 && !*l2 {
                return Err(ctx.err(
                    origin.span,
                    origin.rule,
                    "a linear function cannot be used where an unrestricted one is required"
                        .to_string(),
                ));
            }
            if ps1.len() != ps2.len() {
                return Err(ctx.err(
                    origin.span,
                    origin.rule,
                    "function arity mismatch".to_string(),
                ));
            }
            for (p1, p2) in ps1.iter().zip(ps2) {
                subty_constr(ctx, p2, p1, origin)?;
            }
            subty_constr(ctx, r1, r2, origin)
        }
        _ => Err(ctx.err(
            origin.span,
            origin.rule,
            format!("type mismatch: expected {sup}, found {sub}"),
        )),
    }
}

/// Unrestrictedness: the type of a discarded variable. Base types and
/// unrestricted functions discard freely; a second-class send capability
/// requires its pattern to allow the empty mailbox.
pub fn unr_constr(ctx: &mut GenCtx, t: &UsageType, origin: &Origin) -> Result<(), Diagnostic> {
    match t {
        UsageType::Base(_) => Ok(()),
        UsageType::Mailbox {
            cap: Capability::Send,
            pattern,
            usage: Usage::SecondClass,
            ..
        } => {
            ctx.constraints
                .push(Pattern::One, pattern.clone(), origin.clone());
            Ok(())
        }
        UsageType::Fun { linear: false, .. } => Ok(()),
        UsageType::Pair(a, b) | UsageType::Sum(a, b) => {
            unr_constr(ctx, a, origin)?;
            unr_constr(ctx, b, origin)
        }
        other => Err(ctx.err(
            origin.span,
            origin.rule,
            format!("linear value of type {other} is never used"),
        )),
    }
}

fn join_iface<'t>(
    ctx: &GenCtx,
    i1: &'t str,
    i2: &'t str,
    origin: &Origin,
) -> Result<(), Diagnostic> {
    if ctx.tables.mode == Mode::Interface && i1 != i2 {
        return Err(ctx.err(
            origin.span,
            origin.rule,
            format!("interface mismatch: {i1} vs {i2}"),
        ));
    }
    Ok(())
}

/// Sequential type combination: the first use happens before the second.
/// Send and receive patterns balance through a fresh variable.
pub fn ty_join(
    ctx: &mut GenCtx,
    first: &UsageType,
    second: &UsageType,
    origin: &Origin,
) -> Result<UsageType, Diagnostic> {
    match (first, second) {
        (UsageType::Base(a), UsageType::Base(b)) if a == b => Ok(first.clone()),
        (
            UsageType::Mailbox {
                cap: c1,
                pattern: p1,
                iface: i1,
                usage: u1,
            },
            UsageType::Mailbox {
                cap: c2,
                pattern: p2,
                iface: i2,
                usage: u2,
            },
        ) => {
            join_iface(ctx, i1, i2, origin)?;
            let usage = u1.sequence(*u2).ok_or_else(|| {
                ctx.err(
                    origin.span,
                    origin.rule,
                    if *u1 == Usage::Returnable && *u2 == Usage::Returnable {
                        "two returnable uses of the same mailbox name".to_string()
                    } else {
                        "a returnable use must be the last use of a mailbox name".to_string()
                    },
                )
            })?;
            match (c1, c2) {
                (Capability::Send, Capability::Send) => Ok(UsageType::Mailbox {
                    cap: Capability::Send,
                    pattern: Pattern::dot(p1.clone(), p2.clone()),
                    iface: i1.clone(),
                    usage,
                }),
                (Capability::Send, Capability::Receive) => {
                    let alpha = ctx.fresh_var(origin.clone());
                    ctx.constraints.push(
                        Pattern::dot(p1.clone(), alpha.clone()),
                        p2.clone(),
                        origin.clone(),
                    );
                    Ok(UsageType::Mailbox {
                        cap: Capability::Receive,
                        pattern: alpha,
                        iface: i2.clone(),
                        usage,
                    })
                }
                (Capability::Receive, Capability::Send) => {
                    let alpha = ctx.fresh_var(origin.clone());
                    ctx.constraints.push(
                        Pattern::dot(p2.clone(), alpha.clone()),
                        p1.clone(),
                        origin.clone(),
                    );
                    Ok(UsageType::Mailbox {
                        cap: Capability::Receive,
                        pattern: alpha,
                        iface: i1.clone(),
                        usage,
                    })
                }
                (Capability::Receive, Capability::Receive) => Err(ctx.err(
                    origin.span,
                    origin.rule,
                    "two receive uses of the same mailbox name".to_string(),
                )),
            }
        }
        (UsageType::Fun { linear: false, .. }, UsageType::Fun { linear: false, .. })
            if first == second =>
        {
            Ok(first.clone())
        }
        (UsageType::Pair(a1, b1), UsageType::Pair(a2, b2)) => Ok(UsageType::Pair(
            Box::new(ty_join(ctx, a1, a2, origin)?),
            Box::new(ty_join(ctx, b1, b2, origin)?),
        )),
        _ => Err(ctx.err(
            origin.span,
            origin.rule,
            format!("cannot combine sequential uses at {first} and {second}"),
        )),
    }
}

/// Branch type combination: both uses describe alternative control paths.
pub fn ty_merge(
    ctx: &mut GenCtx,
    a: &UsageType,
    b: &UsageType,
    origin: &Origin,
) -> Result<UsageType, Diagnostic> {
    match (a, b) {
        (UsageType::Base(x), UsageType::Base(y)) if x == y => Ok(a.clone()),
        (
            UsageType::Mailbox {
                cap: c1,
                pattern: p1,
                iface: i1,
                usage: u1,
            },
            UsageType::Mailbox {
                cap: c2,
                pattern: p2,
                iface: i2,
                usage: u2,
            },
        ) => {
            join_iface(ctx, i1, i2, origin)?;
            if c1 != c2 {
                return Err(ctx.err(
                    origin.span,
                    origin.rule,
                    format!("capability mismatch across branches: {c1} vs {c2}"),
                ));
            }
            let usage = u1.max(*u2);
            match c1 {
                Capability::Send => Ok(UsageType::Mailbox {
                    cap: Capability::Send,
                    pattern: Pattern::plus(p1.clone(), p2.clone()),
                    iface: i1.clone(),
                    usage,
                }),
                Capability::Receive => {
                    let alpha = ctx.fresh_var(origin.clone());
                    ctx.constraints
                        .push(alpha.clone(), p1.clone(), origin.clone());
                    ctx.constraints
                        .push(alpha.clone(), p2.clone(), origin.clone());
                    Ok(UsageType::Mailbox {
                        cap: Capability::Receive,
                        pattern: alpha,
                        iface: i1.clone(),
                        usage,
                    })
                }
            }
        }
        (UsageType::Fun { .. }, UsageType::Fun { .. }) if a == b => Ok(a.clone()),
        (UsageType::Pair(a1, b1), UsageType::Pair(a2, b2)) => Ok(UsageType::Pair(
            Box::new(ty_merge(ctx, a1, a2, origin)?),
            Box::new(ty_merge(ctx, b1, b2, origin)?),
        )),
        (UsageType::Sum(a1, b1), UsageType::Sum(a2, b2)) => Ok(UsageType::Sum(
            Box::new(ty_merge(ctx, a1, a2, origin)?),
            Box::new(ty_merge(ctx, b1, b2, origin)?),
        )),
        _ => Err(ctx.err(
            origin.span,
            origin.rule,
            format!("branches use a variable at incompatible types {a} and {b}"),
        )),
    }
}

/// The widening applied when a variable is used in only one branch: a send
/// capability records the choice of not sending.
fn merge_one_sided(
    ctx: &mut GenCtx,
    t: &UsageType,
    origin: &Origin,
) -> Result<UsageType, Diagnostic> {
    match t {
        UsageType::Base(_) | UsageType::Fun { linear: false, .. } => Ok(t.clone()),
        UsageType::Mailbox {
            cap: Capability::Send,
            pattern,
            iface,
            usage,
        } => Ok(UsageType::Mailbox {
            cap: Capability::Send,
            pattern: Pattern::plus(pattern.clone(), Pattern::One),
            iface: iface.clone(),
            usage: *usage,
        }),
        UsageType::Pair(a, b) => Ok(UsageType::Pair(
            Box::new(merge_one_sided(ctx, a, origin)?),
            Box::new(merge_one_sided(ctx, b, origin)?),
        )),
        other => Err(ctx.err(
            origin.span,
            origin.rule,
            format!("linear value of type {other} is used in only one branch"),
        )),
    }
}

/// Pointwise sequential combination of environments.
pub fn env_join(
    ctx: &mut GenCtx,
    first: &TypeEnv,
    second: &TypeEnv,
    origin: &Origin,
) -> Result<TypeEnv, Diagnostic> {
    let mut out = TypeEnv::new();
    for (x, t1) in first {
        match second.get(x) {
            Some(t2) => {
                let joined = ty_join(ctx, t1, t2, origin).map_err(|d| name_hint(d, x))?;
                out.insert(x.clone(), joined);
            }
            None => {
                out.insert(x.clone(), t1.clone());
            }
        }
    }
    for (x, t2) in second {
        if !first.contains_key(x) {
            out.insert(x.clone(), t2.clone());
        }
    }
    Ok(out)
}

/// Pointwise branch combination of environments.
pub fn env_merge(
    ctx: &mut GenCtx,
    a: &TypeEnv,
    b: &TypeEnv,
    origin: &Origin,
) -> Result<TypeEnv, Diagnostic> {
    let mut out = TypeEnv::new();
    for (x, t1) in a {
        match b.get(x) {
            Some(t2) => {
                let merged = ty_merge(ctx, t1, t2, origin).map_err(|d| name_hint(d, x))?;
                out.insert(x.clone(), merged);
            }
            None => {
                let widened =
                    merge_one_sided(ctx, t1, origin).map_err(|d| name_hint(d, x))?;
                out.insert(x.clone(), widened);
            }
        }
    }
    for (x, t2) in b {
        if !a.contains_key(x) {
            let widened = merge_one_sided(ctx, t2, origin).map_err(|d| name_hint(d, x))?;
            out.insert(x.clone(), widened);
        }
    }
    Ok(out)
}

/// Disjoint combination: overlap is allowed only at identical base types.
pub fn env_combine(
    ctx: &mut GenCtx,
    a: &TypeEnv,
    b: &TypeEnv,
    origin: &Origin,
) -> Result<TypeEnv, Diagnostic> {
    let mut out = TypeEnv::new();
    for (x, t1) in a {
        match b.get(x) {
            Some(t2) => {
                if t1.is_base() && t1 == t2 {
                    out.insert(x.clone(), t1.clone());
                } else {
                    return Err(ctx.err(
                        origin.span,
                        origin.rule,
                        format!(
                            "{x} is used in contexts that must not share mailbox names \
                             (at {t1} and {t2})"
                        ),
                    ));
                }
            }
            None => {
                out.insert(x.clone(), t1.clone());
            }
        }
    }
    for (x, t2) in b {
        if !a.contains_key(x) {
            out.insert(x.clone(), t2.clone());
        }
    }
    Ok(out)
}

fn name_hint(d: Diagnostic, x: &str) -> Diagnostic {
    Diagnostic {
        message: format!("{} (variable {x})", d.message),
        ..d
    }
}

/// Nullable lifts: the top environment absorbs under every combination.
pub fn env_join_n(
    ctx: &mut GenCtx,
    first: &NullableEnv,
    second: &NullableEnv,
    origin: &Origin,
) -> Result<NullableEnv, Diagnostic> {
    lift(ctx, first, second, origin, env_join)
}

pub fn env_merge_n(
    ctx: &mut GenCtx,
    a: &NullableEnv,
    b: &NullableEnv,
    origin: &Origin,
) -> Result<NullableEnv, Diagnostic> {
    lift(ctx, a, b, origin, env_merge)
}

pub fn env_combine_n(
    ctx: &mut GenCtx,
    a: &NullableEnv,
    b: &NullableEnv,
    origin: &Origin,
) -> Result<NullableEnv, Diagnostic> {
    lift(ctx, a, b, origin, env_combine)
}

fn lift(
    ctx: &mut GenCtx,
    a: &NullableEnv,
    b: &NullableEnv,
    origin: &Origin,
    op: fn(&mut GenCtx, &TypeEnv, &TypeEnv, &Origin) -> Result<TypeEnv, Diagnostic>,
) -> Result<NullableEnv, Diagnostic> {
    match (a, b) {
        (NullableEnv::Top, NullableEnv::Top) => Ok(NullableEnv::Top),
        (NullableEnv::Top, NullableEnv::Env(e)) | (NullableEnv::Env(e), NullableEnv::Top) => {
            Ok(NullableEnv::Env(e.clone()))
        }
        (NullableEnv::Env(e1), NullableEnv::Env(e2)) => {
            Ok(NullableEnv::Env(op(ctx, e1, e2, origin)?))
        }
    }
}

/// Environment lookup: an absent variable must be unrestricted at the
/// expected type; a present one must have the expected type as a lower
/// bound of the inferred type.
pub fn env_lookup_check(
    ctx: &mut GenCtx,
    env: &TypeEnv,
    x: &str,
    expected: &UsageType,
    origin: &Origin,
) -> Result<(), Diagnostic> {
    match env.get(x) {
        None => unr_constr(ctx, expected, origin).map_err(|d| name_hint(d, x)),
        Some(inferred) => {
            subty_constr(ctx, expected, inferred, origin).map_err(|d| name_hint(d, x))
        }
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    pub use super::{Mode, ProgramTables};
    pub use crate::syntax::IrProgram;

    /// Parse, desugar, lower, and pre-type a source snippet.
    pub fn setup(src: &str, mode: Mode) -> (ProgramTables, IrProgram) {
        let p = crate::syntax::parse_program(src).unwrap();
        let d = crate::syntax::desugar(&p);
        let mut ir = crate::syntax::to_ir(&d);
        let tables = ProgramTables::build(&ir, mode).unwrap();
        super::pre_type(&mut ir, &tables).unwrap();
        (tables, ir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::BaseType;

    fn tables() -> ProgramTables {
        ProgramTables {
            mode: Mode::Strict,
            interfaces: IndexMap::new(),
            signature: IndexMap::new(),
            defs: IndexMap::new(),
        }
    }

    fn o() -> Origin {
        Origin::new(Span::new(1, 1), "test")
    }

    fn send(p: Pattern, u: Usage) -> UsageType {
        UsageType::mailbox(Capability::Send, p, "I", u)
    }

    fn recv(p: Pattern, u: Usage) -> UsageType {
        UsageType::mailbox(Capability::Receive, p, "I", u)
    }

    fn t(s: &str) -> Pattern {
        Pattern::tag(s)
    }

    #[test]
    fn subtyping_variance() {
        let tb = tables();
        let mut ctx = GenCtx::new(&tb, 0);
        // base: no constraints
        subty_constr(
            &mut ctx,
            &UsageType::Base(BaseType::Int),
            &UsageType::Base(BaseType::Int),
            &o(),
        )
        .unwrap();
        assert!(ctx.constraints.is_empty());
        // returnable send <= second-class send is contravariant
        subty_constr(
            &mut ctx,
            &send(Pattern::Var(0), Usage::Returnable),
            &send(Pattern::Var(1), Usage::SecondClass),
            &o(),
        )
        .unwrap();
        let c = ctx.constraints.iter().next().unwrap();
        assert_eq!((&c.lhs, &c.rhs), (&Pattern::Var(1), &Pattern::Var(0)));
        // receive is covariant
        let mut ctx = GenCtx::new(&tb, 0);
        subty_constr(
            &mut ctx,
            &recv(Pattern::Var(0), Usage::Returnable),
            &recv(Pattern::Var(1), Usage::Returnable),
            &o(),
        )
        .unwrap();
        let c = ctx.constraints.iter().next().unwrap();
        assert_eq!((&c.lhs, &c.rhs), (&Pattern::Var(0), &Pattern::Var(1)));
        // second-class where returnable required: error
        assert!(subty_constr(
            &mut ctx,
            &recv(Pattern::One, Usage::SecondClass),
            &recv(Pattern::One, Usage::Returnable),
            &o(),
        )
        .is_err());
    }

    #[test]
    fn unrestrictedness() {
        let tb = tables();
        let mut ctx = GenCtx::new(&tb, 0);
        unr_constr(&mut ctx, &UsageType::Base(BaseType::Int), &o()).unwrap();
        assert!(ctx.constraints.is_empty());
        // discarded second-class send: 1 <= pattern
        unr_constr(&mut ctx, &send(t("m"), Usage::SecondClass), &o()).unwrap();
        let c = ctx.constraints.iter().next().unwrap();
        assert_eq!((&c.lhs, &c.rhs), (&Pattern::One, &t("m")));
        // receive capabilities are linear
        assert!(unr_constr(&mut ctx, &recv(t("m"), Usage::Returnable), &o()).is_err());
        assert!(unr_constr(&mut ctx, &send(t("m"), Usage::Returnable), &o()).is_err());
    }

    #[test]
    fn join_send_and_receive_balances() {
        let tb = tables();
        let mut ctx = GenCtx::new(&tb, 10);
        // join(!m, ?(n.m)) introduces alpha with m.alpha <= n.m
        let joined = ty_join(
            &mut ctx,
            &send(t("m"), Usage::SecondClass),
            &recv(Pattern::dot(t("n"), t("m")), Usage::Returnable),
            &o(),
        )
        .unwrap();
        match &joined {
            UsageType::Mailbox {
                cap: Capability::Receive,
                pattern: Pattern::Var(10),
                usage: Usage::Returnable,
                ..
            } => {}
            other => panic!("unexpected join result {other:?}"),
        }
        let c = ctx.constraints.iter().next().unwrap();
        assert_eq!(c.lhs, Pattern::dot(t("m"), Pattern::Var(10)));
        assert_eq!(c.rhs, Pattern::dot(t("n"), t("m")));
        // a valid solution maps the variable to n; checked by substitution
        let sol = c.lhs.subst(&|v| (v == 10).then(|| t("n")));
        assert!(crate::patterns::includes(&sol, &c.rhs).unwrap());
        // join of sends concatenates with no constraints
        let before = ctx.constraints.len();
        let j = ty_join(
            &mut ctx,
            &send(Pattern::Var(0), Usage::SecondClass),
            &send(Pattern::Var(1), Usage::SecondClass),
            &o(),
        )
        .unwrap();
        assert_eq!(ctx.constraints.len(), before);
        match j {
            UsageType::Mailbox { pattern, .. } => {
                assert_eq!(pattern, Pattern::dot(Pattern::Var(0), Pattern::Var(1)));
            }
            _ => unreachable!(),
        }
        // base join
        let j = ty_join(
            &mut ctx,
            &UsageType::Base(BaseType::Int),
            &UsageType::Base(BaseType::Int),
            &o(),
        )
        .unwrap();
        assert_eq!(j, UsageType::Base(BaseType::Int));
        // two receives cannot combine
        assert!(ty_join(
            &mut ctx,
            &recv(t("m"), Usage::SecondClass),
            &recv(t("n"), Usage::Returnable),
            &o(),
        )
        .is_err());
        // double returnable use
        assert!(ty_join(
            &mut ctx,
            &send(t("m"), Usage::Returnable),
            &send(t("n"), Usage::Returnable),
            &o(),
        )
        .is_err());
    }

    #[test]
    fn merge_branches() {
        let tb = tables();
        let mut ctx = GenCtx::new(&tb, 5);
        // sends merge by disjunction
        let m = ty_merge(
            &mut ctx,
            &send(Pattern::Var(0), Usage::SecondClass),
            &send(Pattern::Var(1), Usage::SecondClass),
            &o(),
        )
        .unwrap();
        match m {
            UsageType::Mailbox { pattern, .. } => {
                assert_eq!(pattern, Pattern::plus(Pattern::Var(0), Pattern::Var(1)));
            }
            _ => unreachable!(),
        }
        // receives merge through a fresh lower bound
        let m = ty_merge(
            &mut ctx,
            &recv(Pattern::Var(0), Usage::Returnable),
            &recv(Pattern::Var(1), Usage::Returnable),
            &o(),
        )
        .unwrap();
        match m {
            UsageType::Mailbox {
                pattern: Pattern::Var(5),
                ..
            } => {}
            other => panic!("{other:?}"),
        }
        let cs: Vec<_> = ctx.constraints.iter().collect();
        assert_eq!(cs.len(), 2);
        assert_eq!((&cs[0].lhs, &cs[0].rhs), (&Pattern::Var(5), &Pattern::Var(0)));
        assert_eq!((&cs[1].lhs, &cs[1].rhs), (&Pattern::Var(5), &Pattern::Var(1)));
        // base merge
        let m = ty_merge(
            &mut ctx,
            &UsageType::Base(BaseType::Bool),
            &UsageType::Base(BaseType::Bool),
            &o(),
        )
        .unwrap();
        assert_eq!(m, UsageType::Base(BaseType::Bool));
    }

    #[test]
    fn env_merge_widens_one_sided_sends() {
        let tb = tables();
        let mut ctx = GenCtx::new(&tb, 0);
        let mut left = TypeEnv::new();
        left.insert("x".to_string(), send(t("m"), Usage::SecondClass));
        let merged = env_merge(&mut ctx, &left, &TypeEnv::new(), &o()).unwrap();
        assert_eq!(
            merged.get("x").unwrap(),
            &send(Pattern::plus(t("m"), Pattern::One), Usage::SecondClass)
        );
        // a one-sided receive is an error
        let mut left = TypeEnv::new();
        left.insert("y".to_string(), recv(t("m"), Usage::Returnable));
        assert!(env_merge(&mut ctx, &left, &TypeEnv::new(), &o()).is_err());
    }

    #[test]
    fn env_combine_shares_base_only() {
        let tb = tables();
        let mut ctx = GenCtx::new(&tb, 0);
        let mut a = TypeEnv::new();
        a.insert("n".to_string(), UsageType::Base(BaseType::Int));
        let mut b = TypeEnv::new();
        b.insert("n".to_string(), UsageType::Base(BaseType::Int));
        let c = env_combine(&mut ctx, &a, &b, &o()).unwrap();
        assert_eq!(c.get("n").unwrap(), &UsageType::Base(BaseType::Int));
        // overlapping mailbox types are rejected
        a.insert("mb".to_string(), send(t("m"), Usage::SecondClass));
        b.insert("mb".to_string(), recv(t("m"), Usage::Returnable));
        assert!(env_combine(&mut ctx, &a, &b, &o()).is_err());
    }

    #[test]
    fn join_of_empty_env_is_identity() {
        let tb = tables();
        let mut ctx = GenCtx::new(&tb, 0);
        let mut theta = TypeEnv::new();
        theta.insert("x".to_string(), recv(t("m"), Usage::Returnable));
        theta.insert("n".to_string(), UsageType::Base(BaseType::Int));
        let j = env_join(&mut ctx, &theta, &TypeEnv::new(), &o()).unwrap();
        assert_eq!(j, theta);
        assert!(ctx.constraints.is_empty());
    }

    #[test]
    fn top_absorbs_under_every_operator() {
        let tb = tables();
        let mut ctx = GenCtx::new(&tb, 0);
        let mut env = TypeEnv::new();
        env.insert("x".to_string(), recv(t("m"), Usage::Returnable));
        let theta = NullableEnv::Env(env);
        for op in [env_join_n, env_merge_n, env_combine_n] {
            let r = op(&mut ctx, &NullableEnv::Top, &theta, &o()).unwrap();
            assert_eq!(r, theta);
            let r = op(&mut ctx, &theta, &NullableEnv::Top, &o()).unwrap();
            assert_eq!(r, theta);
            let r = op(&mut ctx, &NullableEnv::Top, &NullableEnv::Top, &o()).unwrap();
            assert!(r.is_top());
        }
    }

    #[test]
    fn lookup_oriented_expected_below_inferred() {
        let tb = tables();
        let mut ctx = GenCtx::new(&tb, 0);
        // x absent at base type: fine
        env_lookup_check(
            &mut ctx,
            &TypeEnv::new(),
            "x",
            &UsageType::Base(BaseType::Int),
            &o(),
        )
        .unwrap();
        // x absent at a receive type: linear, error
        assert!(env_lookup_check(
            &mut ctx,
            &TypeEnv::new(),
            "x",
            &recv(Pattern::Var(0), Usage::Returnable),
            &o(),
        )
        .is_err());
        // present: expected <= inferred, receive covariant
        let mut env = TypeEnv::new();
        env.insert("x".to_string(), recv(Pattern::Var(1), Usage::Returnable));
        env_lookup_check(
            &mut ctx,
            &env,
            "x",
            &recv(Pattern::Var(0), Usage::Returnable),
            &o(),
        )
        .unwrap();
        let c = ctx.constraints.iter().last().unwrap();
        assert_eq!((&c.lhs, &c.rhs), (&Pattern::Var(0), &Pattern::Var(1)));
    }
}
