//! First-order linear integer arithmetic sentences and a Cooper-style
//! quantifier-elimination decision procedure.
//!
//! All variables range over integers; non-negativity is expressed with
//! explicit atoms by the callers. The procedure works on negation normal
//! form, eliminates existential blocks innermost-first, and evaluates the
//! resulting ground formula. An atom budget bounds the work; exhausting it
//! is reported distinctly from an unsatisfiable sentence.

use std::collections::BTreeMap;

/// Atom budget exhausted (or coefficient overflow) while deciding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceExhausted {
    pub detail: String,
}

impl std::fmt::Display for ResourceExhausted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "decision procedure resource limit exceeded: {}", self.detail)
    }
}

pub const DEFAULT_ATOM_LIMIT: u64 = 1_000_000;

/// A linear expression `sum coeff_i * var_i + constant`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LinearExpr {
    pub terms: BTreeMap<u32, i64>,
    pub constant: i64,
}

impl LinearExpr {
    pub fn constant(k: i64) -> Self {
        LinearExpr {
            terms: BTreeMap::new(),
            constant: k,
        }
    }

    pub fn var(v: u32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(v, 1);
        LinearExpr { terms, constant: 0 }
    }

    pub fn add_term(&mut self, v: u32, coeff: i64) {
        if coeff == 0 {
            return;
        }
        let c = self.terms.entry(v).or_insert(0);
        *c += coeff;
        if *c == 0 {
            self.terms.remove(&v);
        }
    }

    fn coeff(&self, v: u32) -> i64 {
        self.terms.get(&v).copied().unwrap_or(0)
    }

    fn is_ground(&self) -> bool {
        self.terms.is_empty()
    }

    fn checked_sub(&self, other: &LinearExpr) -> Option<LinearExpr> {
        let mut out = self.clone();
        out.constant = out.constant.checked_sub(other.constant)?;
        for (v, c) in &other.terms {
            let e = out.terms.entry(*v).or_insert(0);
            *e = e.checked_sub(*c)?;
            if *e == 0 {
                out.terms.remove(v);
            }
        }
        Some(out)
    }

    fn checked_scale(&self, k: i64) -> Option<LinearExpr> {
        let mut out = LinearExpr::constant(self.constant.checked_mul(k)?);
        for (v, c) in &self.terms {
            out.terms.insert(*v, c.checked_mul(k)?);
        }
        out.terms.retain(|_, c| *c != 0);
        Some(out)
    }

    fn checked_add(&self, other: &LinearExpr) -> Option<LinearExpr> {
        let mut out = self.clone();
        out.constant = out.constant.checked_add(other.constant)?;
        for (v, c) in &other.terms {
            let e = out.terms.entry(*v).or_insert(0);
            *e = e.checked_add(*c)?;
            if *e == 0 {
                out.terms.remove(v);
            }
        }
        Some(out)
    }

    fn negate(&self) -> Option<LinearExpr> {
        self.checked_scale(-1)
    }

    /// Substitute `t` for `v`.
    fn subst(&self, v: u32, t: &LinearExpr) -> Option<LinearExpr> {
        let c = self.coeff(v);
        if c == 0 {
            return Some(self.clone());
        }
        let mut out = self.clone();
        out.terms.remove(&v);
        out.checked_add(&t.checked_scale(c)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Atom {
    /// `e <= 0`
    Le(LinearExpr),
    /// `e = 0`
    Eq(LinearExpr),
    /// `d | e`
    Dvd(u64, LinearExpr),
    /// `not (d | e)`
    NDvd(u64, LinearExpr),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum PresburgerFormula {
    True,
    False,
    Atom(Atom),
    And(Vec<PresburgerFormula>),
    Or(Vec<PresburgerFormula>),
    Not(Box<PresburgerFormula>),
    Exists(Vec<u32>, Box<PresburgerFormula>),
    Forall(Vec<u32>, Box<PresburgerFormula>),
}

impl PresburgerFormula {
    pub fn and(mut parts: Vec<PresburgerFormula>) -> Self {
        match parts.len() {
            0 => PresburgerFormula::True,
            1 => parts.pop().unwrap(),
            _ => PresburgerFormula::And(parts),
        }
    }

    pub fn or(mut parts: Vec<PresburgerFormula>) -> Self {
        match parts.len() {
            0 => PresburgerFormula::False,
            1 => parts.pop().unwrap(),
            _ => PresburgerFormula::Or(parts),
        }
    }

    pub fn not(f: PresburgerFormula) -> Self {
        PresburgerFormula::Not(Box::new(f))
    }

    pub fn exists(vars: Vec<u32>, body: PresburgerFormula) -> Self {
        if vars.is_empty() {
            body
        } else {
            PresburgerFormula::Exists(vars, Box::new(body))
        }
    }

    pub fn forall(vars: Vec<u32>, body: PresburgerFormula) -> Self {
        if vars.is_empty() {
            body
        } else {
            PresburgerFormula::Forall(vars, Box::new(body))
        }
    }

    pub fn implies(a: PresburgerFormula, b: PresburgerFormula) -> Self {
        PresburgerFormula::or(vec![PresburgerFormula::not(a), b])
    }

    /// `lhs = rhs`
    pub fn eq(lhs: LinearExpr, rhs: LinearExpr) -> Self {
        match lhs.checked_sub(&rhs) {
            Some(e) => PresburgerFormula::Atom(Atom::Eq(e)),
            None => panic!("coefficient overflow building equality"),
        }
    }

    /// `lhs <= rhs`
    pub fn le(lhs: LinearExpr, rhs: LinearExpr) -> Self {
        match lhs.checked_sub(&rhs) {
            Some(e) => PresburgerFormula::Atom(Atom::Le(e)),
            None => panic!("coefficient overflow building inequality"),
        }
    }

    /// `lhs < rhs`
    pub fn lt(lhs: LinearExpr, rhs: LinearExpr) -> Self {
        let mut e = match lhs.checked_sub(&rhs) {
            Some(e) => e,
            None => panic!("coefficient overflow building inequality"),
        };
        e.constant += 1;
        PresburgerFormula::Atom(Atom::Le(e))
    }

    /// `v >= 0`
    pub fn ge_zero(v: u32) -> Self {
        let mut e = LinearExpr::constant(0);
        e.add_term(v, -1);
        PresburgerFormula::Atom(Atom::Le(e))
    }
}

/// Fresh-variable supply for building formulas.
#[derive(Debug, Default)]
pub struct FormulaBuilder {
    next: u32,
}

impl FormulaBuilder {
    pub fn new() -> Self {
        FormulaBuilder { next: 0 }
    }

    pub fn fresh(&mut self) -> u32 {
        let v = self.next;
        self.next += 1;
        v
    }

    pub fn linear(k: i64) -> LinearExpr {
        LinearExpr::constant(k)
    }
}

/// Decide a closed sentence with the default atom budget.
pub fn decide(f: &PresburgerFormula) -> Result<bool, ResourceExhausted> {
    decide_with_limit(f, DEFAULT_ATOM_LIMIT)
}

/// Decide a closed sentence, aborting after `limit` generated atoms.
pub fn decide_with_limit(f: &PresburgerFormula, limit: u64) -> Result<bool, ResourceExhausted> {
    let mut ctx = QeCtx { used: 0, limit };
    let nnf = nnf(f, false, &mut ctx)?;
    let result = qe(nnf, &mut ctx)?;
    match result {
        PresburgerFormula::True => Ok(true),
        PresburgerFormula::False => Ok(false),
        other => panic!("sentence was not closed: residue {other:?}"),
    }
}

struct QeCtx {
    used: u64,
    limit: u64,
}

impl QeCtx {
    fn charge(&mut self, n: u64) -> Result<(), ResourceExhausted> {
        self.used += n;
        if self.used > self.limit {
            Err(ResourceExhausted {
                detail: format!("atom budget of {} exceeded", self.limit),
            })
        } else {
            Ok(())
        }
    }

    fn overflow(&self) -> ResourceExhausted {
        ResourceExhausted {
            detail: "coefficient overflow".to_string(),
        }
    }
}

/// Negation normal form. `negated` tracks an outstanding negation.
fn nnf(
    f: &PresburgerFormula,
    negated: bool,
    ctx: &mut QeCtx,
) -> Result<PresburgerFormula, ResourceExhausted> {
    use PresburgerFormula as F;
    Ok(match f {
        F::True => {
            if negated {
                F::False
            } else {
                F::True
            }
        }
        F::False => {
            if negated {
                F::True
            } else {
                F::False
            }
        }
        F::Not(inner) => nnf(inner, !negated, ctx)?,
        F::And(parts) => {
            let parts = parts
                .iter()
                .map(|p| nnf(p, negated, ctx))
                .collect::<Result<Vec<_>, _>>()?;
            if negated {
                F::or(parts)
            } else {
                F::and(parts)
            }
        }
        F::Or(parts) => {
            let parts = parts
                .iter()
                .map(|p| nnf(p, negated, ctx))
                .collect::<Result<Vec<_>, _>>()?;
            if negated {
                F::and(parts)
            } else {
                F::or(parts)
            }
        }
        F::Exists(vars, body) => {
            let body = nnf(body, negated, ctx)?;
            if negated {
                F::forall(vars.clone(), body)
            } else {
                F::exists(vars.clone(), body)
            }
        }
        F::Forall(vars, body) => {
            let body = nnf(body, negated, ctx)?;
            if negated {
                F::exists(vars.clone(), body)
            } else {
                F::forall(vars.clone(), body)
            }
        }
        F::Atom(a) => {
            if !negated {
                F::Atom(a.clone())
            } else {
                ctx.charge(1)?;
                match a {
                    // not (e <= 0)  <=>  -e + 1 <= 0
                    Atom::Le(e) => {
                        let mut ne = e.negate().ok_or_else(|| ctx.overflow())?;
                        ne.constant = ne.constant.checked_add(1).ok_or_else(|| ctx.overflow())?;
                        F::Atom(Atom::Le(ne))
                    }
                    // not (e = 0)  <=>  e + 1 <= 0  or  -e + 1 <= 0
                    Atom::Eq(e) => {
                        ctx.charge(1)?;
                        let mut lo = e.clone();
                        lo.constant = lo.constant.checked_add(1).ok_or_else(|| ctx.overflow())?;
                        let mut hi = e.negate().ok_or_else(|| ctx.overflow())?;
                        hi.constant = hi.constant.checked_add(1).ok_or_else(|| ctx.overflow())?;
                        F::or(vec![F::Atom(Atom::Le(lo)), F::Atom(Atom::Le(hi))])
                    }
                    Atom::Dvd(d, e) => F::Atom(Atom::NDvd(*d, e.clone())),
                    Atom::NDvd(d, e) => F::Atom(Atom::Dvd(*d, e.clone())),
                }
            }
        }
    })
}

/// Quantifier elimination over an NNF formula.
fn qe(f: PresburgerFormula, ctx: &mut QeCtx) -> Result<PresburgerFormula, ResourceExhausted> {
    use PresburgerFormula as F;
    Ok(match f {
        F::And(parts) => simplify(F::and(
            parts.into_iter().map(|p| qe(p, ctx)).collect::<Result<_, _>>()?,
        )),
        F::Or(parts) => simplify(F::or(
            parts.into_iter().map(|p| qe(p, ctx)).collect::<Result<_, _>>()?,
        )),
        F::Exists(vars, body) => {
            let mut cur = qe(*body, ctx)?;
            for v in vars.into_iter().rev() {
                cur = eliminate_one(v, cur, ctx)?;
            }
            cur
        }
        F::Forall(vars, body) => {
            // forall x. phi  <=>  not exists x. not phi
            let inner = qe(*body, ctx)?;
            let neg = nnf(&PresburgerFormula::not(inner), false, ctx)?;
            let mut cur = neg;
            for v in vars.into_iter().rev() {
                cur = eliminate_one(v, cur, ctx)?;
            }
            nnf(&PresburgerFormula::not(cur), false, ctx)
                .map(simplify)?
        }
        leaf => simplify(leaf),
    })
}

fn mentions(f: &PresburgerFormula, v: u32) -> bool {
    use PresburgerFormula as F;
    match f {
        F::True | F::False => false,
        F::Atom(a) => atom_expr(a).coeff(v) != 0,
        F::And(ps) | F::Or(ps) => ps.iter().any(|p| mentions(p, v)),
        F::Not(p) => mentions(p, v),
        F::Exists(_, p) | F::Forall(_, p) => mentions(p, v),
    }
}

fn atom_expr(a: &Atom) -> &LinearExpr {
    match a {
        Atom::Le(e) | Atom::Eq(e) | Atom::Dvd(_, e) | Atom::NDvd(_, e) => e,
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> Option<u64> {
    if a == 0 || b == 0 {
        return Some(a.max(b));
    }
    (a / gcd(a, b)).checked_mul(b)
}

/// Eliminate one existential variable from a quantifier-free NNF formula.
fn eliminate_one(
    x: u32,
    f: PresburgerFormula,
    ctx: &mut QeCtx,
) -> Result<PresburgerFormula, ResourceExhausted> {
    let f = simplify(f);
    if !mentions(&f, x) {
        return Ok(f);
    }

    // Gauss fast path: a top-level equality with unit coefficient lets us
    // substitute directly.
    if let PresburgerFormula::And(parts) = &f {
        for part in parts {
            if let PresburgerFormula::Atom(Atom::Eq(e)) = part {
                let c = e.coeff(x);
                if c == 1 || c == -1 {
                    // c*x + r = 0  =>  x = -r/c
                    let mut r = e.clone();
                    r.terms.remove(&x);
                    let t = r
                        .checked_scale(-c) // x = -r when c = 1, x = r when c = -1
                        .ok_or_else(|| ctx.overflow())?;
                    let substituted = subst_formula(&f, x, &t, ctx)?;
                    return Ok(simplify(substituted));
                }
            }
        }
    }
    if let PresburgerFormula::Atom(Atom::Eq(e)) = &f {
        let c = e.coeff(x);
        if c == 1 || c == -1 {
            // a single solvable equality is satisfiable outright
            return Ok(PresburgerFormula::True);
        }
    }

    // Cooper. First normalise every coefficient of x to +-delta, switching
    // to the scaled variable, then build the bound sets.
    let delta = coefficient_lcm(&f, x).ok_or_else(|| ctx.overflow())?;
    let scaled = rescale(&f, x, delta, ctx)?;
    let scaled = if delta > 1 {
        let divisor = PresburgerFormula::Atom(Atom::Dvd(delta, LinearExpr::var(x)));
        ctx.charge(1)?;
        PresburgerFormula::and(vec![scaled, divisor])
    } else {
        scaled
    };

    let mut lowers: Vec<LinearExpr> = Vec::new();
    let mut uppers: Vec<LinearExpr> = Vec::new();
    let mut big_d: u64 = 1;
    collect_bounds(&scaled, x, &mut lowers, &mut uppers, &mut big_d)
        .ok_or_else(|| ctx.overflow())?;

    let use_minus_infinity = lowers.len() <= uppers.len();
    let bounds = if use_minus_infinity { lowers } else { uppers };

    let mut disjuncts = Vec::new();
    for j in 1..=big_d {
        let limit_form = infinity_form(&scaled, x, use_minus_infinity);
        let jj = if use_minus_infinity { j as i64 } else { -(j as i64) };
        let t = LinearExpr::constant(jj);
        disjuncts.push(subst_formula(&limit_form, x, &t, ctx)?);
    }
    for b in &bounds {
        for j in 1..=big_d {
            // minus-infinity side: x := b + j with b a strict lower bound;
            // plus-infinity side: x := u - j with u a strict upper bound
            let mut t = b.clone();
            let jj = if use_minus_infinity { j as i64 } else { -(j as i64) };
            t.constant = t.constant.checked_add(jj).ok_or_else(|| ctx.overflow())?;
            disjuncts.push(subst_formula(&scaled, x, &t, ctx)?);
        }
    }
    Ok(simplify(PresburgerFormula::or(disjuncts)))
}

fn coefficient_lcm(f: &PresburgerFormula, x: u32) -> Option<u64> {
    use PresburgerFormula as F;
    match f {
        F::Atom(a) => {
            let c = atom_expr(a).coeff(x).unsigned_abs();
            if c == 0 {
                Some(1)
            } else {
                Some(c)
            }
        }
        F::And(ps) | F::Or(ps) => {
            let mut acc = 1u64;
            for p in ps {
                acc = lcm(acc, coefficient_lcm(p, x)?)?;
            }
            Some(acc)
        }
        _ => Some(1),
    }
}

/// Rewrite every atom so the coefficient of `x` is `+1`, `-1`, or `0`,
/// reading `x` as the scaled variable `delta * x_original`.
fn rescale(
    f: &PresburgerFormula,
    x: u32,
    delta: u64,
    ctx: &mut QeCtx,
) -> Result<PresburgerFormula, ResourceExhausted> {
    use PresburgerFormula as F;
    Ok(match f {
        F::And(ps) => F::and(
            ps.iter()
                .map(|p| rescale(p, x, delta, ctx))
                .collect::<Result<_, _>>()?,
        ),
        F::Or(ps) => F::or(
            ps.iter()
                .map(|p| rescale(p, x, delta, ctx))
                .collect::<Result<_, _>>()?,
        ),
        F::Atom(a) => {
            let e = atom_expr(a);
            let c = e.coeff(x);
            if c == 0 {
                return Ok(f.clone());
            }
            ctx.charge(1)?;
            let k = (delta / c.unsigned_abs()) as i64;
            let mut rest = e.clone();
            rest.terms.remove(&x);
            let scaled_rest = rest.checked_scale(k).ok_or_else(|| ctx.overflow())?;
            let sign = if c > 0 { 1 } else { -1 };
            let mut expr = scaled_rest;
            expr.add_term(x, sign);
            F::Atom(match a {
                Atom::Le(_) => Atom::Le(expr),
                Atom::Eq(_) => Atom::Eq(expr),
                Atom::Dvd(d, _) => {
                    let nd = d.checked_mul(k as u64).ok_or_else(|| ctx.overflow())?;
                    // make the x coefficient +1: d | e  <=>  d | -e
                    if sign < 0 {
                        expr = expr.negate().ok_or_else(|| ctx.overflow())?;
                    }
                    Atom::Dvd(nd, expr)
                }
                Atom::NDvd(d, _) => {
                    let nd = d.checked_mul(k as u64).ok_or_else(|| ctx.overflow())?;
                    if sign < 0 {
                        expr = expr.negate().ok_or_else(|| ctx.overflow())?;
                    }
                    Atom::NDvd(nd, expr)
                }
            })
        }
        other => other.clone(),
    })
}

/// Collect strict lower-bound terms (t < x), upper-bound terms (x < u), and
/// the lcm of divisors mentioning x. Assumes unit x coefficients.
fn collect_bounds(
    f: &PresburgerFormula,
    x: u32,
    lowers: &mut Vec<LinearExpr>,
    uppers: &mut Vec<LinearExpr>,
    big_d: &mut u64,
) -> Option<()> {
    use PresburgerFormula as F;
    match f {
        F::And(ps) | F::Or(ps) => {
            for p in ps {
                collect_bounds(p, x, lowers, uppers, big_d)?;
            }
        }
        F::Atom(a) => {
            let e = atom_expr(a);
            let c = e.coeff(x);
            if c == 0 {
                return Some(());
            }
            let mut rest = e.clone();
            rest.terms.remove(&x);
            match a {
                Atom::Le(_) => {
                    if c > 0 {
                        // x + r <= 0  =>  x < -r + 1: upper term -r
                        uppers.push(rest.negate()?);
                    } else {
                        // -x + r <= 0  =>  x >= r  =>  r - 1 < x
                        let mut t = rest;
                        t.constant = t.constant.checked_sub(1)?;
                        lowers.push(t);
                    }
                }
                Atom::Eq(_) => {
                    // x = -r/c; with unit coefficient both a lower and an
                    // upper bound
                    let solution = if c > 0 { rest.negate()? } else { rest };
                    let mut lo = solution.clone();
                    lo.constant = lo.constant.checked_sub(1)?;
                    lowers.push(lo);
                    uppers.push({
                        let mut u = solution;
                        u.constant = u.constant.checked_add(1)?;
                        u
                    });
                }
                Atom::Dvd(d, _) | Atom::NDvd(d, _) => {
                    *big_d = lcm(*big_d, *d)?;
                }
            }
        }
        _ => {}
    }
    Some(())
}

/// The limit form of the formula: upper-bound atoms become true as
/// x -> -infinity (dually for +infinity); opposite bounds and equalities
/// become false; divisibility atoms are kept.
fn infinity_form(f: &PresburgerFormula, x: u32, minus: bool) -> PresburgerFormula {
    use PresburgerFormula as F;
    match f {
        F::And(ps) => F::and(ps.iter().map(|p| infinity_form(p, x, minus)).collect()),
        F::Or(ps) => F::or(ps.iter().map(|p| infinity_form(p, x, minus)).collect()),
        F::Atom(a) => {
            let e = atom_expr(a);
            let c = e.coeff(x);
            if c == 0 {
                return f.clone();
            }
            match a {
                Atom::Le(_) => {
                    let satisfied = (c > 0) == minus;
                    if satisfied {
                        F::True
                    } else {
                        F::False
                    }
                }
                Atom::Eq(_) => F::False,
                Atom::Dvd(..) | Atom::NDvd(..) => f.clone(),
            }
        }
        other => other.clone(),
    }
}

fn subst_formula(
    f: &PresburgerFormula,
    x: u32,
    t: &LinearExpr,
    ctx: &mut QeCtx,
) -> Result<PresburgerFormula, ResourceExhausted> {
    use PresburgerFormula as F;
    Ok(match f {
        F::And(ps) => F::and(
            ps.iter()
                .map(|p| subst_formula(p, x, t, ctx))
                .collect::<Result<_, _>>()?,
        ),
        F::Or(ps) => F::or(
            ps.iter()
                .map(|p| subst_formula(p, x, t, ctx))
                .collect::<Result<_, _>>()?,
        ),
        F::Atom(a) => {
            if atom_expr(a).coeff(x) == 0 {
                f.clone()
            } else {
                ctx.charge(1)?;
                let e = atom_expr(a).subst(x, t).ok_or_else(|| ctx.overflow())?;
                F::Atom(match a {
                    Atom::Le(_) => Atom::Le(e),
                    Atom::Eq(_) => Atom::Eq(e),
                    Atom::Dvd(d, _) => Atom::Dvd(*d, e),
                    Atom::NDvd(d, _) => Atom::NDvd(*d, e),
                })
            }
        }
        other => other.clone(),
    })
}

/// Constant folding and flattening.
fn simplify(f: PresburgerFormula) -> PresburgerFormula {
    use PresburgerFormula as F;
    match f {
        F::Atom(a) => simplify_atom(a),
        F::And(parts) => {
            let mut out: Vec<PresburgerFormula> = Vec::new();
            for p in parts {
                match simplify(p) {
                    F::True => {}
                    F::False => return F::False,
                    F::And(inner) => out.extend(inner),
                    other => {
                        if !out.contains(&other) {
                            out.push(other);
                        }
                    }
                }
            }
            F::and(out)
        }
        F::Or(parts) => {
            let mut out: Vec<PresburgerFormula> = Vec::new();
            for p in parts {
                match simplify(p) {
                    F::False => {}
                    F::True => return F::True,
                    F::Or(inner) => out.extend(inner),
                    other => {
                        if !out.contains(&other) {
                            out.push(other);
                        }
                    }
                }
            }
            F::or(out)
        }
        other => other,
    }
}

fn simplify_atom(a: Atom) -> PresburgerFormula {
    use PresburgerFormula as F;
    match &a {
        Atom::Le(e) => {
            if e.is_ground() {
                return if e.constant <= 0 { F::True } else { F::False };
            }
            // divide by the gcd of the coefficients, flooring the constant
            let g = e
                .terms
                .values()
                .fold(0u64, |acc, c| gcd(acc, c.unsigned_abs()));
            if g > 1 {
                let mut out = LinearExpr::constant(e.constant.div_euclid(g as i64));
                for (v, c) in &e.terms {
                    out.terms.insert(*v, c / g as i64);
                }
                return F::Atom(Atom::Le(out));
            }
            F::Atom(a)
        }
        Atom::Eq(e) => {
            if e.is_ground() {
                return if e.constant == 0 { F::True } else { F::False };
            }
            let g = e
                .terms
                .values()
                .fold(0u64, |acc, c| gcd(acc, c.unsigned_abs()));
            if g > 1 {
                if e.constant % g as i64 != 0 {
                    return F::False;
                }
                let mut out = LinearExpr::constant(e.constant / g as i64);
                for (v, c) in &e.terms {
                    out.terms.insert(*v, c / g as i64);
                }
                return F::Atom(Atom::Eq(out));
            }
            F::Atom(a)
        }
        Atom::Dvd(d, e) => {
            if *d == 1 {
                return F::True;
            }
            if e.is_ground() {
                return if e.constant.rem_euclid(*d as i64) == 0 {
                    F::True
                } else {
                    F::False
                };
            }
            F::Atom(a)
        }
        Atom::NDvd(d, e) => {
            if *d == 1 {
                return F::False;
            }
            if e.is_ground() {
                return if e.constant.rem_euclid(*d as i64) == 0 {
                    F::False
                } else {
                    F::True
                };
            }
            F::Atom(a)
        }
    }
}

/// Render a sentence as an SMT-LIB2 script in logic LIA, asserting the
/// negation: `unsat` from a solver means the sentence holds.
pub fn to_smtlib(f: &PresburgerFormula) -> String {
    let mut out = String::new();
    out.push_str("(set-logic LIA)\n");
    out.push_str(&format!("(assert (not {}))\n", render_formula(f)));
    out.push_str("(check-sat)\n");
    out
}

fn render_formula(f: &PresburgerFormula) -> String {
    use PresburgerFormula as F;
    match f {
        F::True => "true".to_string(),
        F::False => "false".to_string(),
        F::Atom(a) => render_atom(a),
        F::And(ps) => render_nary("and", ps),
        F::Or(ps) => render_nary("or", ps),
        F::Not(p) => format!("(not {})", render_formula(p)),
        F::Exists(vars, p) => render_quant("exists", vars, p),
        F::Forall(vars, p) => render_quant("forall", vars, p),
    }
}

fn render_nary(op: &str, ps: &[PresburgerFormula]) -> String {
    if ps.is_empty() {
        return if op == "and" { "true" } else { "false" }.to_string();
    }
    let inner: Vec<String> = ps.iter().map(render_formula).collect();
    format!("({op} {})", inner.join(" "))
}

fn render_quant(q: &str, vars: &[u32], body: &PresburgerFormula) -> String {
    let binders: Vec<String> = vars.iter().map(|v| format!("(x{v} Int)")).collect();
    format!("({q} ({}) {})", binders.join(" "), render_formula(body))
}

fn render_atom(a: &Atom) -> String {
    match a {
        Atom::Le(e) => format!("(<= {} 0)", render_expr(e)),
        Atom::Eq(e) => format!("(= {} 0)", render_expr(e)),
        // divisibility in pure LIA via an existential multiplier
        Atom::Dvd(d, e) => format!(
            "(exists ((q Int)) (= {} (* {d} q)))",
            render_expr(e)
        ),
        Atom::NDvd(d, e) => format!(
            "(not (exists ((q Int)) (= {} (* {d} q))))",
            render_expr(e)
        ),
    }
}

fn render_expr(e: &LinearExpr) -> String {
    let mut parts: Vec<String> = Vec::new();
    for (v, c) in &e.terms {
        parts.push(if *c == 1 {
            format!("x{v}")
        } else {
            format!("(* {c} x{v})")
        });
    }
    if e.constant != 0 || parts.is_empty() {
        parts.push(e.constant.to_string());
    }
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        format!("(+ {})", parts.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unsat_conjunction() {
        // exists x. x >= 0 and x < 0
        let mut fb = FormulaBuilder::new();
        let x = fb.fresh();
        let f = PresburgerFormula::exists(
            vec![x],
            PresburgerFormula::and(vec![
                PresburgerFormula::ge_zero(x),
                PresburgerFormula::lt(LinearExpr::var(x), LinearExpr::constant(0)),
            ]),
        );
        assert!(!decide(&f).unwrap());
    }

    #[test]
    fn parity_sentence() {
        // forall x. exists y. x = 2y or x = 2y + 1
        let mut fb = FormulaBuilder::new();
        let x = fb.fresh();
        let y = fb.fresh();
        let mut two_y = LinearExpr::constant(0);
        two_y.add_term(y, 2);
        let mut two_y1 = two_y.clone();
        two_y1.constant = 1;
        let body = PresburgerFormula::or(vec![
            PresburgerFormula::eq(LinearExpr::var(x), two_y),
            PresburgerFormula::eq(LinearExpr::var(x), two_y1),
        ]);
        let f = PresburgerFormula::forall(
            vec![x],
            PresburgerFormula::exists(vec![y], body),
        );
        assert!(decide(&f).unwrap());
        // and the negation is false
        let neg = PresburgerFormula::not(PresburgerFormula::forall(
            vec![x],
            PresburgerFormula::exists(vec![y], {
                let mut two_y = LinearExpr::constant(0);
                two_y.add_term(y, 2);
                PresburgerFormula::eq(LinearExpr::var(x), two_y)
            }),
        ));
        assert!(decide(&neg).unwrap());
    }

    #[test]
    fn divisibility_via_scaling() {
        // exists x. 3x = 7 is false; exists x. 3x = 9 is true
        let mut fb = FormulaBuilder::new();
        let x = fb.fresh();
        let mut three_x = LinearExpr::constant(0);
        three_x.add_term(x, 3);
        let f7 = PresburgerFormula::exists(
            vec![x],
            PresburgerFormula::eq(three_x.clone(), LinearExpr::constant(7)),
        );
        assert!(!decide(&f7).unwrap());
        let f9 = PresburgerFormula::exists(
            vec![x],
            PresburgerFormula::eq(three_x, LinearExpr::constant(9)),
        );
        assert!(decide(&f9).unwrap());
    }

    #[test]
    fn bounded_interval_with_constraint() {
        // exists x. 0 <= x and x <= 5 and x = 3
        let mut fb = FormulaBuilder::new();
        let x = fb.fresh();
        let f = PresburgerFormula::exists(
            vec![x],
            PresburgerFormula::and(vec![
                PresburgerFormula::ge_zero(x),
                PresburgerFormula::le(LinearExpr::var(x), LinearExpr::constant(5)),
                PresburgerFormula::eq(LinearExpr::var(x), LinearExpr::constant(3)),
            ]),
        );
        assert!(decide(&f).unwrap());
    }

    #[test]
    fn resource_limit_is_distinct() {
        // a formula with a non-unit coefficient forces Cooper expansion,
        // which must abort under a budget of one atom
        let mut fb = FormulaBuilder::new();
        let x = fb.fresh();
        let y = fb.fresh();
        let mut e = LinearExpr::constant(0);
        e.add_term(x, 2);
        e.add_term(y, -1);
        let f = PresburgerFormula::forall(
            vec![y],
            PresburgerFormula::exists(vec![x], PresburgerFormula::eq(e, LinearExpr::constant(0))),
        );
        let err = decide_with_limit(&f, 1);
        assert!(err.is_err());
        // with a sane budget it decides: not every y is even
        assert!(!decide(&f).unwrap());
    }

    #[test]
    fn smtlib_rendering_shape() {
        let mut fb = FormulaBuilder::new();
        let x = fb.fresh();
        let f = PresburgerFormula::exists(
            vec![x],
            PresburgerFormula::and(vec![
                PresburgerFormula::ge_zero(x),
                PresburgerFormula::Atom(Atom::Dvd(2, LinearExpr::var(x))),
            ]),
        );
        let script = to_smtlib(&f);
        assert!(script.starts_with("(set-logic LIA)"));
        assert!(script.contains("(assert (not (exists ((x0 Int))"));
        assert!(script.trim_end().ends_with("(check-sat)"));
    }
}
