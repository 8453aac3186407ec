//! Mailbox patterns: commutative regular expressions over message tags.
//!
//! Patterns are kept in a canonical form: `+` and `.` nodes are flattened,
//! sorted, and have their unit/annihilator laws applied eagerly, so derived
//! structural equality coincides with equality up to associativity and
//! commutativity. Full semantic equivalence goes through [`includes`] in
//! both directions, which is decided over the Parikh image by the
//! `presburger` module.

use std::collections::BTreeSet;

use crate::presburger::{self, SemilinearSet};

/// A pattern variable, generated during constraint generation and resolved
/// by the solver.
pub type PatVar = u32;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pattern {
    /// The unreliable mailbox: no valid configuration.
    Zero,
    /// The empty mailbox.
    One,
    /// A single message.
    Tag(String),
    /// Choice between configurations. Operands are flattened, sorted, and
    /// deduplicated (choice is idempotent).
    Plus(Vec<Pattern>),
    /// Unordered composition. Operands are flattened and sorted.
    Dot(Vec<Pattern>),
    /// Zero or more copies.
    Star(Box<Pattern>),
    Var(PatVar),
}

impl Pattern {
    pub fn tag(name: impl Into<String>) -> Pattern {
        Pattern::Tag(name.into())
    }

    /// Choice, with `0 + E = E`, flattening, sorting, and deduplication.
    pub fn plus(a: Pattern, b: Pattern) -> Pattern {
        let mut parts = Vec::new();
        for p in [a, b] {
            match p {
                Pattern::Zero => {}
                Pattern::Plus(ps) => parts.extend(ps),
                other => parts.push(other),
            }
        }
        let set: BTreeSet<Pattern> = parts.into_iter().collect();
        let mut parts: Vec<Pattern> = set.into_iter().collect();
        match parts.len() {
            0 => Pattern::Zero,
            1 => parts.pop().unwrap(),
            _ => Pattern::Plus(parts),
        }
    }

    /// Composition, with `1 . E = E`, `0 . E = 0`, flattening and sorting.
    pub fn dot(a: Pattern, b: Pattern) -> Pattern {
        let mut parts = Vec::new();
        for p in [a, b] {
            match p {
                Pattern::Zero => return Pattern::Zero,
                Pattern::One => {}
                Pattern::Dot(ps) => parts.extend(ps),
                other => parts.push(other),
            }
        }
        parts.sort();
        match parts.len() {
            0 => Pattern::One,
            1 => parts.pop().unwrap(),
            _ => Pattern::Dot(parts),
        }
    }

    /// Replication, with `*0 = *1 = 1` and `**E = *E`.
    pub fn star(e: Pattern) -> Pattern {
        match e {
            Pattern::Zero | Pattern::One => Pattern::One,
            s @ Pattern::Star(_) => s,
            other => Pattern::Star(Box::new(other)),
        }
    }

    pub fn plus_all(parts: impl IntoIterator<Item = Pattern>) -> Pattern {
        parts
            .into_iter()
            .fold(Pattern::Zero, |acc, p| Pattern::plus(acc, p))
    }

    pub fn dot_all(parts: impl IntoIterator<Item = Pattern>) -> Pattern {
        parts
            .into_iter()
            .fold(Pattern::One, |acc, p| Pattern::dot(acc, p))
    }

    pub fn is_closed(&self) -> bool {
        match self {
            Pattern::Zero | Pattern::One | Pattern::Tag(_) => true,
            Pattern::Var(_) => false,
            Pattern::Plus(ps) | Pattern::Dot(ps) => ps.iter().all(Pattern::is_closed),
            Pattern::Star(p) => p.is_closed(),
        }
    }

    /// All tags occurring in the pattern, sorted.
    pub fn tags(&self) -> BTreeSet<String> {
        let mut acc = BTreeSet::new();
        self.collect_tags(&mut acc);
        acc
    }

    fn collect_tags(&self, acc: &mut BTreeSet<String>) {
        match self {
            Pattern::Tag(t) => {
                acc.insert(t.clone());
            }
            Pattern::Plus(ps) | Pattern::Dot(ps) => {
                for p in ps {
                    p.collect_tags(acc);
                }
            }
            Pattern::Star(p) => p.collect_tags(acc),
            _ => {}
        }
    }

    /// All pattern variables occurring in the pattern.
    pub fn vars(&self) -> BTreeSet<PatVar> {
        let mut acc = BTreeSet::new();
        self.collect_vars(&mut acc);
        acc
    }

    fn collect_vars(&self, acc: &mut BTreeSet<PatVar>) {
        match self {
            Pattern::Var(v) => {
                acc.insert(*v);
            }
            Pattern::Plus(ps) | Pattern::Dot(ps) => {
                for p in ps {
                    p.collect_vars(acc);
                }
            }
            Pattern::Star(p) => p.collect_vars(acc),
            _ => {}
        }
    }

    /// Substitute patterns for variables. Variables absent from the map are
    /// left in place.
    pub fn subst(&self, map: &impl Fn(PatVar) -> Option<Pattern>) -> Pattern {
        match self {
            Pattern::Var(v) => map(*v).unwrap_or(Pattern::Var(*v)),
            Pattern::Plus(ps) => Pattern::plus_all(ps.iter().map(|p| p.subst(map))),
            Pattern::Dot(ps) => Pattern::dot_all(ps.iter().map(|p| p.subst(map))),
            Pattern::Star(p) => Pattern::star(p.subst(map)),
            other => other.clone(),
        }
    }

    /// Concrete syntax, paste-able back into source: `0`, `1`, `+`, `.`, `*`.
    /// Pattern variables (not part of the surface syntax) render as `$n`.
    pub fn render(&self) -> String {
        self.render_prec(0)
    }

    // precedence: + = 0, . = 1, * = 2
    fn render_prec(&self, prec: u8) -> String {
        let (s, my_prec) = match self {
            Pattern::Zero => ("0".to_string(), 3),
            Pattern::One => ("1".to_string(), 3),
            Pattern::Tag(t) => (t.clone(), 3),
            Pattern::Var(v) => (format!("${v}"), 3),
            Pattern::Plus(ps) => (
                ps.iter()
                    .map(|p| p.render_prec(1))
                    .collect::<Vec<_>>()
                    .join(" + "),
                0,
            ),
            Pattern::Dot(ps) => (
                ps.iter()
                    .map(|p| p.render_prec(2))
                    .collect::<Vec<_>>()
                    .join("."),
                1,
            ),
            Pattern::Star(p) => (format!("*{}", p.render_prec(2)), 2),
        };
        if my_prec < prec {
            format!("({s})")
        } else {
            s
        }
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.render())
    }
}

/// The Parikh image of a closed pattern over the given alphabet: the
/// set-of-multisets semantics, represented as a semilinear set.
///
/// Every tag of `e` must be in `alphabet`.
pub fn parikh(e: &Pattern, alphabet: &[String]) -> Result<SemilinearSet, OpenPattern> {
    let dim = alphabet.len();
    match e {
        Pattern::Zero => Ok(SemilinearSet::empty(dim)),
        Pattern::One => Ok(SemilinearSet::zero_point(dim)),
        Pattern::Tag(t) => {
            let idx = alphabet
                .iter()
                .position(|a| a == t)
                .unwrap_or_else(|| panic!("tag {t} not in alphabet"));
            let mut v = vec![0u64; dim];
            v[idx] = 1;
            Ok(SemilinearSet::point(v))
        }
        Pattern::Plus(ps) => {
            let mut acc = SemilinearSet::empty(dim);
            for p in ps {
                acc = presburger::sls_union(&acc, &parikh(p, alphabet)?);
            }
            Ok(acc)
        }
        Pattern::Dot(ps) => {
            let mut acc = SemilinearSet::zero_point(dim);
            for p in ps {
                acc = presburger::sls_sum(&acc, &parikh(p, alphabet)?);
            }
            Ok(acc)
        }
        Pattern::Star(p) => Ok(presburger::sls_star(&parikh(p, alphabet)?)),
        Pattern::Var(v) => Err(OpenPattern(*v)),
    }
}

/// Error: an operation requiring a closed pattern met variable `$n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpenPattern(pub PatVar);

impl std::fmt::Display for OpenPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "operation on open pattern (variable ${})", self.0)
    }
}

/// The pattern residual `e / m`: what remains of `e` after one message `m`
/// is consumed. A commutative Brzozowski derivative. `*E / m` is
/// `(E/m) . *E`.
pub fn residual(e: &Pattern, m: &str) -> Result<Pattern, OpenPattern> {
    match e {
        Pattern::Zero | Pattern::One => Ok(Pattern::Zero),
        Pattern::Tag(t) => Ok(if t == m { Pattern::One } else { Pattern::Zero }),
        Pattern::Plus(ps) => {
            let mut acc = Pattern::Zero;
            for p in ps {
                acc = Pattern::plus(acc, residual(p, m)?);
            }
            Ok(acc)
        }
        Pattern::Dot(ps) => {
            // (x1 . ... . xn) / m = sum over i of x1 . .. (xi/m) .. . xn
            let mut acc = Pattern::Zero;
            for i in 0..ps.len() {
                let mut factors: Vec<Pattern> = Vec::with_capacity(ps.len());
                for (j, p) in ps.iter().enumerate() {
                    if i == j {
                        factors.push(residual(p, m)?);
                    } else {
                        factors.push(p.clone());
                    }
                }
                acc = Pattern::plus(acc, Pattern::dot_all(factors));
            }
            Ok(acc)
        }
        Pattern::Star(p) => Ok(Pattern::dot(residual(p, m)?, Pattern::star((**p).clone()))),
        Pattern::Var(v) => Err(OpenPattern(*v)),
    }
}

fn joint_alphabet(e: &Pattern, f: &Pattern) -> Vec<String> {
    let mut tags = e.tags();
    tags.extend(f.tags());
    tags.into_iter().collect()
}

/// Pattern inclusion `e <= f`: every multiset in the semantics of `e` is in
/// the semantics of `f`. Both patterns must be closed.
pub fn includes(e: &Pattern, f: &Pattern) -> Result<bool, IncludesError> {
    if e == f {
        return Ok(true);
    }
    let alphabet = joint_alphabet(e, f);
    let a = parikh(e, &alphabet).map_err(IncludesError::Open)?;
    let b = parikh(f, &alphabet).map_err(IncludesError::Open)?;
    presburger::sls_inclusion(&a, &b).map_err(IncludesError::Resource)
}

/// Semantic equivalence: inclusion in both directions.
pub fn equivalent(e: &Pattern, f: &Pattern) -> Result<bool, IncludesError> {
    Ok(includes(e, f)? && includes(f, e)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IncludesError {
    Open(OpenPattern),
    Resource(presburger::ResourceExhausted),
}

impl std::fmt::Display for IncludesError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IncludesError::Open(o) => o.fmt(f),
            IncludesError::Resource(r) => r.fmt(f),
        }
    }
}

/// Pattern-normal-form check: `f` must be a disjunction of literals, each
/// `0`, `1`, or `m . F` with `F` equivalent to `e / m`.
pub fn pnf_check(e: &Pattern, f: &Pattern) -> Result<bool, IncludesError> {
    let literals: Vec<&Pattern> = match f {
        Pattern::Plus(ps) => ps.iter().collect(),
        other => vec![other],
    };
    for lit in literals {
        if !pnf_literal(e, lit)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn pnf_literal(e: &Pattern, lit: &Pattern) -> Result<bool, IncludesError> {
    match lit {
        Pattern::Zero | Pattern::One => Ok(true),
        Pattern::Tag(m) => {
            // a bare tag is m . 1
            let r = residual(e, m).map_err(IncludesError::Open)?;
            equivalent(&r, &Pattern::One)
        }
        Pattern::Dot(factors) => {
            // accept if some tag factor m has the remaining product
            // equivalent to e / m
            for (i, fac) in factors.iter().enumerate() {
                if let Pattern::Tag(m) = fac {
                    let rest = Pattern::dot_all(
                        factors
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != i)
                            .map(|(_, p)| p.clone()),
                    );
                    let r = residual(e, m).map_err(IncludesError::Open)?;
                    if equivalent(&rest, &r)? {
                        return Ok(true);
                    }
                }
            }
            Ok(false)
        }
        _ => Ok(false),
    }
}

/// Capability of a mailbox type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Capability {
    Send,
    Receive,
}

impl std::fmt::Display for Capability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Capability::Send => "!",
            Capability::Receive => "?",
        })
    }
}

/// Classification of a closed mailbox type per the standard predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    /// Must be used: not a subtype of `!1`.
    pub relevant: bool,
    /// Can be received from: not a receive capability over the empty set.
    pub reliable: bool,
    /// Can be sent to: not a send capability over the empty set.
    pub usable: bool,
}

/// Classify a closed capability/pattern pair.
pub fn classify(cap: Capability, pattern: &Pattern) -> Result<Classification, IncludesError> {
    let empty_sem = includes(pattern, &Pattern::Zero)?;
    match cap {
        Capability::Send => Ok(Classification {
            // !E <= !1 iff 1 <= E (contravariant)
            relevant: !includes(&Pattern::One, pattern)?,
            reliable: true,
            usable: !empty_sem,
        }),
        Capability::Receive => Ok(Classification {
            relevant: true,
            // ?E <= ?0 iff E <= 0
            reliable: !empty_sem,
            usable: true,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presburger::oracle_inclusion_bounded;

    fn t(s: &str) -> Pattern {
        Pattern::tag(s)
    }

    #[test]
    fn smart_constructors_normalise() {
        // 1 + 0 + (m . n) and 1 + (n . m) are identified
        let a = Pattern::plus(
            Pattern::plus(Pattern::One, Pattern::Zero),
            Pattern::dot(t("m"), t("n")),
        );
        let b = Pattern::plus(Pattern::One, Pattern::dot(t("n"), t("m")));
        assert_eq!(a, b);
        // unit laws
        assert_eq!(Pattern::dot(Pattern::One, t("m")), t("m"));
        assert_eq!(Pattern::dot(Pattern::Zero, t("m")), Pattern::Zero);
        assert_eq!(Pattern::plus(Pattern::Zero, t("m")), t("m"));
        // star collapses
        assert_eq!(Pattern::star(Pattern::Zero), Pattern::One);
        assert_eq!(
            Pattern::star(Pattern::star(t("m"))),
            Pattern::star(t("m"))
        );
    }

    #[test]
    fn parikh_of_example_patterns() {
        let alphabet = vec!["m".to_string(), "n".to_string()];
        // 1 + 0 + (m.n) has semantics { [], [m,n] }
        let p = Pattern::plus(
            Pattern::plus(Pattern::One, Pattern::Zero),
            Pattern::dot(t("m"), t("n")),
        );
        let s = parikh(&p, &alphabet).unwrap();
        assert!(s.contains(&[0, 0]));
        assert!(s.contains(&[1, 1]));
        assert!(!s.contains(&[1, 0]));
        // 0 is empty
        let z = parikh(&Pattern::Zero, &alphabet).unwrap();
        assert!(z.is_empty());
        // *m: multiplicities 0..6 all members, and nothing with an n
        let star = parikh(&Pattern::star(t("m")), &alphabet).unwrap();
        for k in 0..=6 {
            assert!(star.contains(&[k, 0]), "k={k}");
        }
        assert!(!star.contains(&[0, 1]));
    }

    #[test]
    fn residual_rules() {
        assert_eq!(residual(&t("m"), "m").unwrap(), Pattern::One);
        assert_eq!(residual(&Pattern::One, "m").unwrap(), Pattern::Zero);
        assert_eq!(residual(&t("m"), "n").unwrap(), Pattern::Zero);
        // (m + n) / m = 1 + 0 = 1
        let p = Pattern::plus(t("m"), t("n"));
        assert_eq!(residual(&p, "m").unwrap(), Pattern::One);
        // open pattern is an error
        assert!(residual(&Pattern::Var(0), "m").is_err());
    }

    #[test]
    fn residual_of_star_is_sound() {
        // A in [[*E/m]] iff A + [m] in [[*E]], bounded check
        let e = Pattern::star(Pattern::plus(t("m"), Pattern::dot(t("n"), t("n"))));
        let alphabet = vec!["m".to_string(), "n".to_string()];
        let r = residual(&e, "m").unwrap();
        let se = parikh(&e, &alphabet).unwrap();
        let sr = parikh(&r, &alphabet).unwrap();
        for a in 0..=4u64 {
            for b in 0..=4u64 {
                let with_m = [a + 1, b];
                assert_eq!(
                    sr.contains(&[a, b]),
                    se.contains(&with_m),
                    "at [{a},{b}]"
                );
            }
        }
    }

    #[test]
    fn includes_examples() {
        // Reply <= Reply . 1
        let reply = t("Reply");
        let rhs = Pattern::dot(t("Reply"), Pattern::One);
        assert!(includes(&reply, &rhs).unwrap());
        // reflexive
        let e = Pattern::plus(t("m"), Pattern::star(t("n")));
        assert!(includes(&e, &e).unwrap());
        // *m . n <= *(m + n)
        let lhs = Pattern::dot(Pattern::star(t("m")), t("n"));
        let rhs = Pattern::star(Pattern::plus(t("m"), t("n")));
        assert!(includes(&lhs, &rhs).unwrap());
        // and confirmed by the bounded oracle
        let alphabet = vec!["m".to_string(), "n".to_string()];
        let a = parikh(&lhs, &alphabet).unwrap();
        let b = parikh(&rhs, &alphabet).unwrap();
        assert!(oracle_inclusion_bounded(&a, &b, 6).holds);
        // m . m is not included in m
        let mm = Pattern::dot(t("m"), t("m"));
        assert!(!includes(&mm, &t("m")).unwrap());
    }

    #[test]
    fn pnf_examples() {
        // (Reply, Reply . 1) is in PNF
        let e = t("Reply");
        let f = Pattern::dot(t("Reply"), Pattern::One);
        assert!(pnf_check(&e, &f).unwrap());
        // 0 is a literal for any e
        assert!(pnf_check(&e, &Pattern::Zero).unwrap());
        // (m, n . 1) with m != n: n.1 normalises to the bare tag n, and
        // 1 is not equivalent to m/n = 0
        let f = Pattern::dot(t("n"), Pattern::One);
        assert!(!pnf_check(&t("m"), &f).unwrap());
    }

    #[test]
    fn classify_examples() {
        // !1 is irrelevant but usable
        let c = classify(Capability::Send, &Pattern::One).unwrap();
        assert!(!c.relevant);
        assert!(c.usable);
        // ?0 is unreliable
        let c = classify(Capability::Receive, &Pattern::Zero).unwrap();
        assert!(!c.reliable);
        // !(Put . Get) is relevant and usable
        let c = classify(Capability::Send, &Pattern::dot(t("Put"), t("Get"))).unwrap();
        assert!(c.relevant);
        assert!(c.usable);
        // !0 is unusable
        let c = classify(Capability::Send, &Pattern::Zero).unwrap();
        assert!(!c.usable);
    }

    #[test]
    fn render_round_trips_priorities() {
        let p = Pattern::dot(
            t("Inside"),
            Pattern::dot(t("Prepared"), Pattern::star(t("Want"))),
        );
        assert_eq!(p.render(), "Inside.Prepared.*Want");
        let q = Pattern::plus(t("Prepare"), Pattern::One);
        assert_eq!(q.render(), "1 + Prepare");
        let r = Pattern::star(Pattern::plus(t("m"), t("n")));
        assert_eq!(r.render(), "*(m + n)");
    }
}
