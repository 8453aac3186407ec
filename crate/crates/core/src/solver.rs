//! Constraint solving: group pattern bounds, compute closed-form least
//! solutions over the commutative Kleene algebra, then decide the residual
//! closed inclusions over Presburger arithmetic.

use indexmap::IndexMap;

use crate::diag::{Diagnostic, Phase};
use crate::patterns::{self, parikh, Pattern};
use crate::presburger::{self, oracle_inclusion_bounded};
use crate::typecheck::{Constraint, ConstraintSet, Origin};

/// A substitution from pattern variables to closed patterns.
pub type Substitution = IndexMap<u32, Pattern>;

/// A successful solve: a usable substitution covering every variable, plus
/// the closed residual constraints with their verdicts (all true).
#[derive(Debug, Clone)]
pub struct Solution {
    pub assignment: Substitution,
    pub residuals: Vec<(Constraint, bool)>,
}

/// Why a constraint set has no usable solution.
#[derive(Debug, Clone)]
pub enum SolveError {
    /// A closed constraint failed. Carries the constraint after
    /// substitution and a counterexample multiset when the bounded oracle
    /// finds one.
    Unsat {
        constraint: Constraint,
        substituted: Constraint,
        witness: Option<Vec<(String, u64)>>,
    },
    /// Every candidate assignment for an under-constrained variable failed.
    NoCandidate { var: u32, origin: Option<Origin> },
    /// The solution exists but maps a variable to a pattern equivalent to
    /// the unreliable mailbox.
    NotUsable { var: u32, origin: Option<Origin> },
    /// The decision procedure ran out of budget.
    Resource(presburger::ResourceExhausted),
    /// A bound not expressible in the supported closed-form fragment.
    UnsupportedBound { var: u32, detail: String },
}

impl SolveError {
    pub fn to_diagnostic(&self, var_origins: &IndexMap<u32, Origin>) -> Diagnostic {
        match self {
            SolveError::Unsat {
                constraint,
                substituted,
                witness,
            } => {
                let mut msg = format!(
                    "unsatisfiable constraint: {} (from {})",
                    substituted.render(),
                    constraint.render()
                );
                if let Some(w) = witness {
                    let parts: Vec<String> = w
                        .iter()
                        .filter(|(_, n)| *n > 0)
                        .map(|(t, n)| if *n == 1 { t.clone() } else { format!("{n}*{t}") })
                        .collect();
                    let shown = if parts.is_empty() {
                        "the empty mailbox".to_string()
                    } else {
                        format!("[{}]", parts.join(", "))
                    };
                    msg.push_str(&format!("; counterexample mailbox state: {shown}"));
                }
                Diagnostic::error(Phase::Solve, msg)
                    .at(constraint.origin.span)
                    .with_rule(constraint.origin.rule)
                    .with_constraint(substituted.render())
            }
            SolveError::NoCandidate { var, origin } => {
                let mut d = Diagnostic::error(
                    Phase::Solve,
                    format!("no usable pattern for inference variable ${var}"),
                );
                if let Some(o) = origin.as_ref().or_else(|| var_origins.get(var)) {
                    d = d.at(o.span).with_rule(o.rule);
                }
                d
            }
            SolveError::NotUsable { var, origin } => {
                let mut d = Diagnostic::error(
                    Phase::Solve,
                    format!(
                        "inference variable ${var} is forced to the unreliable pattern 0"
                    ),
                );
                if let Some(o) = origin.as_ref().or_else(|| var_origins.get(var)) {
                    d = d.at(o.span).with_rule(o.rule);
                }
                d
            }
            SolveError::Resource(r) => Diagnostic::error(Phase::Solve, r.to_string()),
            SolveError::UnsupportedBound { var, detail } => Diagnostic::error(
                Phase::Solve,
                format!("cannot close the bound for ${var}: {detail}"),
            ),
        }
    }
}

/// Separate pattern bounds (`gamma <= alpha` with a bare variable on the
/// right) from the rest, grouping multiple bounds on one variable by
/// disjunction.
pub fn group_bounds(
    constraints: &ConstraintSet,
) -> (IndexMap<u32, Pattern>, Vec<Constraint>) {
    let mut bounds: IndexMap<u32, Pattern> = IndexMap::new();
    let mut residual = Vec::new();
    for c in constraints.iter() {
        match &c.rhs {
            Pattern::Var(v) => {
                let entry = bounds.entry(*v).or_insert(Pattern::Zero);
                *entry = Pattern::plus(entry.clone(), c.lhs.clone());
            }
            _ => residual.push(c.clone()),
        }
    }
    (bounds, residual)
}

/// Solve a system of pattern bounds by Gaussian elimination over the
/// commutative Kleene algebra. A self-recursive bound
/// `delta + (epsilon . alpha) <= alpha` has least solution
/// `*epsilon . delta`.
pub fn close_form(bounds: &IndexMap<u32, Pattern>) -> Result<Substitution, SolveError> {
    let vars: Vec<u32> = bounds.keys().copied().collect();
    let mut work: IndexMap<u32, Pattern> = bounds.clone();

    // forward elimination in creation order
    for (i, &v) in vars.iter().enumerate() {
        let bound = work[&v].clone();
        let solved = eliminate_self(v, &bound)?;
        work.insert(v, solved.clone());
        for &w in &vars[i + 1..] {
            let updated = work[&w].subst(&|u| (u == v).then(|| solved.clone()));
            work.insert(w, updated);
        }
    }
    // back substitution
    for i in (0..vars.len()).rev() {
        let v = vars[i];
        let mut cur = work[&v].clone();
        for &w in &vars[i + 1..] {
            let img = work[&w].clone();
            cur = cur.subst(&|u| (u == w).then(|| img.clone()));
        }
        work.insert(v, cur);
    }

    // variables not bound here may remain; the caller defaults them
    Ok(work)
}

/// Rewrite `bound <= v` into a form without `v`, applying the least
/// fixed-point rule to linear self-occurrences.
fn eliminate_self(v: u32, bound: &Pattern) -> Result<Pattern, SolveError> {
    if !bound.vars().contains(&v) {
        return Ok(bound.clone());
    }
    // flatten into monomials over `.`
    let monomials: Vec<Pattern> = match bound {
        Pattern::Plus(ps) => ps.clone(),
        other => vec![other.clone()],
    };
    let mut delta = Pattern::Zero; // terms without v
    let mut epsilon = Pattern::Zero; // coefficients of linear v-terms
    for m in monomials {
        let factors: Vec<Pattern> = match &m {
            Pattern::Dot(fs) => fs.clone(),
            other => vec![other.clone()],
        };
        let occurrences = factors
            .iter()
            .filter(|f| matches!(f, Pattern::Var(u) if *u == v))
            .count();
        let nested = factors
            .iter()
            .any(|f| !matches!(f, Pattern::Var(u) if *u == v) && f.vars().contains(&v));
        if nested || occurrences > 1 {
            return Err(SolveError::UnsupportedBound {
                var: v,
                detail: format!("non-linear occurrence in {}", bound.render()),
            });
        }
        if occurrences == 0 {
            delta = Pattern::plus(delta, m);
        } else {
            let rest = Pattern::dot_all(
                factors
                    .into_iter()
                    .filter(|f| !matches!(f, Pattern::Var(u) if *u == v)),
            );
            epsilon = Pattern::plus(epsilon, rest);
        }
    }
    Ok(Pattern::dot(Pattern::star(epsilon), delta))
}

/// Check that no image of the substitution is equivalent to the empty
/// pattern.
pub fn check_usable(assignment: &Substitution) -> Result<(), u32> {
    for (v, p) in assignment {
        let empty = patterns::includes(p, &Pattern::Zero).unwrap_or(false);
        if empty {
            return Err(*v);
        }
    }
    Ok(())
}

/// Solver configuration. The atom limit bounds the Presburger decision
/// procedure per inclusion.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub atom_limit: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            atom_limit: presburger::DEFAULT_ATOM_LIMIT,
        }
    }
}

fn decide_inclusion(
    lhs: &Pattern,
    rhs: &Pattern,
    cfg: &SolverConfig,
) -> Result<bool, SolveError> {
    let alphabet: Vec<String> = {
        let mut tags = lhs.tags();
        tags.extend(rhs.tags());
        tags.into_iter().collect()
    };
    let a = parikh(lhs, &alphabet).expect("closed by construction");
    let b = parikh(rhs, &alphabet).expect("closed by construction");
    for comp in &a.components {
        let sentence = presburger::component_inclusion_sentence(comp, &b);
        match presburger::decide_with_limit(&sentence, cfg.atom_limit) {
            Ok(true) => {}
            Ok(false) => return Ok(false),
            Err(r) => return Err(SolveError::Resource(r)),
        }
    }
    Ok(true)
}

fn residual_of(p: &Pattern, tag: &str) -> Pattern {
    patterns::residual(p, tag).expect("closed by construction")
}

fn witness_for(lhs: &Pattern, rhs: &Pattern) -> Option<Vec<(String, u64)>> {
    let alphabet: Vec<String> = {
        let mut tags = lhs.tags();
        tags.extend(rhs.tags());
        tags.into_iter().collect()
    };
    let a = parikh(lhs, &alphabet).ok()?;
    let b = parikh(rhs, &alphabet).ok()?;
    let verdict = oracle_inclusion_bounded(&a, &b, 8);
    verdict
        .witness
        .map(|w| alphabet.into_iter().zip(w).collect())
}

/// Solve a constraint set: find a usable substitution for every pattern
/// variable, or report why none exists. Every returned solution is
/// re-verified against the original constraints.
pub fn solve(constraints: &ConstraintSet, cfg: &SolverConfig) -> Result<Solution, SolveError> {
    let (bounds, residual) = group_bounds(constraints);
    let mut assignment = close_form(&bounds)?;

    let all_vars = constraints.vars();
    // under-constrained variables: no lower bound at all, or a least
    // solution equivalent to 0 (typically merge-introduced receive
    // variables, bounded only from above)
    let mut defaulted: Vec<u32> = Vec::new();
    for v in &all_vars {
        match assignment.get(v) {
            None => defaulted.push(*v),
            Some(p) => {
                if patterns::includes(p, &Pattern::Zero).unwrap_or(false) {
                    defaulted.push(*v);
                }
            }
        }
    }

    // candidate patterns per defaulted variable: the empty mailbox first,
    // then each upper bound that is closed under the current assignment,
    // then residual quotients of product-shaped constraints
    let mut candidates: IndexMap<u32, Vec<Pattern>> = IndexMap::new();
    for v in &defaulted {
        let mut cands = vec![Pattern::One];
        for c in &residual {
            let upper = c.rhs.subst(&|u| assignment.get(&u).cloned());
            if !upper.is_closed() {
                continue;
            }
            if c.lhs == Pattern::Var(*v) && !cands.contains(&upper) {
                cands.push(upper);
                continue;
            }
            // gamma . v <= delta with tag-only gamma: try delta / gamma
            let factors: Vec<Pattern> = match &c.lhs {
                Pattern::Dot(fs) => fs.clone(),
                other => vec![other.clone()],
            };
            if factors.iter().filter(|f| **f == Pattern::Var(*v)).count() == 1 {
                let others: Vec<&Pattern> =
                    factors.iter().filter(|f| **f != Pattern::Var(*v)).collect();
                if others.iter().all(|f| matches!(f, Pattern::Tag(_))) {
                    let mut quotient = upper.clone();
                    for f in others {
                        let Pattern::Tag(tag) = f else { unreachable!() };
                        quotient = residual_of(&quotient, tag);
                    }
                    if !cands.contains(&quotient) {
                        cands.push(quotient);
                    }
                    if !cands.contains(&upper) {
                        cands.push(upper);
                    }
                }
            }
        }
        candidates.insert(*v, cands);
    }

    let residual_check = |assignment: &Substitution,
                          cfg: &SolverConfig|
     -> Result<Option<Constraint>, SolveError> {
        for c in &residual {
            let lhs = c.lhs.subst(&|u| assignment.get(&u).cloned());
            let rhs = c.rhs.subst(&|u| assignment.get(&u).cloned());
            if !lhs.is_closed() || !rhs.is_closed() {
                continue;
            }
            if !decide_inclusion(&lhs, &rhs, cfg)? {
                return Ok(Some(Constraint {
                    lhs,
                    rhs,
                    origin: c.origin.clone(),
                }));
            }
        }
        Ok(None)
    };

    // depth-first search over candidate assignments
    fn assign_rec(
        vars: &[u32],
        candidates: &IndexMap<u32, Vec<Pattern>>,
        assignment: &mut Substitution,
        check: &dyn Fn(&Substitution) -> Result<Option<Constraint>, SolveError>,
    ) -> Result<Result<(), Option<Constraint>>, SolveError> {
        match vars.split_first() {
            None => {
                let failure = check(assignment)?;
                Ok(match failure {
                    None => Ok(()),
                    Some(c) => Err(Some(c)),
                })
            }
            Some((v, rest)) => {
                let mut last_failure = None;
                for cand in &candidates[v] {
                    assignment.insert(*v, cand.clone());
                    match assign_rec(rest, candidates, assignment, check)? {
                        Ok(()) => return Ok(Ok(())),
                        Err(f) => last_failure = f,
                    }
                }
                assignment.shift_remove(v);
                Ok(Err(last_failure))
            }
        }
    }

    let defaulted_order: Vec<u32> = defaulted.clone();
    let search = assign_rec(
        &defaulted_order,
        &candidates,
        &mut assignment,
        &|a: &Substitution| residual_check(a, cfg),
    )?;
    if let Err(failure) = search {
        return Err(match failure {
            Some(substituted) => {
                let original = constraints
                    .iter()
                    .find(|c| c.origin == substituted.origin)
                    .cloned()
                    .unwrap_or_else(|| substituted.clone());
                let witness = witness_for(&substituted.lhs, &substituted.rhs);
                SolveError::Unsat {
                    constraint: original,
                    substituted,
                    witness,
                }
            }
            None => SolveError::NoCandidate {
                var: defaulted_order.first().copied().unwrap_or(0),
                origin: None,
            },
        });
    }

    // fully close any images that still mention defaulted variables
    let snapshot = assignment.clone();
    for (_, p) in assignment.iter_mut() {
        *p = p.subst(&|u| snapshot.get(&u).cloned());
    }

    // post-hoc re-verification of every constraint under the solution
    let mut residuals = Vec::new();
    for c in constraints.iter() {
        let lhs = c.lhs.subst(&|u| assignment.get(&u).cloned());
        let rhs = c.rhs.subst(&|u| assignment.get(&u).cloned());
        debug_assert!(lhs.is_closed() && rhs.is_closed(), "unsolved variable");
        let holds = decide_inclusion(&lhs, &rhs, cfg)?;
        if !holds {
            let witness = witness_for(&lhs, &rhs);
            return Err(SolveError::Unsat {
                constraint: c.clone(),
                substituted: Constraint {
                    lhs,
                    rhs,
                    origin: c.origin.clone(),
                },
                witness,
            });
        }
        residuals.push((
            Constraint {
                lhs,
                rhs,
                origin: c.origin.clone(),
            },
            true,
        ));
    }

    if let Err(v) = check_usable(&assignment) {
        return Err(SolveError::NotUsable { var: v, origin: None });
    }

    Ok(Solution {
        assignment,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::span::Span;

    fn t(s: &str) -> Pattern {
        Pattern::tag(s)
    }

    fn o() -> Origin {
        Origin::new(Span::new(1, 1), "test")
    }

    fn set(items: Vec<(Pattern, Pattern)>) -> ConstraintSet {
        let mut cs = ConstraintSet::new();
        for (l, r) in items {
            cs.push(l, r, o());
        }
        cs
    }

    #[test]
    fn grouping_splits_bounds_from_residuals() {
        let cs = set(vec![
            (t("m"), Pattern::Var(0)),
            (t("n"), Pattern::Var(0)),
            (Pattern::Var(0), t("m")),
        ]);
        let (bounds, residual) = group_bounds(&cs);
        assert_eq!(bounds.get(&0).unwrap(), &Pattern::plus(t("m"), t("n")));
        assert_eq!(residual.len(), 1);
        // an empty set groups to nothing
        let (b, r) = group_bounds(&ConstraintSet::new());
        assert!(b.is_empty() && r.is_empty());
    }

    #[test]
    fn close_form_non_recursive() {
        let mut bounds = IndexMap::new();
        bounds.insert(0, t("m"));
        let sol = close_form(&bounds).unwrap();
        assert_eq!(sol.get(&0).unwrap(), &t("m"));
    }

    #[test]
    fn close_form_recursive_is_star() {
        // n + (m . a) <= a has least solution *m . n
        let mut bounds = IndexMap::new();
        bounds.insert(
            0,
            Pattern::plus(t("n"), Pattern::dot(t("m"), Pattern::Var(0))),
        );
        let sol = close_form(&bounds).unwrap();
        let expected = Pattern::dot(Pattern::star(t("m")), t("n"));
        assert_eq!(sol.get(&0).unwrap(), &expected);
        // and the solution satisfies the bound, checked with the bounded
        // oracle
        let alphabet = vec!["m".to_string(), "n".to_string()];
        let lhs = Pattern::plus(t("n"), Pattern::dot(t("m"), expected.clone()));
        let a = parikh(&lhs, &alphabet).unwrap();
        let b = parikh(&expected, &alphabet).unwrap();
        assert!(oracle_inclusion_bounded(&a, &b, 6).holds);
    }

    #[test]
    fn close_form_chain_substitutes() {
        // a <= b's bound, b bound by m: both end up closed
        let mut bounds = IndexMap::new();
        bounds.insert(0, Pattern::Var(1));
        bounds.insert(1, t("m"));
        let sol = close_form(&bounds).unwrap();
        assert_eq!(sol.get(&0).unwrap(), &t("m"));
        assert_eq!(sol.get(&1).unwrap(), &t("m"));
    }

    #[test]
    fn solve_join_example() {
        // m . a <= n . m has solution a -> n
        let cs = set(vec![(
            Pattern::dot(t("m"), Pattern::Var(0)),
            Pattern::dot(t("n"), t("m")),
        )]);
        let sol = solve(&cs, &SolverConfig::default()).unwrap();
        assert_eq!(sol.assignment.get(&0).unwrap(), &t("n"));
    }

    #[test]
    fn solve_unsat_reports_witness() {
        // m <= 1 has no solution; witness [m]
        let cs = set(vec![(t("m"), Pattern::One)]);
        match solve(&cs, &SolverConfig::default()) {
            Err(SolveError::Unsat { witness, .. }) => {
                assert_eq!(witness, Some(vec![("m".to_string(), 1)]));
            }
            other => panic!("expected unsat, got {other:?}"),
        }
    }

    #[test]
    fn usable_solution_required() {
        assert!(check_usable(&IndexMap::from([(0u32, t("m"))])).is_ok());
        assert_eq!(check_usable(&IndexMap::from([(0u32, Pattern::Zero)])), Err(0));
        // m . 0 is equivalent to 0 (normalised by construction)
        assert_eq!(
            check_usable(&IndexMap::from([(0u32, Pattern::dot(t("m"), Pattern::Zero))])),
            Err(0)
        );
    }

    #[test]
    fn monotone_under_trivial_constraint() {
        let base = set(vec![(
            Pattern::dot(t("m"), Pattern::Var(0)),
            Pattern::dot(t("n"), t("m")),
        )]);
        let mut extended = set(vec![(
            Pattern::dot(t("m"), Pattern::Var(0)),
            Pattern::dot(t("n"), t("m")),
        )]);
        extended.push(Pattern::One, Pattern::One, o());
        let s1 = solve(&base, &SolverConfig::default()).unwrap();
        let s2 = solve(&extended, &SolverConfig::default()).unwrap();
        assert_eq!(s1.assignment, s2.assignment);
    }

    #[test]
    fn solution_is_reverified() {
        // an upper-bounded variable defaults to 1 and satisfies everything
        let cs = set(vec![(Pattern::Var(0), Pattern::plus(t("m"), Pattern::One))]);
        let sol = solve(&cs, &SolverConfig::default()).unwrap();
        assert_eq!(sol.assignment.get(&0).unwrap(), &Pattern::One);
        assert!(sol.residuals.iter().all(|(_, ok)| *ok));
    }

    #[test]
    fn forced_zero_is_not_usable() {
        // a <= 0 and nothing else: candidates 1 and 0 both fail usability
        // or satisfiability
        let cs = set(vec![(Pattern::Var(0), Pattern::Zero)]);
        match solve(&cs, &SolverConfig::default()) {
            Err(SolveError::NotUsable { var: 0, .. })
            | Err(SolveError::NoCandidate { var: 0, .. }) => {}
            other => panic!("expected a usability failure, got {other:?}"),
        }
    }
}
