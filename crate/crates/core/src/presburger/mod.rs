//! Semilinear sets over the tag alphabet and a decision procedure for
//! Presburger sentences, used to decide pattern inclusion.

mod formula;
mod oracle;

pub use formula::{
    decide, decide_with_limit, to_smtlib, FormulaBuilder, PresburgerFormula, ResourceExhausted,
    DEFAULT_ATOM_LIMIT,
};
pub use oracle::{oracle_inclusion_bounded, OracleVerdict};

/// A linear set: a base vector plus non-negative combinations of period
/// vectors. Zero periods are dropped and duplicates removed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LinearSet {
    pub base: Vec<u64>,
    pub periods: Vec<Vec<u64>>,
}

impl LinearSet {
    pub fn new(base: Vec<u64>, periods: Vec<Vec<u64>>) -> Self {
        let dim = base.len();
        let mut kept: Vec<Vec<u64>> = Vec::new();
        for p in periods {
            assert_eq!(p.len(), dim, "period dimension mismatch");
            if p.iter().all(|&x| x == 0) {
                continue;
            }
            if !kept.contains(&p) {
                kept.push(p);
            }
        }
        kept.sort();
        LinearSet { base, periods: kept }
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }
}

/// A finite union of linear sets, all of the same dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemilinearSet {
    dim: usize,
    pub components: Vec<LinearSet>,
}

impl SemilinearSet {
    /// The empty set.
    pub fn empty(dim: usize) -> Self {
        SemilinearSet {
            dim,
            components: Vec::new(),
        }
    }

    /// The singleton containing only the zero vector (the empty multiset).
    pub fn zero_point(dim: usize) -> Self {
        SemilinearSet::point(vec![0; dim])
    }

    /// The singleton containing exactly `v`.
    pub fn point(v: Vec<u64>) -> Self {
        let dim = v.len();
        SemilinearSet {
            dim,
            components: vec![LinearSet::new(v, vec![])],
        }
    }

    pub fn from_components(dim: usize, components: Vec<LinearSet>) -> Self {
        let mut kept: Vec<LinearSet> = Vec::new();
        for c in components {
            assert_eq!(c.dim(), dim, "component dimension mismatch");
            if !kept.contains(&c) {
                kept.push(c);
            }
        }
        kept.sort();
        SemilinearSet {
            dim,
            components: kept,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Exact membership test, by depth-first search over period multiples.
    pub fn contains(&self, v: &[u64]) -> bool {
        assert_eq!(v.len(), self.dim, "vector dimension mismatch");
        self.components.iter().any(|c| linear_contains(c, v))
    }
}

fn linear_contains(c: &LinearSet, v: &[u64]) -> bool {
    // remaining = v - base must be a non-negative combination of periods
    let mut remaining = Vec::with_capacity(v.len());
    for (x, b) in v.iter().zip(&c.base) {
        match x.checked_sub(*b) {
            Some(d) => remaining.push(d),
            None => return false,
        }
    }
    combo_exists(&remaining, &c.periods)
}

fn combo_exists(target: &[u64], periods: &[Vec<u64>]) -> bool {
    if target.iter().all(|&x| x == 0) {
        return true;
    }
    let Some((p, rest)) = periods.split_first() else {
        return false;
    };
    // max multiplicity of p is bounded by the smallest ratio over its
    // non-zero coordinates
    let mut max_k = u64::MAX;
    for (t, q) in target.iter().zip(p) {
        if *q > 0 {
            max_k = max_k.min(t / q);
        }
    }
    if max_k == u64::MAX {
        // p is all zeros; excluded at construction
        return combo_exists(target, rest);
    }
    for k in 0..=max_k {
        let reduced: Vec<u64> = target
            .iter()
            .zip(p)
            .map(|(t, q)| t - k * q)
            .collect();
        if combo_exists(&reduced, rest) {
            return true;
        }
    }
    false
}

/// Union of two semilinear sets over the same alphabet.
pub fn sls_union(a: &SemilinearSet, b: &SemilinearSet) -> SemilinearSet {
    assert_eq!(a.dim, b.dim, "alphabet mismatch");
    let mut components = a.components.clone();
    components.extend(b.components.clone());
    SemilinearSet::from_components(a.dim, components)
}

/// Pointwise multiset union (Minkowski sum): bases add, periods union.
pub fn sls_sum(a: &SemilinearSet, b: &SemilinearSet) -> SemilinearSet {
    assert_eq!(a.dim, b.dim, "alphabet mismatch");
    let mut components = Vec::new();
    for ca in &a.components {
        for cb in &b.components {
            let base = ca.base.iter().zip(&cb.base).map(|(x, y)| x + y).collect();
            let mut periods = ca.periods.clone();
            periods.extend(cb.periods.clone());
            components.push(LinearSet::new(base, periods));
        }
    }
    SemilinearSet::from_components(a.dim, components)
}

/// Kleene star: any number of concatenated copies, including zero.
pub fn sls_star(a: &SemilinearSet) -> SemilinearSet {
    let zero = SemilinearSet::zero_point(a.dim);
    if a.is_empty() {
        return zero;
    }
    // star of one linear set {b; P} is {0} u {b; P u {b}}; star of a union
    // is the sum of the component stars, together with {0}
    let mut acc = zero.clone();
    for c in &a.components {
        let mut periods = c.periods.clone();
        periods.push(c.base.clone());
        let single = SemilinearSet::from_components(
            a.dim,
            vec![
                LinearSet::new(vec![0; a.dim], vec![]),
                LinearSet::new(c.base.clone(), periods),
            ],
        );
        acc = sls_sum(&acc, &single);
    }
    sls_union(&acc, &zero)
}

/// Inclusion of semilinear sets, decided by quantifier elimination over the
/// membership sentence.
pub fn sls_inclusion(a: &SemilinearSet, b: &SemilinearSet) -> Result<bool, ResourceExhausted> {
    assert_eq!(a.dim, b.dim, "alphabet mismatch");
    // For each component of a: forall coefficients n >= 0, the generated
    // vector is a member of b. Substituting the generated vector avoids
    // quantifying over the vector itself.
    for comp in &a.components {
        let sentence = component_inclusion_sentence(comp, b);
        if !decide(&sentence)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The sentence "every vector of the linear set `comp` lies in `b`".
pub fn component_inclusion_sentence(comp: &LinearSet, b: &SemilinearSet) -> PresburgerFormula {
    let mut fb = FormulaBuilder::new();
    let n_vars: Vec<u32> = comp.periods.iter().map(|_| fb.fresh()).collect();
    let dim = comp.dim();

    let mut disjuncts = Vec::new();
    for target in &b.components {
        let m_vars: Vec<u32> = target.periods.iter().map(|_| fb.fresh()).collect();
        let mut conj = Vec::new();
        for m in &m_vars {
            conj.push(PresburgerFormula::ge_zero(*m));
        }
        for d in 0..dim {
            // base_a[d] + sum n_i * P[i][d] = base_b[d] + sum m_j * Q[j][d]
            let mut lhs = FormulaBuilder::linear(comp.base[d] as i64);
            for (i, p) in comp.periods.iter().enumerate() {
                lhs.add_term(n_vars[i], p[d] as i64);
            }
            let mut rhs = FormulaBuilder::linear(target.base[d] as i64);
            for (j, q) in target.periods.iter().enumerate() {
                rhs.add_term(m_vars[j], q[d] as i64);
            }
            conj.push(PresburgerFormula::eq(lhs, rhs));
        }
        disjuncts.push(PresburgerFormula::exists(
            m_vars,
            PresburgerFormula::and(conj),
        ));
    }

    let membership = PresburgerFormula::or(disjuncts);
    let mut guards: Vec<PresburgerFormula> =
        n_vars.iter().map(|n| PresburgerFormula::ge_zero(*n)).collect();
    let body = if guards.is_empty() {
        membership
    } else {
        guards.push(membership);
        // forall n >= 0 -> membership, i.e. not exists n >= 0 and not membership
        let last = guards.pop().unwrap();
        PresburgerFormula::implies(PresburgerFormula::and(guards), last)
    };
    PresburgerFormula::forall(n_vars, body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sls(components: Vec<(Vec<u64>, Vec<Vec<u64>>)>, dim: usize) -> SemilinearSet {
        SemilinearSet::from_components(
            dim,
            components
                .into_iter()
                .map(|(b, p)| LinearSet::new(b, p))
                .collect(),
        )
    }

    #[test]
    fn union_identity_and_dedup() {
        let empty = SemilinearSet::empty(2);
        let s = sls(vec![(vec![1, 0], vec![])], 2);
        assert_eq!(sls_union(&empty, &s), s);
        // {[m]} u {[m]} deduplicates
        assert_eq!(sls_union(&s, &s), s);
        // {[]} u {[m,n]} has both points
        let u = sls_union(
            &SemilinearSet::zero_point(2),
            &SemilinearSet::point(vec![1, 1]),
        );
        assert!(u.contains(&[0, 0]) && u.contains(&[1, 1]));
    }

    #[test]
    fn sum_unit_and_annihilator() {
        let s = sls(vec![(vec![1, 0], vec![vec![0, 1]])], 2);
        let unit = SemilinearSet::zero_point(2);
        assert_eq!(sls_sum(&unit, &s), s);
        let empty = SemilinearSet::empty(2);
        assert!(sls_sum(&empty, &s).is_empty());
        // {[m]} . {[n]} = {[m,n]}
        let m = SemilinearSet::point(vec![1, 0]);
        let n = SemilinearSet::point(vec![0, 1]);
        let mn = sls_sum(&m, &n);
        assert!(mn.contains(&[1, 1]));
        assert!(!mn.contains(&[1, 0]));
    }

    #[test]
    fn star_matches_iterated_definition() {
        // star of empty and of {[]} is {[]}
        assert_eq!(sls_star(&SemilinearSet::empty(1)), SemilinearSet::zero_point(1));
        assert_eq!(
            sls_star(&SemilinearSet::zero_point(1)),
            SemilinearSet::zero_point(1)
        );
        // star({[m]}): enumerate against the infinite-union definition up to
        // 6 copies
        let m = SemilinearSet::point(vec![1]);
        let star = sls_star(&m);
        for k in 0..=6u64 {
            assert!(star.contains(&[k]), "k={k}");
        }
        // star over two dimensions mixes copies of each component
        let s = sls(vec![(vec![1, 0], vec![]), (vec![0, 2], vec![])], 2);
        let star = sls_star(&s);
        for a in 0..=4u64 {
            for b in 0..=4u64 {
                let expected = b % 2 == 0;
                assert_eq!(star.contains(&[a, b]), expected, "at [{a},{b}]");
            }
        }
    }

    #[test]
    fn inclusion_basics() {
        let s = sls(vec![(vec![0, 0], vec![vec![1, 0]])], 2);
        assert!(sls_inclusion(&s, &s).unwrap());
        // *m included in *(m) u points with n
        let bigger = sls(
            vec![(vec![0, 0], vec![vec![1, 0], vec![0, 1]])],
            2,
        );
        assert!(sls_inclusion(&s, &bigger).unwrap());
        assert!(!sls_inclusion(&bigger, &s).unwrap());
        // {2m} not included in {m}
        let two = SemilinearSet::point(vec![2]);
        let one = SemilinearSet::point(vec![1]);
        assert!(!sls_inclusion(&two, &one).unwrap());
        // empty included in anything
        assert!(sls_inclusion(&SemilinearSet::empty(1), &one).unwrap());
    }

    #[test]
    fn membership_monotone_under_added_periods() {
        let base = LinearSet::new(vec![1, 1], vec![vec![1, 0]]);
        let more = LinearSet::new(vec![1, 1], vec![vec![1, 0], vec![0, 3]]);
        let a = SemilinearSet::from_components(2, vec![base]);
        let b = SemilinearSet::from_components(2, vec![more]);
        for x in 0..5u64 {
            for y in 0..5u64 {
                if a.contains(&[x, y]) {
                    assert!(b.contains(&[x, y]));
                }
            }
        }
    }
}
