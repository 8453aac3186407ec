//! Bounded-enumeration inclusion oracle, independent of the quantifier
//! elimination path. Used as the test oracle and for counterexamples in
//! solver reports.

use super::SemilinearSet;

/// Outcome of a bounded inclusion check: `holds` is a semi-decision (true
/// only means no witness up to the bound); a `witness` is a vector in `a`
/// but not in `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleVerdict {
    pub holds: bool,
    pub witness: Option<Vec<u64>>,
}

/// Enumerate all vectors with total multiplicity at most `bound` and check
/// membership in `a` against membership in `b`.
pub fn oracle_inclusion_bounded(a: &SemilinearSet, b: &SemilinearSet, bound: u64) -> OracleVerdict {
    assert_eq!(a.dim(), b.dim(), "alphabet mismatch");
    let dim = a.dim();
    let mut v = vec![0u64; dim];
    if let Some(w) = search(a, b, &mut v, 0, bound) {
        OracleVerdict {
            holds: false,
            witness: Some(w),
        }
    } else {
        OracleVerdict {
            holds: true,
            witness: None,
        }
    }
}

fn search(
    a: &SemilinearSet,
    b: &SemilinearSet,
    v: &mut Vec<u64>,
    idx: usize,
    remaining: u64,
) -> Option<Vec<u64>> {
    if idx == v.len() {
        if a.contains(v) && !b.contains(v) {
            return Some(v.clone());
        }
        return None;
    }
    for k in 0..=remaining {
        v[idx] = k;
        if let Some(w) = search(a, b, v, idx + 1, remaining - k) {
            return Some(w);
        }
    }
    v[idx] = 0;
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presburger::LinearSet;

    #[test]
    fn empty_included_in_anything() {
        let empty = SemilinearSet::empty(2);
        let any = SemilinearSet::point(vec![1, 1]);
        assert!(oracle_inclusion_bounded(&empty, &any, 6).holds);
    }

    #[test]
    fn finds_witness_for_double_message() {
        // {2m} not in {m}: witness is the vector [2]
        let two = SemilinearSet::point(vec![2]);
        let one = SemilinearSet::point(vec![1]);
        let verdict = oracle_inclusion_bounded(&two, &one, 6);
        assert!(!verdict.holds);
        assert_eq!(verdict.witness, Some(vec![2]));
    }

    #[test]
    fn reply_included_in_reply_dot_one() {
        let reply = SemilinearSet::point(vec![1]);
        assert!(oracle_inclusion_bounded(&reply, &reply, 6).holds);
    }

    #[test]
    fn star_inclusion_bounded() {
        // *m subset of *(m+n) up to bound 6
        let star_m = SemilinearSet::from_components(
            2,
            vec![
                LinearSet::new(vec![0, 0], vec![vec![1, 0]]),
            ],
        );
        let star_mn = SemilinearSet::from_components(
            2,
            vec![LinearSet::new(vec![0, 0], vec![vec![1, 0], vec![0, 1]])],
        );
        assert!(oracle_inclusion_bounded(&star_m, &star_mn, 6).holds);
        let back = oracle_inclusion_bounded(&star_mn, &star_m, 6);
        assert!(!back.holds);
        assert_eq!(back.witness, Some(vec![0, 1]));
    }
}
