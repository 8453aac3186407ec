//! Usage-annotated types and type environments for the algorithmic system.

use indexmap::IndexMap;

use crate::patterns::{Capability, Pattern};
use crate::syntax::{BaseType, SurfaceType};

/// Usage annotation on a mailbox type: a returnable reference may be
/// returned from a frame and must be the last lexical use; a second-class
/// reference may be consumed but not escape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Usage {
    Returnable,
    SecondClass,
}

impl Usage {
    /// Subtyping on usages: returnable may stand in for second-class.
    pub fn subtype_of(self, other: Usage) -> bool {
        self == other || (self == Usage::Returnable && other == Usage::SecondClass)
    }

    /// Sequential combination: a second-class use must precede a returnable
    /// one, and two returnable uses are impossible.
    pub fn sequence(self, later: Usage) -> Option<Usage> {
        match (self, later) {
            (Usage::SecondClass, Usage::SecondClass) => Some(Usage::SecondClass),
            (Usage::SecondClass, Usage::Returnable) => Some(Usage::Returnable),
            _ => None,
        }
    }

    /// Branch combination: the stronger usage wins.
    pub fn max(self, other: Usage) -> Usage {
        if self == Usage::Returnable || other == Usage::Returnable {
            Usage::Returnable
        } else {
            Usage::SecondClass
        }
    }
}

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Usage::Returnable => "returnable",
            Usage::SecondClass => "second-class",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UsageType {
    Base(BaseType),
    Mailbox {
        cap: Capability,
        pattern: Pattern,
        iface: String,
        usage: Usage,
    },
    Pair(Box<UsageType>, Box<UsageType>),
    Sum(Box<UsageType>, Box<UsageType>),
    Fun {
        linear: bool,
        params: Vec<UsageType>,
        ret: Box<UsageType>,
    },
}

impl UsageType {
    pub const UNIT: UsageType = UsageType::Base(BaseType::Unit);

    pub fn mailbox(cap: Capability, pattern: Pattern, iface: &str, usage: Usage) -> Self {
        UsageType::Mailbox {
            cap,
            pattern,
            iface: iface.to_string(),
            usage,
        }
    }

    pub fn is_base(&self) -> bool {
        matches!(self, UsageType::Base(_))
    }

    /// Returnable types may be returned from an evaluation frame.
    pub fn is_returnable(&self) -> bool {
        match self {
            UsageType::Base(_) => true,
            UsageType::Mailbox { usage, .. } => *usage == Usage::Returnable,
            UsageType::Pair(a, b) | UsageType::Sum(a, b) => {
                a.is_returnable() && b.is_returnable()
            }
            UsageType::Fun { .. } => true,
        }
    }

    /// Lift to a returnable type.
    pub fn make_returnable(&self) -> UsageType {
        match self {
            UsageType::Mailbox {
                cap,
                pattern,
                iface,
                ..
            } => UsageType::Mailbox {
                cap: *cap,
                pattern: pattern.clone(),
                iface: iface.clone(),
                usage: Usage::Returnable,
            },
            UsageType::Pair(a, b) => UsageType::Pair(
                Box::new(a.make_returnable()),
                Box::new(b.make_returnable()),
            ),
            other => other.clone(),
        }
    }

    /// Mask to a second-class type (applied to spawned environments and
    /// message payloads).
    pub fn make_usable(&self) -> UsageType {
        match self {
            UsageType::Mailbox {
                cap,
                pattern,
                iface,
                ..
            } => UsageType::Mailbox {
                cap: *cap,
                pattern: pattern.clone(),
                iface: iface.clone(),
                usage: Usage::SecondClass,
            },
            UsageType::Pair(a, b) => {
                UsageType::Pair(Box::new(a.make_usable()), Box::new(b.make_usable()))
            }
            other => other.clone(),
        }
    }

    /// Interfaces mentioned anywhere in the type.
    pub fn interfaces(&self) -> std::collections::BTreeSet<String> {
        let mut acc = std::collections::BTreeSet::new();
        self.collect_interfaces(&mut acc);
        acc
    }

    fn collect_interfaces(&self, acc: &mut std::collections::BTreeSet<String>) {
        match self {
            UsageType::Base(_) => {}
            UsageType::Mailbox { iface, .. } => {
                acc.insert(iface.clone());
            }
            UsageType::Pair(a, b) | UsageType::Sum(a, b) => {
                a.collect_interfaces(acc);
                b.collect_interfaces(acc);
            }
            UsageType::Fun { params, ret, .. } => {
                for p in params {
                    p.collect_interfaces(acc);
                }
                ret.collect_interfaces(acc);
            }
        }
    }

    /// Pattern variables occurring in the type.
    pub fn pattern_vars(&self) -> std::collections::BTreeSet<u32> {
        let mut acc = std::collections::BTreeSet::new();
        self.collect_vars(&mut acc);
        acc
    }

    fn collect_vars(&self, acc: &mut std::collections::BTreeSet<u32>) {
        match self {
            UsageType::Base(_) => {}
            UsageType::Mailbox { pattern, .. } => acc.extend(pattern.vars()),
            UsageType::Pair(a, b) | UsageType::Sum(a, b) => {
                a.collect_vars(acc);
                b.collect_vars(acc);
            }
            UsageType::Fun { params, ret, .. } => {
                for p in params {
                    p.collect_vars(acc);
                }
                ret.collect_vars(acc);
            }
        }
    }

    pub fn subst_patterns(&self, map: &impl Fn(u32) -> Option<Pattern>) -> UsageType {
        match self {
            UsageType::Base(b) => UsageType::Base(*b),
            UsageType::Mailbox {
                cap,
                pattern,
                iface,
                usage,
            } => UsageType::Mailbox {
                cap: *cap,
                pattern: pattern.subst(map),
                iface: iface.clone(),
                usage: *usage,
            },
            UsageType::Pair(a, b) => UsageType::Pair(
                Box::new(a.subst_patterns(map)),
                Box::new(b.subst_patterns(map)),
            ),
            UsageType::Sum(a, b) => UsageType::Sum(
                Box::new(a.subst_patterns(map)),
                Box::new(b.subst_patterns(map)),
            ),
            UsageType::Fun {
                linear,
                params,
                ret,
            } => UsageType::Fun {
                linear: *linear,
                params: params.iter().map(|p| p.subst_patterns(map)).collect(),
                ret: Box::new(ret.subst_patterns(map)),
            },
        }
    }

    pub fn render(&self) -> String {
        match self {
            UsageType::Base(b) => b.to_string(),
            UsageType::Mailbox {
                cap,
                pattern,
                iface,
                usage,
            } => {
                let u = match usage {
                    Usage::Returnable => "",
                    Usage::SecondClass => "~",
                };
                format!("{u}{iface}{cap}({})", pattern.render())
            }
            UsageType::Pair(a, b) => format!("({}, {})", a.render(), b.render()),
            UsageType::Sum(a, b) => format!("{} + {}", a.render(), b.render()),
            UsageType::Fun {
                linear,
                params,
                ret,
            } => {
                let kw = if *linear { "linfun" } else { "fun" };
                let ps: Vec<String> = params.iter().map(|p| p.render()).collect();
                format!("{kw}({}) -> {}", ps.join(", "), ret.render())
            }
        }
    }
}

impl std::fmt::Display for UsageType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.render())
    }
}

/// Convert a desugared surface type (all mailbox patterns present) into a
/// usage-annotated type. Surface annotations default to returnable.
pub fn from_surface(t: &SurfaceType) -> UsageType {
    match t {
        SurfaceType::Base(b) => UsageType::Base(*b),
        SurfaceType::MbSend { iface, pattern } => UsageType::Mailbox {
            cap: Capability::Send,
            pattern: pattern.clone().expect("desugared type lacks pattern"),
            iface: iface.clone(),
            usage: Usage::Returnable,
        },
        SurfaceType::MbRecv { iface, pattern } => UsageType::Mailbox {
            cap: Capability::Receive,
            pattern: pattern.clone().expect("desugared type lacks pattern"),
            iface: iface.clone(),
            usage: Usage::Returnable,
        },
        SurfaceType::Pair(a, b) => {
            UsageType::Pair(Box::new(from_surface(a)), Box::new(from_surface(b)))
        }
        SurfaceType::Sum(a, b) => {
            UsageType::Sum(Box::new(from_surface(a)), Box::new(from_surface(b)))
        }
        SurfaceType::Fun {
            linear,
            params,
            ret,
        } => UsageType::Fun {
            linear: *linear,
            params: params.iter().map(from_surface).collect(),
            ret: Box::new(from_surface(ret)),
        },
    }
}

/// An ordered map from variables to usage-annotated types.
pub type TypeEnv = IndexMap<String, UsageType>;

/// A type environment or the absorbing top element produced by fail
/// guards.
#[derive(Debug, Clone, PartialEq)]
pub enum NullableEnv {
    Env(TypeEnv),
    Top,
}

impl NullableEnv {
    pub fn empty() -> Self {
        NullableEnv::Env(TypeEnv::new())
    }

    pub fn singleton(x: &str, t: UsageType) -> Self {
        let mut env = TypeEnv::new();
        env.insert(x.to_string(), t);
        NullableEnv::Env(env)
    }

    pub fn as_env(&self) -> Option<&TypeEnv> {
        match self {
            NullableEnv::Env(e) => Some(e),
            NullableEnv::Top => None,
        }
    }

    pub fn is_top(&self) -> bool {
        matches!(self, NullableEnv::Top)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_laws() {
        use Usage::*;
        assert_eq!(SecondClass.sequence(SecondClass), Some(SecondClass));
        assert_eq!(SecondClass.sequence(Returnable), Some(Returnable));
        assert_eq!(Returnable.sequence(SecondClass), None);
        assert_eq!(Returnable.sequence(Returnable), None);
        assert!(Returnable.subtype_of(SecondClass));
        assert!(!SecondClass.subtype_of(Returnable));
        assert_eq!(SecondClass.max(Returnable), Returnable);
    }

    #[test]
    fn returnable_and_masking() {
        let t = UsageType::mailbox(
            Capability::Receive,
            Pattern::One,
            "A",
            Usage::SecondClass,
        );
        assert!(!t.is_returnable());
        assert!(t.make_returnable().is_returnable());
        let masked = t.make_returnable().make_usable();
        assert!(!masked.is_returnable());
        // base types are unaffected
        assert_eq!(UsageType::UNIT.make_usable(), UsageType::UNIT);
    }
}
