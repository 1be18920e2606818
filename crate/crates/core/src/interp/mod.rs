//! Reference interpreters: top-down SLD resolution with negation as
//! failure, and bottom-up semi-naive evaluation for the stratified,
//! function-free, first-order core. Both produce comparable answer sets, so
//! a transformed program can be checked against its source.

pub mod bottomup;
pub mod topdown;

pub use bottomup::{bottom_up_admissible, eval_bottom_up, query_model, Model};
pub use topdown::{solve_topdown, EngineLimits};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::ast::{Goal, Program};
use crate::error::{Error, Result};

/// A ground first-order term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroundTerm {
    Const(String),
    Struct(String, Vec<GroundTerm>),
}

impl fmt::Display for GroundTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundTerm::Const(c) => write!(f, "{c}"),
            GroundTerm::Struct(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// One binding per solution, keyed by goal variable name.
pub type Binding = BTreeMap<String, GroundTerm>;

/// The set of solutions to a goal plus the work it took to enumerate them.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerSet {
    pub bindings: BTreeSet<Binding>,
    pub steps: u64,
}

impl AnswerSet {
    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }
}

fn fmt_binding(b: &Binding) -> String {
    let inner = b
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",");
    format!("{{{inner}}}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Equal,
    Differs { witness: String },
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivReport {
    pub verdict: Verdict,
    pub steps_lhs: u64,
    pub steps_rhs: u64,
}

impl fmt::Display for EquivReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.verdict {
            Verdict::Equal => {
                write!(f, "result=equal steps_lhs={} steps_rhs={}", self.steps_lhs, self.steps_rhs)
            }
            Verdict::Differs { witness } => write!(
                f,
                "result=differs steps_lhs={} steps_rhs={} witness={witness}",
                self.steps_lhs, self.steps_rhs
            ),
            Verdict::Inconclusive { reason } => write!(
                f,
                "result=inconclusive steps_lhs={} steps_rhs={} reason={reason}",
                self.steps_lhs, self.steps_rhs
            ),
        }
    }
}

fn run_side(p: &Program, g: &Goal, limits: EngineLimits) -> Result<AnswerSet> {
    if bottom_up_admissible(p) {
        let model = eval_bottom_up(p)?;
        match query_model(&model, g) {
            // the program fits the datalog core but the goal does not;
            // answer it by search instead
            Err(Error::HasFunctions { .. } | Error::UnsafeClause { .. }) => {
                solve_topdown(p, g, limits, false)
            }
            other => other,
        }
    } else {
        solve_topdown(p, g, limits, false)
    }
}

fn describe_diff(lhs: &AnswerSet, rhs: &AnswerSet) -> String {
    if let Some(b) = lhs.bindings.difference(&rhs.bindings).next() {
        return format!("{} only on the left", fmt_binding(b));
    }
    if let Some(b) = rhs.bindings.difference(&lhs.bindings).next() {
        return format!("{} only on the right", fmt_binding(b));
    }
    "answer sets differ".to_string()
}

fn soft_failure(e: &Error) -> bool {
    e.is_resource_exhausted() || matches!(e, Error::Floundering { .. })
}

/// Runs both program/goal pairs and compares their answer sets. Each side
/// uses the bottom-up engine when the program qualifies and falls back to
/// top-down otherwise. Resource exhaustion and floundering are reported as
/// inconclusive; anything else is a real error.
pub fn check_equivalence(
    p1: &Program,
    g1: &Goal,
    p2: &Program,
    g2: &Goal,
    limits: EngineLimits,
) -> Result<EquivReport> {
    // hard failures propagate; soft ones survive into the verdict
    let soften = |r: Result<AnswerSet>| match r {
        Ok(a) => Ok(Ok(a)),
        Err(e) if soft_failure(&e) => Ok(Err(e)),
        Err(e) => Err(e),
    };
    let lhs = soften(run_side(p1, g1, limits))?;
    let rhs = soften(run_side(p2, g2, limits))?;
    let steps_of = |r: &std::result::Result<AnswerSet, Error>| match r {
        Ok(a) => a.steps,
        Err(Error::StepsExceeded { limit }) => *limit,
        Err(_) => 0,
    };
    let steps_lhs = steps_of(&lhs);
    let steps_rhs = steps_of(&rhs);
    let verdict = match (&lhs, &rhs) {
        (Ok(a), Ok(b)) => {
            if a.bindings == b.bindings {
                Verdict::Equal
            } else {
                Verdict::Differs { witness: describe_diff(a, b) }
            }
        }
        (Err(e), _) | (_, Err(e)) => Verdict::Inconclusive { reason: e.to_string() },
    };
    Ok(EquivReport { verdict, steps_lhs, steps_rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{load_goal, load_program};

    const MOVIES: &str = "\
movie(m1).
movie(m2).
movie(m3).
pref(m1,m2).
pref(m2,m3).
";

    const WINNOW_FO: &str = "\
winnow_s1(T) :- movie(T), not bypassed_s1(T).
bypassed_s1(T) :- movie(Z), pref(Z,T).
";

    const WINNOW_HO: &str = "\
:- hotype(winnow, pred(pred(i,i), pred(i), i)).
:- hotype(bypassed, pred(pred(i,i), pred(i), i)).
winnow(P,R,T) :- R(T), not bypassed(P,R,T).
bypassed(P,R,T) :- R(Z), P(Z,T).
";

    #[test]
    fn cross_engine_equivalence_of_winnow() {
        // left side is higher-order: it must fall back to top-down;
        // the right side is plain datalog and runs bottom-up
        let mut ho = load_program(&format!("{WINNOW_HO}{MOVIES}")).unwrap();
        let ho_goal = load_goal("winnow(pref, movie, T)", &mut ho).unwrap();
        let mut fo = load_program(&format!("{WINNOW_FO}{MOVIES}")).unwrap();
        let fo_goal = load_goal("winnow_s1(T)", &mut fo).unwrap();
        assert!(!bottom_up_admissible(&ho));
        assert!(bottom_up_admissible(&fo));
        let report =
            check_equivalence(&ho, &ho_goal, &fo, &fo_goal, EngineLimits::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Equal);
        assert!(report.steps_lhs > 0 && report.steps_rhs > 0);
        assert!(report.to_string().starts_with("result=equal steps_lhs="));
    }

    #[test]
    fn differing_programs_produce_a_witness() {
        let mut a = load_program("p(x).\np(y).").unwrap();
        let ga = load_goal("p(X)", &mut a).unwrap();
        let mut b = load_program("p(x).").unwrap();
        let gb = load_goal("p(X)", &mut b).unwrap();
        let report = check_equivalence(&a, &ga, &b, &gb, EngineLimits::default()).unwrap();
        match report.verdict {
            Verdict::Differs { witness } => {
                assert!(witness.contains("X=y"), "witness: {witness}")
            }
            other => panic!("unexpected verdict {other:?}"),
        }
    }

    #[test]
    fn exhaustion_is_inconclusive() {
        let mut p = load_program("loop(X) :- loop(X).\nloop(a).").unwrap();
        let g = load_goal("loop(X)", &mut p).unwrap();
        let limits = EngineLimits { max_depth: 100_000, max_steps: 50 };
        // left-recursive program is not admissible bottom-up? it is: datalog.
        // force the comparison against a non-datalog variant instead
        let mut q = load_program("loop(X) :- loop(X), f(X) = f(X).\nloop(a).").unwrap();
        let gq = load_goal("loop(X)", &mut q).unwrap();
        assert!(!bottom_up_admissible(&q));
        let report = check_equivalence(&q, &gq, &p, &g, limits).unwrap();
        assert!(matches!(report.verdict, Verdict::Inconclusive { .. }), "{report}");
    }

    #[test]
    fn ground_terms_order_and_display() {
        let a = GroundTerm::Const("a".into());
        let fab = GroundTerm::Struct("f".into(), vec![a.clone(), GroundTerm::Const("b".into())]);
        assert_eq!(fab.to_string(), "f(a,b)");
        assert!(a < fab);
    }
}
