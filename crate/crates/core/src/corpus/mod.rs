//! Benchmark program families with deterministic fact generators.
//!
//! Each family builds a higher-order program, a matching fact base sized by
//! `n`, and a closed goal. Generation is a pure function of the spec, so
//! benchmark runs are reproducible byte for byte.

pub mod random;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::ast::{Goal, Program};
use crate::emitter::{count_rule_clauses, defunctionalize_reynolds};
use crate::error::{Error, Result};
use crate::interp::{solve_topdown, EngineLimits};
use crate::parser::{load_goal, load_program};
use crate::specializer::firstify;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Family {
    Closure,
    Conj5,
    Conj10,
    GenConj5,
    GenConj10,
    Union5,
    Union10,
    GenUnion5,
    GenUnion10,
    Winnow,
    PathNaive,
    PathDag,
    W2,
    Wt3,
}

impl Family {
    pub const ALL: [Family; 14] = [
        Family::Closure,
        Family::Conj5,
        Family::Conj10,
        Family::GenConj5,
        Family::GenConj10,
        Family::Union5,
        Family::Union10,
        Family::GenUnion5,
        Family::GenUnion10,
        Family::Winnow,
        Family::PathNaive,
        Family::PathDag,
        Family::W2,
        Family::Wt3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Closure => "closure",
            Family::Conj5 => "conj5",
            Family::Conj10 => "conj10",
            Family::GenConj5 => "genconj5",
            Family::GenConj10 => "genconj10",
            Family::Union5 => "union5",
            Family::Union10 => "union10",
            Family::GenUnion5 => "genunion5",
            Family::GenUnion10 => "genunion10",
            Family::Winnow => "winnow",
            Family::PathNaive => "path_naive",
            Family::PathDag => "path_dag",
            Family::W2 => "w2",
            Family::Wt3 => "wt3",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Family> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| *c != '(' && *c != ')')
            .collect();
        Family::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| Error::UnknownFamily { name: s.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchSpec {
    pub family: Family,
    /// Instance size: facts per relation, chain length, or item count.
    pub n: usize,
    /// Reserved for randomized variants; the structured families ignore it.
    pub seed: u64,
}

impl BenchSpec {
    pub fn new(family: Family, n: usize) -> BenchSpec {
        BenchSpec { family, n, seed: 0 }
    }
}

/// Right-nested binary combination: `op(p1,op(p2,...))`.
fn nest(op: &str, names: &[String]) -> String {
    match names {
        [single] => single.clone(),
        [first, rest @ ..] => format!("{op}({first},{})", nest(op, rest)),
        [] => unreachable!("combinations take at least one relation"),
    }
}

fn kary_source(op: &str, kind: &str, k: usize, n: usize) -> (String, String) {
    let mut src = String::new();
    src.push_str(&format!(":- hotype({op}, pred(pred(i), pred(i), i)).\n"));
    let param_tys = vec!["pred(i)"; k].join(",");
    src.push_str(&format!(":- hotype({kind}{k}, pred({param_tys},i)).\n\n"));
    if op == "conj2" {
        src.push_str("conj2(P,Q,X) :- P(X), Q(X).\n");
    } else {
        src.push_str("union2(P,Q,X) :- P(X).\nunion2(P,Q,X) :- Q(X).\n");
    }
    let params: Vec<String> = (1..=k).map(|i| format!("P{i}")).collect();
    let body = format!("{op}({},{},X)", params[0], nest(op, &params[1..]));
    src.push_str(&format!("{kind}{k}({},X) :- {body}.\n", params.join(",")));
    let rels: Vec<String> = (1..=k).map(|i| format!("q{i}")).collect();
    src.push_str(&format!("top(X) :- {kind}{k}({},X).\n\n", rels.join(",")));
    for (i, rel) in rels.iter().enumerate() {
        for j in 1..=n {
            src.push_str(&format!("{rel}(x{j}).\n"));
        }
        src.push_str(&format!("{rel}(u{}).\n", i + 1));
    }
    (src, "top(X)".to_string())
}

fn genconj_source(k: usize, n: usize) -> (String, String) {
    let mut src = String::new();
    src.push_str(":- hotype(genconj, pred(pred(i,i), i, i)).\n\n");
    src.push_str("genconj(R,I,X) :- lastidx(I), R(I,X).\n");
    src.push_str("genconj(R,I,X) :- step(I,J), R(I,X), genconj(R,J,X).\n");
    src.push_str("gtop(X) :- genconj(rel, i1, X).\n");
    src.push_str("rel(I,X) :- holds(I,X).\n\n");
    for i in 1..k {
        src.push_str(&format!("step(i{i},i{}).\n", i + 1));
    }
    src.push_str(&format!("lastidx(i{k}).\n"));
    for i in 1..=k {
        for j in 1..=n {
            src.push_str(&format!("holds(i{i},x{j}).\n"));
        }
        src.push_str(&format!("holds(i{i},u{i}).\n"));
    }
    (src, "gtop(X)".to_string())
}

fn genunion_source(k: usize, n: usize) -> (String, String) {
    let mut src = String::new();
    src.push_str(":- hotype(closure, pred(pred(i,i), i, i)).\n\n");
    src.push_str("closure(R,X,Y) :- R(X,Y).\n");
    src.push_str("closure(R,X,Y) :- R(X,Z), closure(R,Z,Y).\n");
    src.push_str("reachidx(J) :- closure(step, i0, J).\n");
    src.push_str("gtop(X) :- reachidx(J), rel(J,X).\n");
    src.push_str("rel(I,X) :- holds(I,X).\n\n");
    for i in 0..k {
        src.push_str(&format!("step(i{i},i{}).\n", i + 1));
    }
    for i in 1..=k {
        for j in 1..=n {
            src.push_str(&format!("holds(i{i},x{j}).\n"));
        }
        src.push_str(&format!("holds(i{i},u{i}).\n"));
    }
    (src, "gtop(X)".to_string())
}

fn closure_source(n: usize) -> (String, String) {
    let mut src = String::new();
    src.push_str(":- hotype(closure, pred(pred(i,i), i, i)).\n\n");
    src.push_str("closure(R,X,Y) :- R(X,Y).\n");
    src.push_str("closure(R,X,Y) :- R(X,Z), closure(R,Z,Y).\n");
    src.push_str("path(X,Y) :- closure(edge,X,Y).\n\n");
    for i in 0..n {
        src.push_str(&format!("edge(n{i},n{}).\n", i + 1));
    }
    (src, "path(X,Y)".to_string())
}

fn winnow_source(n: usize) -> (String, String) {
    let mut src = String::new();
    src.push_str(":- hotype(winnow, pred(pred(i,i), pred(i), i)).\n");
    src.push_str(":- hotype(bypassed, pred(pred(i,i), pred(i), i)).\n\n");
    src.push_str("winnow(P,R,T) :- R(T), not bypassed(P,R,T).\n");
    src.push_str("bypassed(P,R,T) :- R(Z), P(Z,T).\n");
    src.push_str("pref(X,Y) :- better(X,Y).\n\n");
    for i in 1..=n {
        src.push_str(&format!("movie(m{i}).\n"));
    }
    // movies come in rank groups of three; each group dominates the next
    for i in 1..=n {
        for j in 1..=n {
            if (i - 1) / 3 + 1 == (j - 1) / 3 {
                src.push_str(&format!("better(m{i},m{j}).\n"));
            }
        }
    }
    (src, "winnow(pref, movie, T)".to_string())
}

fn path_rules() -> &'static str {
    "closure(R,X,Y) :- R(X,Y).\n\
     closure(R,X,Y) :- R(X,Z), closure(R,Z,Y).\n\
     path(X,Y) :- closure(edge,X,Y).\n\
     connected(X,Y) :- path(X,Y).\n\
     connected(X,Y) :- path(Y,X).\n\
     linked(Y) :- connected(p0,Y).\n\n"
}

fn path_naive_source(n: usize) -> (String, String) {
    let mut src = String::new();
    src.push_str(":- hotype(closure, pred(pred(i,i), i, i)).\n\n");
    src.push_str(path_rules());
    for i in 0..n {
        src.push_str(&format!("edge(p{i},p{}).\n", i + 1));
    }
    (src, "linked(Y)".to_string())
}

fn path_dag_source(n: usize) -> (String, String) {
    let mut src = String::new();
    src.push_str(":- hotype(closure, pred(pred(i,i), i, i)).\n\n");
    src.push_str(path_rules().replace("connected(p0,Y)", "connected(d1,Y)").as_str());
    // heap-shaped out-tree: a layered DAG in which every path is unique
    for i in 1..=n {
        for child in [2 * i, 2 * i + 1] {
            if child <= n {
                src.push_str(&format!("edge(d{i},d{child}).\n"));
            }
        }
    }
    (src, "linked(Y)".to_string())
}

fn w2_source(n: usize) -> (String, String) {
    let mut src = String::new();
    src.push_str(":- hotype(winnow, pred(pred(i,i), pred(i), i)).\n");
    src.push_str(":- hotype(bypassed, pred(pred(i,i), pred(i), i)).\n\n");
    src.push_str("winnow(P,R,T) :- R(T), not bypassed(P,R,T).\n");
    src.push_str("bypassed(P,R,T) :- R(Z), P(Z,T).\n");
    src.push_str("item(X) :- movie(X).\n");
    src.push_str("good(X) :- rated(X,five).\n");
    src.push_str("good(X) :- rated(X,four).\n");
    src.push_str("bad(X) :- rated(X,one).\n");
    src.push_str("pref1(X,Y) :- good(X), bad(Y).\n");
    src.push_str("pref2(X,Y) :- newer(X,Y).\n");
    src.push_str("stage1(T) :- winnow(pref1, item, T).\n");
    src.push_str("w2(T) :- winnow(pref2, stage1, T).\n\n");
    let ratings = ["five", "four", "three", "two", "one"];
    for i in 1..=n {
        src.push_str(&format!("movie(m{i}).\n"));
        src.push_str(&format!("rated(m{i},{}).\n", ratings[(i - 1) % ratings.len()]));
        if i < n {
            src.push_str(&format!("newer(m{},m{i}).\n", i + 1));
        }
    }
    (src, "w2(T)".to_string())
}

fn wt3_source(n: usize) -> (String, String) {
    let mut src = String::new();
    src.push_str(":- hotype(winnow, pred(pred(i,i), pred(i), i)).\n");
    src.push_str(":- hotype(bypassed, pred(pred(i,i), pred(i), i)).\n");
    src.push_str(":- hotype(closure, pred(pred(i,i), i, i)).\n\n");
    src.push_str("winnow(P,R,T) :- R(T), not bypassed(P,R,T).\n");
    src.push_str("bypassed(P,R,T) :- R(Z), P(Z,T).\n");
    src.push_str("closure(R,X,Y) :- R(X,Y).\n");
    src.push_str("closure(R,X,Y) :- R(X,Z), closure(R,Z,Y).\n");
    src.push_str("preft(X,Y) :- closure(pref,X,Y).\n");
    src.push_str("pref(X,Y) :- beats(X,Y).\n");
    src.push_str("pref(X,Y) :- outranks(X,Y).\n");
    src.push_str("pref(X,Y) :- acclaimed(X), panned(Y).\n");
    src.push_str("item(X) :- movie(X).\n");
    src.push_str("stage1(T) :- winnow(pref, item, T).\n");
    src.push_str("wt3(T) :- winnow(preft, stage1, T).\n\n");
    for i in 1..=n {
        src.push_str(&format!("movie(m{i}).\n"));
        if i < n && i % 2 == 1 {
            src.push_str(&format!("beats(m{i},m{}).\n", i + 1));
        }
        if i < n && i % 3 == 1 {
            src.push_str(&format!("outranks(m{i},m{}).\n", i + 1));
        }
    }
    if n >= 2 {
        src.push_str("acclaimed(m1).\n");
        src.push_str(&format!("panned(m{n}).\n"));
    }
    (src, "wt3(T)".to_string())
}

/// Program and goal source for a spec. Pure and deterministic.
pub fn generate_source(spec: &BenchSpec) -> (String, String) {
    match spec.family {
        Family::Closure => closure_source(spec.n),
        Family::Conj5 => kary_source("conj2", "conj", 5, spec.n),
        Family::Conj10 => kary_source("conj2", "conj", 10, spec.n),
        Family::GenConj5 => genconj_source(5, spec.n),
        Family::GenConj10 => genconj_source(10, spec.n),
        Family::Union5 => kary_source("union2", "union", 5, spec.n),
        Family::Union10 => kary_source("union2", "union", 10, spec.n),
        Family::GenUnion5 => genunion_source(5, spec.n),
        Family::GenUnion10 => genunion_source(10, spec.n),
        Family::Winnow => winnow_source(spec.n),
        Family::PathNaive => path_naive_source(spec.n),
        Family::PathDag => path_dag_source(spec.n),
        Family::W2 => w2_source(spec.n),
        Family::Wt3 => wt3_source(spec.n),
    }
}

/// Loads the generated instance.
pub fn generate(spec: &BenchSpec) -> Result<(Program, Goal)> {
    let (src, goal) = generate_source(spec);
    let mut p = load_program(&src)?;
    let g = load_goal(&goal, &mut p)?;
    Ok((p, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    Original,
    Specialized,
    Reynolds,
}

impl BenchMode {
    pub fn name(self) -> &'static str {
        match self {
            BenchMode::Original => "original",
            BenchMode::Specialized => "specialized",
            BenchMode::Reynolds => "reynolds",
        }
    }
}

impl FromStr for BenchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<BenchMode> {
        match s.trim().to_ascii_lowercase().as_str() {
            "original" => Ok(BenchMode::Original),
            "specialized" => Ok(BenchMode::Specialized),
            "reynolds" => Ok(BenchMode::Reynolds),
            _ => Err(Error::UnknownFamily { name: format!("mode {s}") }),
        }
    }
}

/// One benchmark measurement, printable as a CSV row.
#[derive(Debug, Clone)]
pub struct BenchMetrics {
    pub family: Family,
    pub n: usize,
    pub mode: BenchMode,
    pub clauses: usize,
    pub rule_clauses: usize,
    pub steps: u64,
    pub transform_ms: f64,
}

impl BenchMetrics {
    pub const CSV_HEADER: &'static str = "family,n,mode,clauses,steps,transform_ms";
}

impl fmt::Display for BenchMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{:.3}",
            self.family,
            self.n,
            self.mode.name(),
            self.rule_clauses,
            self.steps,
            self.transform_ms
        )
    }
}

/// Generates the instance, applies the requested transformation, and runs
/// the goal under the metered top-down engine.
pub fn run_bench(spec: &BenchSpec, mode: BenchMode, limits: EngineLimits) -> Result<BenchMetrics> {
    let (p, g) = generate(spec)?;
    let start = Instant::now();
    let (prog, goal) = match mode {
        BenchMode::Original => (p, g),
        BenchMode::Specialized => {
            let out = firstify(&p, &g)?;
            (out.program, out.goal)
        }
        BenchMode::Reynolds => defunctionalize_reynolds(&p, &g)?,
    };
    let transform_ms = start.elapsed().as_secs_f64() * 1e3;
    let answers = solve_topdown(&prog, &goal, limits, false)?;
    Ok(BenchMetrics {
        family: spec.family,
        n: spec.n,
        mode,
        clauses: prog.clauses.len(),
        rule_clauses: count_rule_clauses(&prog),
        steps: answers.steps,
        transform_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::is_first_order;
    use crate::interp::{check_equivalence, Verdict};

    fn counts(spec: &BenchSpec) -> (usize, usize) {
        let (p, g) = generate(spec).unwrap();
        let ho = count_rule_clauses(&p);
        let out = firstify(&p, &g).unwrap();
        assert!(is_first_order(&out.program), "{} must firstify", spec.family);
        (ho, count_rule_clauses(&out.program))
    }

    #[test]
    fn reported_size_columns_match() {
        let expected = [
            (Family::Closure, 3, 3),
            (Family::Winnow, 3, 3),
            (Family::Conj5, 3, 6),
            (Family::GenConj5, 4, 4),
            (Family::Conj10, 3, 11),
            (Family::GenConj10, 4, 4),
            (Family::Union5, 4, 10),
            (Family::GenUnion5, 5, 5),
            (Family::Union10, 4, 20),
            (Family::GenUnion10, 5, 5),
        ];
        for (family, ho, fo) in expected {
            let got = counts(&BenchSpec::new(family, 6));
            assert_eq!(got, (ho, fo), "clause counts for {family}");
        }
    }

    #[test]
    fn reconstructed_families_hit_their_targets() {
        assert_eq!(counts(&BenchSpec::new(Family::PathNaive, 8)), (6, 6));
        assert_eq!(counts(&BenchSpec::new(Family::PathDag, 8)), (6, 6));
        assert_eq!(counts(&BenchSpec::new(Family::W2, 8)), (10, 12));
        assert_eq!(counts(&BenchSpec::new(Family::Wt3, 8)), (11, 13));
    }

    #[test]
    fn generation_is_deterministic() {
        for family in Family::ALL {
            let spec = BenchSpec::new(family, 7);
            assert_eq!(generate_source(&spec), generate_source(&spec));
        }
    }

    #[test]
    fn family_names_parse_back() {
        for family in Family::ALL {
            assert_eq!(family.name().parse::<Family>().unwrap(), family);
        }
        assert_eq!("genconj(5)".parse::<Family>().unwrap(), Family::GenConj5);
        assert!(matches!(
            "frobnicate".parse::<Family>(),
            Err(Error::UnknownFamily { .. })
        ));
    }

    #[test]
    fn specialization_preserves_answers_across_families() {
        for family in Family::ALL {
            let spec = BenchSpec::new(family, 6);
            let (p, g) = generate(&spec).unwrap();
            let out = firstify(&p, &g).unwrap();
            let report =
                check_equivalence(&p, &g, &out.program, &out.goal, EngineLimits::default())
                    .unwrap();
            assert_eq!(report.verdict, Verdict::Equal, "answers changed for {family}");
        }
    }

    #[test]
    fn bench_rows_are_well_formed() {
        let spec = BenchSpec::new(Family::Closure, 10);
        let m = run_bench(&spec, BenchMode::Specialized, EngineLimits::default()).unwrap();
        let row = m.to_string();
        assert!(row.starts_with("closure,10,specialized,3,"));
        assert!(m.steps > 0);
        assert!(m.clauses > m.rule_clauses);
    }
}
