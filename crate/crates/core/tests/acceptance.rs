//! Acceptance suite: one test per shipping criterion, each printing a
//! single PASS line with the measured evidence when it holds.

use std::collections::BTreeSet;
use std::time::Instant;

use firstify::analysis::{check_h_fragment, is_first_order};
use firstify::ast::{alpha_eq, canonicalize_clause, Clause, Expr, Goal, Program};
use firstify::corpus::random::random_definitional;
use firstify::corpus::{generate, run_bench, BenchMode, BenchSpec, Family};
use firstify::emitter::{count_rule_clauses, defunctionalize_reynolds};
use firstify::interp::{check_equivalence, EngineLimits, Verdict};
use firstify::parser::{load_goal, load_program};
use firstify::specializer::{eliminate_partial_apps, firstify, Firstified};

const WINNOW: &str = include_str!("../corpus/winnow.hl");
const CONJ23: &str = include_str!("../corpus/conj23.hl");
const EXAMPLE: &str = include_str!("../corpus/example.hl");

fn load_with_goal(src: &str, query: &str) -> (Program, Goal) {
    let mut p = load_program(src).unwrap();
    let g = load_goal(query, &mut p).unwrap();
    (p, g)
}

fn wide_limits() -> EngineLimits {
    EngineLimits { max_depth: 2048, max_steps: 200_000_000 }
}

/// A desugared fact has a body of head-parameter equations only.
fn is_rule(c: &Clause) -> bool {
    c.body.iter().any(|l| !matches!(l.atom, Expr::Eq { .. }))
}

fn clause_set(clauses: &[Clause]) -> BTreeSet<String> {
    clauses.iter().map(|c| canonicalize_clause(c).to_string()).collect()
}

fn assert_alpha_matches(actual: &[&Clause], expected: &Program) {
    assert_eq!(actual.len(), expected.clauses.len());
    for (a, e) in actual.iter().zip(&expected.clauses) {
        assert!(alpha_eq(a, e), "clause mismatch:\n  got      {a}\n  expected {e}");
    }
}

#[test]
fn criterion_01_golden_winnow() {
    let start = Instant::now();
    let (p, g) = load_with_goal(WINNOW, "winnow(pref, movie, T)");
    let out = firstify(&p, &g).unwrap();

    assert_eq!(out.goal.to_string(), "winnow_s1(T)");
    assert_eq!(count_rule_clauses(&out.program), 2);
    let rules: Vec<&Clause> = out.program.clauses.iter().filter(|c| is_rule(c)).collect();
    let expected = load_program(
        "winnow_s1(T) :- movie(T), not bypassed_s1(T).\n\
         bypassed_s1(T) :- movie(Z), pref(Z,T).\n",
    )
    .unwrap();
    assert_alpha_matches(&rules, &expected);

    let facts: Vec<&Clause> = out.program.clauses.iter().filter(|c| !is_rule(c)).collect();
    assert_eq!(facts.len(), 5);
    assert!(is_first_order(&out.program));
    assert!(start.elapsed().as_secs() < 1);
    println!("criterion 01 PASS: golden winnow specialization matches structurally");
}

#[test]
fn criterion_02_golden_partial_application_elimination() {
    let start = Instant::now();
    let p = load_program(CONJ23).unwrap();
    let out = eliminate_partial_apps(&p, "conj3").unwrap();

    let rules: Vec<&Clause> = out.program.clauses.iter().filter(|c| is_rule(c)).collect();
    assert_eq!(rules.len(), 3, "the target program has three clauses");
    let expected = load_program(
        ":- hotype(conj3, pred(pred(i),pred(i),pred(i),i)).\n\
         :- hotype(conj2_s1, pred(pred(i),pred(i),pred(i),i)).\n\
         :- hotype(conj2, pred(pred(i),pred(i),i)).\n\
         conj3(P,Q,R,X) :- conj2_s1(P,Q,R,X).\n\
         conj2_s1(P,Q,R,X) :- P(X), conj2(Q,R,X).\n\
         conj2(P,Q,X) :- P(X), Q(X).\n",
    )
    .unwrap();
    assert_alpha_matches(&rules, &expected);

    let report = check_h_fragment(&out.program);
    assert!(report.is_admitted(), "output must drop back into the plain fragment");
    assert!(start.elapsed().as_secs() < 1);
    println!("criterion 02 PASS: partial applications eliminate to the three-clause program");
}

#[test]
fn criterion_03_desugaring_example() {
    let p = load_program(EXAMPLE).unwrap();
    assert_eq!(p.clauses.len(), 3);
    let expected = load_program(
        ":- hotype(r, pred(pred(i), pred(i), i)).\n\
         p(V1) :- V1 = a.\n\
         q(X,Y) :- X = Y.\n\
         r(P,Q,Z) :- Z = f(X), P(X), Q(Y).\n",
    )
    .unwrap();
    let actual: Vec<&Clause> = p.clauses.iter().collect();
    assert_alpha_matches(&actual, &expected);
    println!("criterion 03 PASS: surface clauses desugar to the formal equational forms");
}

fn pred_var_somewhere(e: &Expr) -> bool {
    match e {
        Expr::PredVar { .. } => true,
        Expr::IndVar(_) | Expr::IndConst(_) | Expr::PredConst { .. } => false,
        Expr::FunApp { args, .. } => args.iter().any(pred_var_somewhere),
        Expr::App { head, args } => {
            pred_var_somewhere(head) || args.iter().any(pred_var_somewhere)
        }
        Expr::Eq { lhs, rhs } => pred_var_somewhere(lhs) || pred_var_somewhere(rhs),
    }
}

fn fully_first_order(p: &Program) -> bool {
    is_first_order(p)
        && p.clauses.iter().all(|c| {
            c.params.iter().all(|e| !pred_var_somewhere(e))
                && c.body.iter().all(|l| !pred_var_somewhere(&l.atom))
        })
}

fn random_runs(count: u64) -> impl Iterator<Item = (u64, Firstified)> {
    (0..count).map(|seed| {
        let (src, query) = random_definitional(seed);
        let mut p = load_program(&src).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
        let g = load_goal(&query, &mut p).unwrap();
        let out = firstify(&p, &g).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
        (seed, out)
    })
}

#[test]
fn criterion_04_first_order_guarantee() {
    let mut checked = 0;
    for (seed, out) in random_runs(200) {
        assert!(
            fully_first_order(&out.program),
            "seed {seed} left a predicate variable or predicate-typed position"
        );
        checked += 1;
    }
    assert_eq!(checked, 200);
    println!("criterion 04 PASS: 200/200 random programs specialize to first-order");
}

#[test]
fn criterion_05_termination_bound() {
    let bound_check = |label: &str, out: &Firstified| {
        let table = out.table.entries().count();
        assert!(
            out.iterations <= 1 + table,
            "{label}: {} iterations for {} specializations",
            out.iterations,
            table
        );
        assert!(out.iterations < 10_000, "{label} hit the iteration guard");
    };
    for family in Family::ALL {
        let (p, g) = generate(&BenchSpec::new(family, 6)).unwrap();
        let out = firstify(&p, &g).unwrap();
        bound_check(family.name(), &out);
    }
    for (seed, out) in random_runs(200) {
        bound_check(&format!("seed {seed}"), &out);
    }
    println!("criterion 05 PASS: fixpoint reached within 1+|S| iterations on every run");
}

#[test]
fn criterion_06_oracle_equivalence() {
    let start = Instant::now();
    let mut cases: Vec<BenchSpec> = Vec::new();
    for n in [10, 50, 100, 200] {
        cases.push(BenchSpec::new(Family::Closure, n));
        cases.push(BenchSpec::new(Family::Winnow, n));
    }
    for family in [Family::Conj5, Family::GenConj5, Family::Union5, Family::GenUnion5] {
        cases.push(BenchSpec::new(family, 50));
    }
    for spec in &cases {
        let (p, g) = generate(spec).unwrap();
        let fo = firstify(&p, &g).unwrap();
        let rep = check_equivalence(&p, &g, &fo.program, &fo.goal, wide_limits()).unwrap();
        assert_eq!(
            rep.verdict,
            Verdict::Equal,
            "specialized {} n={} changed answers",
            spec.family,
            spec.n
        );
        let (rp, rg) = defunctionalize_reynolds(&p, &g).unwrap();
        let rep = check_equivalence(&p, &g, &rp, &rg, wide_limits()).unwrap();
        assert_eq!(
            rep.verdict,
            Verdict::Equal,
            "reynolds {} n={} changed answers",
            spec.family,
            spec.n
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "equivalence sweep took {elapsed:?}");
    println!(
        "criterion 06 PASS: {} instances agree across original/specialized/reynolds in {:.1}s",
        cases.len(),
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_07_reported_size_columns() {
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
        let (p, g) = generate(&BenchSpec::new(family, 6)).unwrap();
        assert_eq!(count_rule_clauses(&p), ho, "{family} source clause count");
        let out = firstify(&p, &g).unwrap();
        assert_eq!(count_rule_clauses(&out.program), fo, "{family} output clause count");
    }
    println!("criterion 07 PASS: all ten reference clause-count pairs reproduced exactly");
}

#[test]
fn criterion_08_specialized_beats_reynolds_on_closure() {
    let spec = BenchSpec::new(Family::Closure, 100);
    let fo = run_bench(&spec, BenchMode::Specialized, wide_limits()).unwrap();
    let rey = run_bench(&spec, BenchMode::Reynolds, wide_limits()).unwrap();
    assert!(
        fo.steps <= rey.steps,
        "specialized took {} steps, reynolds {}",
        fo.steps,
        rey.steps
    );
    println!(
        "criterion 08 PASS: closure-100 specialized {} steps vs reynolds {} ({})",
        fo.steps,
        rey.steps,
        if fo.steps < rey.steps { "strictly fewer" } else { "equal" }
    );
}

#[test]
fn criterion_09_first_order_fixpoint() {
    // specializing an already specialized program must be the identity
    let firstified: Vec<(Program, Goal)> = [
        (WINNOW, "winnow(pref, movie, T)"),
        (CONJ23, "conj3(p,q,r,X)"),
    ]
    .into_iter()
    .map(|(src, q)| {
        let (p, g) = load_with_goal(src, q);
        let out = firstify(&p, &g).unwrap();
        (out.program, out.goal)
    })
    .collect();
    for (p, g) in &firstified {
        let again = firstify(p, g).unwrap();
        assert_eq!(clause_set(&again.program.clauses), clause_set(&p.clauses));
        assert_eq!(again.goal.to_string(), g.to_string());
    }

    // unreachable predicates drop out; everything else keeps its name and body
    let (p, g) = load_with_goal(
        "path(X,Y) :- edge(X,Y).\n\
         path(X,Y) :- edge(X,Z), path(Z,Y).\n\
         edge(a,b).\n\
         edge(b,c).\n\
         orphan(X) :- edge(X,X).\n",
        "path(a,Y)",
    );
    let out = firstify(&p, &g).unwrap();
    assert_eq!(out.goal.to_string(), "path(a,Y)");
    let reachable: Vec<Clause> = p
        .clauses
        .iter()
        .filter(|c| c.head != "orphan")
        .cloned()
        .collect();
    assert_eq!(clause_set(&out.program.clauses), clause_set(&reachable));
    let heads: BTreeSet<&str> = out.program.clauses.iter().map(|c| c.head.as_str()).collect();
    assert_eq!(heads, BTreeSet::from(["path", "edge"]));
    println!("criterion 09 PASS: first-order inputs come back as the reachable subprogram");
}

#[test]
fn criterion_10_mutation_detection() {
    let cases = [
        BenchSpec::new(Family::Closure, 8),
        BenchSpec::new(Family::Conj5, 4),
        BenchSpec::new(Family::GenConj5, 4),
        BenchSpec::new(Family::Union5, 4),
        BenchSpec::new(Family::GenUnion5, 4),
        BenchSpec::new(Family::Winnow, 9),
    ];
    let mut mutants = 0;
    for spec in &cases {
        let (p, g) = generate(spec).unwrap();
        let out = firstify(&p, &g).unwrap();
        let rule_positions: Vec<usize> = out
            .program
            .clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| is_rule(c))
            .map(|(i, _)| i)
            .collect();
        assert!(!rule_positions.is_empty());
        for idx in rule_positions {
            let mut mutated = out.program.clone();
            let removed = mutated.clauses.remove(idx);
            let rep =
                check_equivalence(&out.program, &out.goal, &mutated, &out.goal, wide_limits())
                    .unwrap();
            assert!(
                matches!(rep.verdict, Verdict::Differs { .. }),
                "{} n={}: deleting `{removed}` went unnoticed",
                spec.family,
                spec.n
            );
            mutants += 1;
        }
    }
    println!("criterion 10 PASS: all {mutants} single-rule deletions change some answer set");
}
