//! Output backends: Prolog text for first-order programs, source text for
//! higher-order programs, and the classic defunctionalization baseline that
//! reifies predicate values as terms dispatched through `apply_k` relations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use sha2::{Digest, Sha256};

use crate::analysis::first_order_offender;
use crate::ast::{Clause, Expr, Goal, Literal, Program, TypeExpr};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct EmitOptions<'a> {
    /// Original source text; when present its digest goes into the header.
    pub source: Option<&'a str>,
    /// Emit a `main` entry point that prints every answer to the query.
    pub driver: bool,
}

/// A Prolog program ready to print: header comments, directives, clauses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrologDoc {
    pub comments: Vec<String>,
    pub directives: Vec<String>,
    pub clauses: Vec<String>,
}

impl fmt::Display for PrologDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for section in [&self.comments, &self.directives, &self.clauses] {
            if section.is_empty() {
                continue;
            }
            if wrote {
                writeln!(f)?;
            }
            for line in section {
                writeln!(f, "{line}")?;
            }
            wrote = true;
        }
        Ok(())
    }
}

fn sha256_hex(s: &str) -> String {
    Sha256::digest(s.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn subst_var(e: &Expr, name: &str, value: &Expr) -> Expr {
    match e {
        Expr::IndVar(n) | Expr::PredVar { name: n, .. } if n == name => value.clone(),
        Expr::FunApp { functor, args } => Expr::FunApp {
            functor: functor.clone(),
            args: args.iter().map(|a| subst_var(a, name, value)).collect(),
        },
        Expr::App { head, args } => Expr::App {
            head: Box::new(subst_var(head, name, value)),
            args: args.iter().map(|a| subst_var(a, name, value)).collect(),
        },
        Expr::Eq { lhs, rhs } => {
            Expr::eq(subst_var(lhs, name, value), subst_var(rhs, name, value))
        }
        other => other.clone(),
    }
}

fn occurs_var(e: &Expr, name: &str) -> bool {
    match e {
        Expr::IndVar(n) | Expr::PredVar { name: n, .. } => n == name,
        Expr::FunApp { args, .. } => args.iter().any(|a| occurs_var(a, name)),
        Expr::App { head, args } => {
            occurs_var(head, name) || args.iter().any(|a| occurs_var(a, name))
        }
        Expr::Eq { lhs, rhs } => occurs_var(lhs, name) || occurs_var(rhs, name),
        _ => false,
    }
}

/// Undoes head desugaring when the whole body inlines away, so facts print
/// as facts. Clauses with a residual body print exactly as stored.
fn resugar(c: &Clause) -> (Vec<Expr>, Vec<Literal>) {
    let mut args = c.params.clone();
    let mut body = c.body.clone();
    loop {
        let mut pick = None;
        for (i, l) in body.iter().enumerate() {
            if !l.positive {
                continue;
            }
            let Expr::Eq { lhs, rhs } = &l.atom else { continue };
            // prefer eliminating the synthesized variable so original
            // names survive
            let (v, t) = match (lhs.is_var(), rhs.is_var()) {
                (true, true) => {
                    let ln = lhs.var_name().expect("is_var checked");
                    let rn = rhs.var_name().expect("is_var checked");
                    if rn.starts_with('_') && !ln.starts_with('_') {
                        (rhs.as_ref(), lhs.as_ref())
                    } else {
                        (lhs.as_ref(), rhs.as_ref())
                    }
                }
                (true, false) => (lhs.as_ref(), rhs.as_ref()),
                (false, true) => (rhs.as_ref(), lhs.as_ref()),
                (false, false) => continue,
            };
            let name = v.var_name().expect("is_var checked").to_string();
            if occurs_var(t, &name) {
                continue;
            }
            pick = Some((i, name, t.clone()));
            break;
        }
        let Some((i, name, t)) = pick else { break };
        body.remove(i);
        for a in &mut args {
            *a = subst_var(a, &name, &t);
        }
        for l in &mut body {
            l.atom = subst_var(&l.atom, &name, &t);
        }
    }
    if body.is_empty() {
        (args, body)
    } else {
        (c.params.clone(), c.body.clone())
    }
}

fn head_text(pred: &str, args: &[Expr]) -> String {
    if args.is_empty() {
        pred.to_string()
    } else {
        format!("{pred}({})", args.iter().map(Expr::to_string).collect::<Vec<_>>().join(","))
    }
}

fn prolog_literal(l: &Literal) -> String {
    if l.positive {
        l.atom.to_string()
    } else {
        format!("\\+ {}", l.atom)
    }
}

fn clause_text(c: &Clause, render: fn(&Literal) -> String) -> String {
    let (args, body) = resugar(c);
    let head = head_text(&c.head, &args);
    if body.is_empty() {
        format!("{head}.")
    } else {
        let lits: Vec<String> = body.iter().map(render).collect();
        format!("{head} :- {}.", lits.join(", "))
    }
}

fn goal_text(g: &Goal) -> String {
    g.literals.iter().map(prolog_literal).collect::<Vec<_>>().join(", ")
}

fn driver_clause(g: &Goal) -> String {
    let vars: Vec<String> = g
        .vars()
        .iter()
        .filter(|v| v.ty().is_individual())
        .map(|v| v.var_name().expect("goal vars are variables").to_string())
        .collect();
    let body = goal_text(g);
    if vars.is_empty() {
        format!("main :- ( {body} -> writeln(yes) ; writeln(no) ).")
    } else {
        format!("main :- forall(({body}), writeln(ans({}))).", vars.join(","))
    }
}

/// Renders a first-order program as Prolog. Higher-order input is an error;
/// run it through the specializer or the defunctionalizer first.
pub fn emit_prolog(p: &Program, goal: Option<&Goal>, opts: &EmitOptions) -> Result<PrologDoc> {
    if let Some(pred) = first_order_offender(p) {
        return Err(Error::NotFirstOrder {
            message: format!("`{pred}` takes a predicate argument"),
        });
    }
    let mut doc = PrologDoc::default();
    doc.comments.push(format!("% firstify {}", env!("CARGO_PKG_VERSION")));
    if let Some(src) = opts.source {
        doc.comments.push(format!("% source-sha256: {}", sha256_hex(src)));
    }
    if let Some(g) = goal {
        doc.comments.push(format!("% query: {}", goal_text(g)));
    }
    for c in &p.clauses {
        doc.clauses.push(clause_text(c, prolog_literal));
    }
    if opts.driver {
        if let Some(g) = goal {
            doc.directives.push(":- initialization(main, main).".to_string());
            doc.clauses.push(driver_clause(g));
        }
    }
    Ok(doc)
}

fn type_text(t: &TypeExpr) -> String {
    match t {
        TypeExpr::Individual => "i".to_string(),
        TypeExpr::Pred { params } => format!(
            "pred({})",
            params.iter().map(type_text).collect::<Vec<_>>().join(",")
        ),
        _ => unreachable!("only argument types appear in signatures"),
    }
}

/// Prints a program back as source text, declarations first. Parsing the
/// result reproduces the same clauses and signatures.
pub fn program_to_hl(p: &Program) -> String {
    let mut out = String::new();
    for pred in &p.declared {
        if let Some(ty @ TypeExpr::Pred { params }) = p.pred_sigs.get(pred) {
            if params.is_empty() {
                continue;
            }
            out.push_str(&format!(":- hotype({pred}, {}).\n", type_text(ty)));
        }
    }
    if !out.is_empty() {
        out.push('\n');
    }
    for c in &p.clauses {
        out.push_str(&clause_text(c, Literal::to_string));
        out.push('\n');
    }
    out
}

/// Counts clauses that print as rules rather than facts.
pub fn count_rule_clauses(p: &Program) -> usize {
    p.clauses.iter().filter(|c| !resugar(c).1.is_empty()).count()
}

fn flat_pred_ty(n: usize) -> TypeExpr {
    if n == 0 {
        TypeExpr::Boolean
    } else {
        TypeExpr::Pred { params: vec![TypeExpr::Individual; n] }
    }
}

struct Encoder<'p> {
    src: &'p Program,
    /// `(pred, captured)` shapes that occur as predicate values.
    forms: BTreeSet<(String, usize)>,
    /// Arities of variable-headed call sites.
    call_arities: BTreeSet<usize>,
}

impl<'p> Encoder<'p> {
    fn apply_name(&self, k: usize) -> String {
        let mut name = format!("apply_{k}");
        while self.src.pred_sigs.contains_key(&name) {
            name.push_str("_r");
        }
        name
    }

    fn value(&mut self, e: &Expr) -> Result<Expr> {
        Ok(match e {
            Expr::PredVar { name, .. } => Expr::IndVar(name.clone()),
            Expr::PredConst { name, .. } => {
                self.forms.insert((name.clone(), 0));
                Expr::IndConst(name.clone())
            }
            Expr::App { head, args } => {
                let Expr::PredConst { name, .. } = head.as_ref() else {
                    return Err(Error::Type {
                        line: 0,
                        message: format!("cannot reify `{e}`: its head is not a constant"),
                    });
                };
                self.forms.insert((name.clone(), args.len()));
                Expr::FunApp {
                    functor: name.clone(),
                    args: args.iter().map(|a| self.value(a)).collect::<Result<_>>()?,
                }
            }
            Expr::FunApp { functor, args } => Expr::FunApp {
                functor: functor.clone(),
                args: args.iter().map(|a| self.value(a)).collect::<Result<_>>()?,
            },
            other => other.clone(),
        })
    }

    fn literal(&mut self, l: &Literal) -> Result<Literal> {
        let atom = match &l.atom {
            Expr::Eq { lhs, rhs } => Expr::eq(self.value(lhs)?, self.value(rhs)?),
            a => match a.atom_parts() {
                Some((pred, args)) => {
                    let pred = pred.to_string();
                    let n = args.len();
                    let encoded = args.iter().map(|x| self.value(x)).collect::<Result<Vec<_>>>()?;
                    let head = Expr::PredConst { name: pred, ty: flat_pred_ty(n) };
                    if n == 0 {
                        head
                    } else {
                        Expr::app(head, encoded)
                    }
                }
                None => match a {
                    Expr::App { head, args } => {
                        let Expr::PredVar { name, .. } = head.as_ref() else {
                            unreachable!("atom heads are constants or variables")
                        };
                        let k = args.len();
                        self.call_arities.insert(k);
                        let mut vargs = vec![Expr::IndVar(name.clone())];
                        for x in args {
                            vargs.push(self.value(x)?);
                        }
                        Expr::app(
                            Expr::PredConst { name: self.apply_name(k), ty: flat_pred_ty(k + 1) },
                            vargs,
                        )
                    }
                    _ => unreachable!("literal atoms are applications or equalities"),
                },
            },
        };
        Ok(Literal { positive: l.positive, atom })
    }
}

/// Reynolds-style defunctionalization: predicate values become ground terms
/// and every variable-headed call goes through an `apply_k` relation that
/// dispatches on the reified value. Always succeeds on well-typed input and
/// always yields a first-order program, at the price of an interpretive
/// layer that the specializer avoids.
pub fn defunctionalize_reynolds(p: &Program, g: &Goal) -> Result<(Program, Goal)> {
    let mut enc = Encoder { src: p, forms: BTreeSet::new(), call_arities: BTreeSet::new() };
    let mut clauses = Vec::with_capacity(p.clauses.len());
    for c in &p.clauses {
        let params = c.params.iter().map(|v| enc.value(v)).collect::<Result<Vec<_>>>()?;
        let body = c.body.iter().map(|l| enc.literal(l)).collect::<Result<Vec<_>>>()?;
        clauses.push(Clause { head: c.head.clone(), params, body, line: c.line });
    }
    let goal = Goal {
        literals: g.literals.iter().map(|l| enc.literal(l)).collect::<Result<Vec<_>>>()?,
    };

    let mut dispatch: Vec<(usize, String, usize)> = Vec::new();
    for (q, j) in &enc.forms {
        let Some(m) = p.pred_arity(q) else { continue };
        if *j >= m {
            continue;
        }
        dispatch.push((m - j, q.clone(), *j));
    }
    dispatch.sort();

    let mut arities: BTreeSet<usize> = enc.call_arities.clone();
    arities.extend(dispatch.iter().map(|(k, _, _)| *k));

    let mut func_arities = p.func_arities.clone();
    let mut apply_clauses = Vec::new();
    for (k, q, j) in &dispatch {
        let captured: Vec<Expr> = (1..=*j).map(|i| Expr::IndVar(format!("C{i}"))).collect();
        let passed: Vec<Expr> = (1..=*k).map(|i| Expr::IndVar(format!("X{i}"))).collect();
        let rep = if *j == 0 {
            Expr::IndConst(q.clone())
        } else {
            func_arities.entry(q.clone()).or_default().insert(*j);
            Expr::FunApp { functor: q.clone(), args: captured.clone() }
        };
        let call = Expr::app(
            Expr::PredConst { name: q.clone(), ty: flat_pred_ty(j + k) },
            captured.iter().chain(&passed).cloned().collect(),
        );
        let mut params = vec![Expr::IndVar("F".to_string())];
        params.extend(passed);
        apply_clauses.push(Clause {
            head: enc.apply_name(*k),
            params,
            body: vec![
                Literal::pos(Expr::eq(Expr::IndVar("F".to_string()), rep)),
                Literal::pos(call),
            ],
            line: 0,
        });
    }
    clauses.extend(apply_clauses);

    let mut pred_sigs = BTreeMap::new();
    for (name, ty) in &p.pred_sigs {
        let flat = match ty {
            TypeExpr::Pred { params } => flat_pred_ty(params.len()),
            other => other.clone(),
        };
        pred_sigs.insert(name.clone(), flat);
    }
    for k in &arities {
        pred_sigs.insert(enc.apply_name(*k), flat_pred_ty(k + 1));
    }

    let out = Program { clauses, pred_sigs, func_arities, declared: BTreeSet::new() };
    debug_assert!(out.validate().is_ok(), "defunctionalized program is well formed");
    Ok((out, goal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{check_equivalence, EngineLimits, Verdict};
    use crate::parser::{load_goal, load_program};
    use crate::specializer::firstify;

    const WINNOW: &str = "\
:- hotype(winnow, pred(pred(i,i), pred(i), i)).
:- hotype(bypassed, pred(pred(i,i), pred(i), i)).
winnow(P,R,T) :- R(T), not bypassed(P,R,T).
bypassed(P,R,T) :- R(Z), P(Z,T).
movie(m1).
movie(m2).
movie(m3).
pref(m1,m2).
pref(m2,m3).
";

    #[test]
    fn facts_resugar_and_rules_stay_rules() {
        let p = load_program("movie(m1).\nq(X,X).\nr(X) :- movie(X), \\+ X = m1.").unwrap();
        let doc = emit_prolog(&p, None, &EmitOptions::default()).unwrap();
        assert_eq!(
            doc.clauses,
            ["movie(m1).", "q(X,X).", "r(X) :- movie(X), \\+ X = m1."]
        );
    }

    #[test]
    fn emits_the_specialized_winnow_program() {
        let mut p = load_program(WINNOW).unwrap();
        let g = load_goal("winnow(pref, movie, T)", &mut p).unwrap();
        let out = firstify(&p, &g).unwrap();
        let opts = EmitOptions { source: Some(WINNOW), driver: false };
        let doc = emit_prolog(&out.program, Some(&out.goal), &opts).unwrap();
        assert!(doc.comments[0].starts_with("% firstify "));
        assert!(doc.comments[1].starts_with("% source-sha256: "));
        assert_eq!(doc.comments[1].len(), "% source-sha256: ".len() + 64);
        assert_eq!(doc.comments[2], "% query: winnow_s1(T)");
        assert_eq!(
            doc.clauses,
            [
                "winnow_s1(V1) :- movie(V1), \\+ bypassed_s1(V1).",
                "movie(m1).",
                "movie(m2).",
                "movie(m3).",
                "bypassed_s1(V1) :- movie(Z), pref(Z,V1).",
                "pref(m1,m2).",
                "pref(m2,m3).",
            ]
        );
    }

    #[test]
    fn higher_order_programs_do_not_emit() {
        let p = load_program(WINNOW).unwrap();
        match emit_prolog(&p, None, &EmitOptions::default()) {
            Err(Error::NotFirstOrder { message }) => assert!(message.contains("bypassed")),
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn driver_prints_answers() {
        let mut p = load_program("movie(m1).").unwrap();
        let g = load_goal("movie(X)", &mut p).unwrap();
        let opts = EmitOptions { source: None, driver: true };
        let doc = emit_prolog(&p, Some(&g), &opts).unwrap();
        assert_eq!(doc.directives, [":- initialization(main, main)."]);
        assert_eq!(doc.clauses.last().unwrap(), "main :- forall((movie(X)), writeln(ans(X))).");
    }

    #[test]
    fn source_round_trips_through_the_printer() {
        let src = format!(
            "{WINNOW}{}",
            ":- hotype(conj2, pred(pred(i), pred(i), i)).\n\
             conj2(P,Q,X) :- P(X), Q(X).\n\
             big(X) :- conj2(movie, conj2(movie, movie), X).\n"
        );
        let p1 = load_program(&src).unwrap();
        let text = program_to_hl(&p1);
        let p2 = load_program(&text).unwrap();
        let shown = |p: &Program| p.clauses.iter().map(Clause::to_string).collect::<Vec<_>>();
        assert_eq!(shown(&p1), shown(&p2));
        assert_eq!(p1.pred_sigs, p2.pred_sigs);
        assert_eq!(p1.func_arities, p2.func_arities);
        let text2 = program_to_hl(&p2);
        assert_eq!(text, text2);
    }

    #[test]
    fn reynolds_builds_apply_dispatch() {
        let mut p = load_program(WINNOW).unwrap();
        let g = load_goal("winnow(pref, movie, T)", &mut p).unwrap();
        let (out, goal) = defunctionalize_reynolds(&p, &g).unwrap();
        let text = program_to_hl(&out);
        assert!(text.contains("winnow(P,R,T) :- apply_1(R,T), not bypassed(P,R,T)."));
        assert!(text.contains("bypassed(P,R,T) :- apply_1(R,Z), apply_2(P,Z,T)."));
        assert!(text.contains("apply_1(F,X1) :- F = movie, movie(X1)."));
        assert!(text.contains("apply_2(F,X1,X2) :- F = pref, pref(X1,X2)."));
        assert_eq!(goal.to_string(), "winnow(pref,movie,T)");
        assert!(crate::analysis::is_first_order(&out));
    }

    #[test]
    fn reynolds_reifies_partial_applications() {
        let src = "\
:- hotype(conj2, pred(pred(i), pred(i), i)).
:- hotype(conj3, pred(pred(i), pred(i), pred(i), i)).
conj2(P,Q,X) :- P(X), Q(X).
conj3(P,Q,R,X) :- conj2(P, conj2(Q,R), X).
p1(a). p1(b). p2(b). p2(c). p3(b). p3(d).
";
        let mut p = load_program(src).unwrap();
        let g = load_goal("conj3(p1, p2, p3, X)", &mut p).unwrap();
        let (out, goal) = defunctionalize_reynolds(&p, &g).unwrap();
        let text = program_to_hl(&out);
        assert!(text.contains("conj3(P,Q,R,X) :- conj2(P,conj2(Q,R),X)."));
        assert!(text.contains("apply_1(F,X1) :- F = conj2(C1,C2), conj2(C1,C2,X1)."));
        assert_eq!(out.func_arities["conj2"], BTreeSet::from([2]));
        let limits = EngineLimits::default();
        let report = check_equivalence(&p, &g, &out, &goal, limits).unwrap();
        assert_eq!(report.verdict, Verdict::Equal);
    }

    #[test]
    fn reynolds_output_matches_the_original_answers() {
        let mut p = load_program(WINNOW).unwrap();
        let g = load_goal("winnow(pref, movie, T)", &mut p).unwrap();
        let (out, goal) = defunctionalize_reynolds(&p, &g).unwrap();
        let report = check_equivalence(&p, &g, &out, &goal, EngineLimits::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Equal);
    }

    #[test]
    fn rule_counts_ignore_facts() {
        let p = load_program(WINNOW).unwrap();
        assert_eq!(count_rule_clauses(&p), 2);
        assert_eq!(p.clauses.len(), 7);
    }
}
