//! Top-down SLD resolution with negation as failure.
//!
//! The engine runs higher-order and first-order programs alike: a predicate
//! name passed as a value is an ordinary constant, a partial application is
//! a structure, and a variable-headed call flattens whatever its head
//! resolves to. Negative literals must be ground when selected; anything
//! else flounders.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use super::{AnswerSet, Binding, GroundTerm};
use crate::ast::{Clause, Expr, Goal, Literal, Program};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineLimits {
    /// Maximum call depth of any derivation branch.
    pub max_depth: usize,
    /// Maximum number of resolution steps across the whole query.
    pub max_steps: u64,
}

impl Default for EngineLimits {
    fn default() -> EngineLimits {
        EngineLimits { max_depth: 512, max_steps: 1_000_000 }
    }
}

/// Node budget when flattening one term; stops runaway cyclic structures
/// that can exist when the occurs check is off.
const RESOLVE_BUDGET: usize = 10_000;

// ----- compiled form -----

#[derive(Debug, Clone)]
enum CTerm {
    Var(usize),
    Const(Rc<str>),
    Struct(Rc<str>, Vec<CTerm>),
}

#[derive(Debug)]
enum CAtom {
    Call { pred: Rc<str>, args: Vec<CTerm> },
    DynCall { slot: usize, name: String, args: Vec<CTerm> },
    Unify(CTerm, CTerm),
}

#[derive(Debug)]
struct CLit {
    positive: bool,
    atom: CAtom,
}

#[derive(Debug)]
struct CClause {
    arity: usize,
    nvars: usize,
    body: Rc<Vec<CLit>>,
    /// First-argument key when the clause starts with `param0 = const`,
    /// letting calls skip clauses that cannot match.
    dispatch: Option<Rc<str>>,
}

#[derive(Debug, Default)]
struct Compiled {
    preds: HashMap<String, Rc<Vec<CClause>>>,
}

#[derive(Default)]
struct Slots {
    map: BTreeMap<String, usize>,
}

impl Slots {
    fn slot(&mut self, name: &str) -> usize {
        let next = self.map.len();
        *self.map.entry(name.to_string()).or_insert(next)
    }

    fn len(&self) -> usize {
        self.map.len()
    }
}

fn compile_term(e: &Expr, slots: &mut Slots) -> Result<CTerm> {
    match e {
        Expr::IndVar(n) | Expr::PredVar { name: n, .. } => Ok(CTerm::Var(slots.slot(n))),
        Expr::IndConst(c) | Expr::PredConst { name: c, .. } => {
            Ok(CTerm::Const(Rc::from(c.as_str())))
        }
        Expr::FunApp { functor, args } => Ok(CTerm::Struct(
            Rc::from(functor.as_str()),
            args.iter().map(|a| compile_term(a, slots)).collect::<Result<_>>()?,
        )),
        Expr::App { head, args } => match &**head {
            // a partial application used as a value becomes a closure term
            Expr::PredConst { name, .. } => Ok(CTerm::Struct(
                Rc::from(name.as_str()),
                args.iter().map(|a| compile_term(a, slots)).collect::<Result<_>>()?,
            )),
            _ => Err(Error::Type {
                line: 0,
                message: format!("`{e}` cannot be passed as a value"),
            }),
        },
        Expr::Eq { .. } => Err(Error::Type { line: 0, message: "`=` is not a term".into() }),
    }
}

fn compile_literal(l: &Literal, slots: &mut Slots) -> Result<CLit> {
    let atom = match &l.atom {
        Expr::Eq { lhs, rhs } => {
            CAtom::Unify(compile_term(lhs, slots)?, compile_term(rhs, slots)?)
        }
        a => match a.atom_parts() {
            Some((pred, args)) => CAtom::Call {
                pred: Rc::from(pred),
                args: args.iter().map(|x| compile_term(x, slots)).collect::<Result<_>>()?,
            },
            None => match a {
                Expr::App { head, args } => match &**head {
                    Expr::PredVar { name, .. } => CAtom::DynCall {
                        slot: slots.slot(name),
                        name: name.clone(),
                        args: args
                            .iter()
                            .map(|x| compile_term(x, slots))
                            .collect::<Result<_>>()?,
                    },
                    _ => unreachable!("atom heads are constants or variables"),
                },
                _ => unreachable!("literal atoms are applications or equalities"),
            },
        },
    };
    Ok(CLit { positive: l.positive, atom })
}

fn compile_clause(c: &Clause) -> Result<CClause> {
    let mut slots = Slots::default();
    for p in &c.params {
        slots.slot(p.var_name().expect("clause parameters are variables"));
    }
    let arity = c.params.len();
    let body: Vec<CLit> =
        c.body.iter().map(|l| compile_literal(l, &mut slots)).collect::<Result<_>>()?;
    let dispatch = match body.first() {
        Some(CLit { positive: true, atom: CAtom::Unify(CTerm::Var(0), CTerm::Const(k)) })
            if arity > 0 =>
        {
            Some(k.clone())
        }
        _ => None,
    };
    Ok(CClause { arity, nvars: slots.len(), body: Rc::new(body), dispatch })
}

fn compile_program(p: &Program) -> Result<Compiled> {
    let mut preds: HashMap<String, Vec<CClause>> = HashMap::new();
    for c in &p.clauses {
        preds.entry(c.head.clone()).or_default().push(compile_clause(c)?);
    }
    Ok(Compiled { preds: preds.into_iter().map(|(k, v)| (k, Rc::new(v))).collect() })
}

// ----- runtime -----

#[derive(Debug, Clone)]
enum Term {
    Var(usize),
    Const(Rc<str>),
    Struct(Rc<str>, Rc<Vec<Term>>),
}

enum Cont {
    Done,
    Frame { body: Rc<Vec<CLit>>, idx: usize, base: usize, depth: usize, next: Rc<Cont> },
}

struct Choice {
    clauses: Rc<Vec<CClause>>,
    next: usize,
    args: Rc<Vec<Term>>,
    depth: usize,
    cont: Rc<Cont>,
    trail_len: usize,
    store_len: usize,
}

fn is_ground(t: &Term) -> bool {
    match t {
        Term::Var(_) => false,
        Term::Const(_) => true,
        Term::Struct(_, args) => args.iter().all(is_ground),
    }
}

fn show(t: &Term) -> String {
    match t {
        Term::Var(v) => format!("_G{v}"),
        Term::Const(c) => c.to_string(),
        Term::Struct(f, args) => {
            format!("{f}({})", args.iter().map(show).collect::<Vec<_>>().join(","))
        }
    }
}

fn to_ground(t: &Term) -> Option<GroundTerm> {
    match t {
        Term::Var(_) => None,
        Term::Const(c) => Some(GroundTerm::Const(c.to_string())),
        Term::Struct(f, args) => Some(GroundTerm::Struct(
            f.to_string(),
            args.iter().map(to_ground).collect::<Option<Vec<_>>>()?,
        )),
    }
}

struct Engine<'c> {
    compiled: &'c Compiled,
    limits: EngineLimits,
    occurs_check: bool,
    store: Vec<Option<Term>>,
    trail: Vec<usize>,
    steps: u64,
}

impl<'c> Engine<'c> {
    fn resolve(&self, t: &Term) -> Term {
        let mut cur = t.clone();
        loop {
            match cur {
                Term::Var(v) => match &self.store[v] {
                    Some(next) => cur = next.clone(),
                    None => return Term::Var(v),
                },
                other => return other,
            }
        }
    }

    fn fully_resolve(&self, t: &Term, budget: &mut usize) -> Result<Term> {
        if *budget == 0 {
            return Err(Error::Type {
                line: 0,
                message: "term resolution budget exhausted (cyclic term?)".into(),
            });
        }
        *budget -= 1;
        match self.resolve(t) {
            Term::Struct(f, args) => {
                let flat = args
                    .iter()
                    .map(|a| self.fully_resolve(a, budget))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Term::Struct(f, Rc::new(flat)))
            }
            other => Ok(other),
        }
    }

    fn bind(&mut self, v: usize, t: Term) {
        self.store[v] = Some(t);
        self.trail.push(v);
    }

    fn undo_to(&mut self, n: usize) {
        while self.trail.len() > n {
            let v = self.trail.pop().expect("trail length checked");
            self.store[v] = None;
        }
    }

    fn occurs_in(&self, v: usize, t: &Term) -> bool {
        match self.resolve(t) {
            Term::Var(w) => v == w,
            Term::Const(_) => false,
            Term::Struct(_, args) => args.iter().any(|a| self.occurs_in(v, a)),
        }
    }

    fn unify(&mut self, a: &Term, b: &Term) -> bool {
        let a = self.resolve(a);
        let b = self.resolve(b);
        match (a, b) {
            (Term::Var(x), Term::Var(y)) if x == y => true,
            (Term::Var(x), t) | (t, Term::Var(x)) => {
                if self.occurs_check && self.occurs_in(x, &t) {
                    return false;
                }
                self.bind(x, t);
                true
            }
            (Term::Const(x), Term::Const(y)) => x == y,
            (Term::Struct(f, xs), Term::Struct(g, ys)) => {
                f == g
                    && xs.len() == ys.len()
                    && xs.iter().zip(ys.iter()).all(|(x, y)| self.unify(x, y))
            }
            _ => false,
        }
    }

    fn check_steps(&self) -> Result<()> {
        if self.steps > self.limits.max_steps {
            Err(Error::StepsExceeded { limit: self.limits.max_steps })
        } else {
            Ok(())
        }
    }

    fn instantiate(&self, ct: &CTerm, base: usize) -> Term {
        match ct {
            CTerm::Var(s) => Term::Var(base + s),
            CTerm::Const(c) => Term::Const(c.clone()),
            CTerm::Struct(f, args) => Term::Struct(
                f.clone(),
                Rc::new(args.iter().map(|a| self.instantiate(a, base)).collect()),
            ),
        }
    }

    /// Restores state to the youngest choicepoint and activates its next
    /// matching clause, popping choicepoints as they run dry.
    fn advance(&mut self, cps: &mut Vec<Choice>) -> Result<Option<Rc<Cont>>> {
        while !cps.is_empty() {
            let ci = cps.len() - 1;
            self.undo_to(cps[ci].trail_len);
            self.store.truncate(cps[ci].store_len);
            let mut picked = None;
            {
                let ch = &cps[ci];
                let mut i = ch.next;
                while i < ch.clauses.len() {
                    let skip = match (&ch.clauses[i].dispatch, ch.args.first()) {
                        (Some(k), Some(a0)) => match self.resolve(a0) {
                            Term::Const(c) => c != *k,
                            _ => false,
                        },
                        _ => false,
                    };
                    if !skip {
                        picked = Some(i);
                        break;
                    }
                    i += 1;
                }
            }
            let Some(i) = picked else {
                cps.pop();
                continue;
            };
            cps[ci].next = i + 1;
            self.steps += 1;
            self.check_steps()?;
            let (body, nvars, arity, depth, cont, args) = {
                let ch = &cps[ci];
                let cl = &ch.clauses[i];
                (cl.body.clone(), cl.nvars, cl.arity, ch.depth, ch.cont.clone(), ch.args.clone())
            };
            let base = self.store.len();
            self.store.resize(base + nvars, None);
            // heads are linear, so parameters bind directly
            for (j, arg) in args.iter().enumerate().take(arity) {
                self.store[base + j] = Some(arg.clone());
            }
            return Ok(Some(Rc::new(Cont::Frame { body, idx: 0, base, depth, next: cont })));
        }
        Ok(None)
    }

    fn run(
        &mut self,
        mut current: Rc<Cont>,
        mut cps: Vec<Choice>,
        on_answer: &mut dyn FnMut(&mut Engine<'c>) -> Result<bool>,
    ) -> Result<()> {
        loop {
            let (body, idx, base, depth, next) = match &*current {
                Cont::Done => {
                    if !on_answer(self)? {
                        return Ok(());
                    }
                    match self.advance(&mut cps)? {
                        Some(c) => current = c,
                        None => return Ok(()),
                    }
                    continue;
                }
                Cont::Frame { body, idx, base, depth, next } => {
                    (body.clone(), *idx, *base, *depth, next.clone())
                }
            };
            if idx >= body.len() {
                current = next;
                continue;
            }
            let rest = Rc::new(Cont::Frame { body: body.clone(), idx: idx + 1, base, depth, next });
            let lit = &body[idx];
            match &lit.atom {
                CAtom::Unify(a, b) => {
                    self.steps += 1;
                    self.check_steps()?;
                    let ta = self.instantiate(a, base);
                    let tb = self.instantiate(b, base);
                    let ok = if lit.positive {
                        self.unify(&ta, &tb)
                    } else {
                        let mut budget = RESOLVE_BUDGET;
                        let ra = self.fully_resolve(&ta, &mut budget)?;
                        let rb = self.fully_resolve(&tb, &mut budget)?;
                        if !is_ground(&ra) || !is_ground(&rb) {
                            return Err(Error::Floundering {
                                atom: format!("{} = {}", show(&ra), show(&rb)),
                            });
                        }
                        let mark = self.trail.len();
                        let eq = self.unify(&ra, &rb);
                        self.undo_to(mark);
                        !eq
                    };
                    if ok {
                        current = rest;
                    } else {
                        match self.advance(&mut cps)? {
                            Some(c) => current = c,
                            None => return Ok(()),
                        }
                    }
                }
                CAtom::Call { .. } | CAtom::DynCall { .. } => {
                    let (pred, args): (Rc<str>, Vec<Term>) = match &lit.atom {
                        CAtom::Call { pred, args } => {
                            (pred.clone(), args.iter().map(|a| self.instantiate(a, base)).collect())
                        }
                        CAtom::DynCall { slot, name, args } => {
                            let head = self.resolve(&Term::Var(base + *slot));
                            let extra: Vec<Term> =
                                args.iter().map(|a| self.instantiate(a, base)).collect();
                            match head {
                                Term::Const(c) => (c, extra),
                                Term::Struct(f, captured) => {
                                    (f, captured.iter().cloned().chain(extra).collect())
                                }
                                Term::Var(_) => {
                                    return Err(Error::UnboundPredicateCall {
                                        name: name.clone(),
                                    })
                                }
                            }
                        }
                        CAtom::Unify(..) => unreachable!(),
                    };
                    if lit.positive {
                        let depth1 = depth + 1;
                        if depth1 > self.limits.max_depth {
                            return Err(Error::DepthExceeded { limit: self.limits.max_depth });
                        }
                        let clauses = self.compiled.preds.get(pred.as_ref()).cloned();
                        match clauses {
                            Some(clauses) => {
                                cps.push(Choice {
                                    clauses,
                                    next: 0,
                                    args: Rc::new(args),
                                    depth: depth1,
                                    cont: rest,
                                    trail_len: self.trail.len(),
                                    store_len: self.store.len(),
                                });
                            }
                            None => {
                                // an undefined predicate is an empty relation
                                self.steps += 1;
                                self.check_steps()?;
                            }
                        }
                        match self.advance(&mut cps)? {
                            Some(c) => current = c,
                            None => return Ok(()),
                        }
                    } else {
                        self.steps += 1;
                        self.check_steps()?;
                        let mut budget = RESOLVE_BUDGET;
                        let resolved: Vec<Term> = args
                            .iter()
                            .map(|a| self.fully_resolve(a, &mut budget))
                            .collect::<Result<_>>()?;
                        if resolved.iter().any(|t| !is_ground(t)) {
                            let shown =
                                resolved.iter().map(show).collect::<Vec<_>>().join(",");
                            return Err(Error::Floundering {
                                atom: format!("{pred}({shown})"),
                            });
                        }
                        if self.prove_exists(&pred, resolved, depth)? {
                            match self.advance(&mut cps)? {
                                Some(c) => current = c,
                                None => return Ok(()),
                            }
                        } else {
                            current = rest;
                        }
                    }
                }
            }
        }
    }

    /// Existence subproof for negation: runs the call to its first answer.
    fn prove_exists(&mut self, pred: &str, args: Vec<Term>, depth: usize) -> Result<bool> {
        let Some(clauses) = self.compiled.preds.get(pred).cloned() else {
            return Ok(false);
        };
        let depth1 = depth + 1;
        if depth1 > self.limits.max_depth {
            return Err(Error::DepthExceeded { limit: self.limits.max_depth });
        }
        let trail_mark = self.trail.len();
        let store_mark = self.store.len();
        let mut cps = vec![Choice {
            clauses,
            next: 0,
            args: Rc::new(args),
            depth: depth1,
            cont: Rc::new(Cont::Done),
            trail_len: trail_mark,
            store_len: store_mark,
        }];
        let mut found = false;
        if let Some(start) = self.advance(&mut cps)? {
            self.run(start, cps, &mut |_| {
                found = true;
                Ok(false)
            })?;
        }
        self.undo_to(trail_mark);
        self.store.truncate(store_mark);
        Ok(found)
    }
}

/// Enumerates every solution of the goal. Fails with `DepthExceeded` or
/// `StepsExceeded` when the limits cut the search off, so a completed run
/// really did visit the whole SLD tree.
pub fn solve_topdown(
    p: &Program,
    g: &Goal,
    limits: EngineLimits,
    occurs_check: bool,
) -> Result<AnswerSet> {
    let compiled = compile_program(p)?;
    let mut slots = Slots::default();
    let goal_vars: Vec<(String, usize, bool)> = g
        .vars()
        .iter()
        .map(|v| {
            let name = v.var_name().expect("goal vars are variables").to_string();
            let individual = v.ty().is_individual();
            let slot = slots.slot(&name);
            (name, slot, individual)
        })
        .collect();
    let body: Vec<CLit> =
        g.literals.iter().map(|l| compile_literal(l, &mut slots)).collect::<Result<_>>()?;
    let mut engine = Engine {
        compiled: &compiled,
        limits,
        occurs_check,
        store: vec![None; slots.len()],
        trail: Vec::new(),
        steps: 0,
    };
    let root = Rc::new(Cont::Frame {
        body: Rc::new(body),
        idx: 0,
        base: 0,
        depth: 0,
        next: Rc::new(Cont::Done),
    });
    let mut bindings: BTreeSet<Binding> = BTreeSet::new();
    engine.run(root, Vec::new(), &mut |eng| {
        let mut row = Binding::new();
        for (name, slot, individual) in &goal_vars {
            if !individual {
                continue;
            }
            let mut budget = RESOLVE_BUDGET;
            let t = eng.fully_resolve(&Term::Var(*slot), &mut budget)?;
            match to_ground(&t) {
                Some(gt) => {
                    row.insert(name.clone(), gt);
                }
                None => return Err(Error::NonGroundAnswer { var: name.clone() }),
            }
        }
        bindings.insert(row);
        Ok(true)
    })?;
    Ok(AnswerSet { bindings, steps: engine.steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{load_goal, load_program};

    fn answers(src: &str, goal: &str) -> Result<AnswerSet> {
        let mut p = load_program(src)?;
        let g = load_goal(goal, &mut p)?;
        solve_topdown(&p, &g, EngineLimits::default(), false)
    }

    fn names(a: &AnswerSet, var: &str) -> Vec<String> {
        a.bindings.iter().map(|b| b[var].to_string()).collect()
    }

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
    fn runs_a_higher_order_query() {
        // m2 and m3 are each bypassed by a preferred movie, m1 is not
        let a = answers(WINNOW, "winnow(pref, movie, T)").unwrap();
        assert_eq!(names(&a, "T"), ["m1"]);
        assert!(a.steps > 0);
    }

    #[test]
    fn recursion_through_predicate_arguments() {
        let src = "\
:- hotype(closure, pred(pred(i,i), i, i)).
closure(R,X,Y) :- R(X,Y).
closure(R,X,Y) :- R(X,Z), closure(R,Z,Y).
path(X,Y) :- closure(edge,X,Y).
edge(a,b).
edge(b,c).
";
        let a = answers(src, "path(X,Y)").unwrap();
        let pairs: Vec<String> =
            a.bindings.iter().map(|b| format!("{}{}", b["X"], b["Y"])).collect();
        assert_eq!(pairs, ["ab", "ac", "bc"]);
    }

    #[test]
    fn partial_applications_flatten_into_calls() {
        let src = "\
:- hotype(conj2, pred(pred(i), pred(i), i)).
:- hotype(conj3, pred(pred(i), pred(i), pred(i), i)).
conj2(P,Q,X) :- P(X), Q(X).
conj3(P,Q,R,X) :- conj2(P, conj2(Q,R), X).
p1(a). p1(b). p2(b). p2(c). p3(b). p3(d).
";
        let a = answers(src, "conj3(p1, p2, p3, X)").unwrap();
        assert_eq!(names(&a, "X"), ["b"]);
    }

    #[test]
    fn negation_requires_ground_arguments() {
        match answers("p(a).", "not p(X)") {
            Err(Error::Floundering { atom }) => assert!(atom.starts_with("p(")),
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn unbound_predicate_variables_are_errors() {
        let src = ":- hotype(w, pred(pred(i), i)).\nw(R,T) :- R(T).";
        match answers(src, "w(R, a)") {
            Err(Error::UnboundPredicateCall { name }) => assert_eq!(name, "R"),
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn depth_limit_stops_runaway_recursion() {
        match answers("loop(X) :- loop(X).", "loop(a)") {
            Err(Error::DepthExceeded { limit }) => assert_eq!(limit, 512),
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn step_limit_stops_wide_searches() {
        let mut p = load_program(WINNOW).unwrap();
        let g = load_goal("winnow(pref, movie, T)", &mut p).unwrap();
        let limits = EngineLimits { max_depth: 512, max_steps: 5 };
        match solve_topdown(&p, &g, limits, false) {
            Err(Error::StepsExceeded { limit }) => assert_eq!(limit, 5),
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn negated_equality_filters_ground_terms() {
        let a = answers("m(a). m(b).\nq(X) :- m(X), \\+ X = a.", "q(X)").unwrap();
        assert_eq!(names(&a, "X"), ["b"]);
    }

    #[test]
    fn occurs_check_rejects_cyclic_bindings() {
        let src = "p :- X = f(X).";
        let mut p = load_program(src).unwrap();
        let g = load_goal("p", &mut p).unwrap();
        let with = solve_topdown(&p, &g, EngineLimits::default(), true).unwrap();
        assert!(with.bindings.is_empty());
        let without = solve_topdown(&p, &g, EngineLimits::default(), false).unwrap();
        assert_eq!(without.bindings.len(), 1);
    }

    #[test]
    fn ground_queries_answer_with_the_empty_binding() {
        let yes = answers("p(a).", "p(a)").unwrap();
        assert_eq!(yes.bindings.len(), 1);
        assert!(yes.bindings.iter().next().unwrap().is_empty());
        let no = answers("p(a).", "p(b)").unwrap();
        assert!(no.bindings.is_empty());
    }

    #[test]
    fn functions_build_and_match_structures() {
        let a = answers("p(f(a)). q(X) :- p(f(X)).", "q(X)").unwrap();
        assert_eq!(names(&a, "X"), ["a"]);
    }
}
