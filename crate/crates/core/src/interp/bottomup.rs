//! Bottom-up semi-naive evaluation for the stratified, function-free,
//! first-order core.
//!
//! Admission is checked up front: every predicate takes individuals only,
//! no term uses a function symbol, negation is stratified, and each clause
//! admits a literal ordering that grounds variables before they are needed
//! by a negative literal or the head. Programs outside the core should go
//! through the top-down engine instead.

use std::collections::{BTreeMap, BTreeSet};

use super::{AnswerSet, Binding, GroundTerm};
use crate::analysis::{first_order_offender, DepGraph};
use crate::ast::{Clause, Expr, Goal, Literal, Program};
use crate::error::{Error, Result};

type Tuple = Vec<GroundTerm>;
type Relation = BTreeSet<Tuple>;

/// A fixpoint model: every derivable ground tuple, per predicate.
#[derive(Debug, Clone)]
pub struct Model {
    pub relations: BTreeMap<String, Relation>,
    /// Tuples produced during evaluation, counting duplicates.
    pub steps: u64,
}

impl Model {
    pub fn facts(&self) -> u64 {
        self.relations.values().map(|r| r.len() as u64).sum()
    }
}

#[derive(Debug, Clone)]
enum FTerm {
    Var(usize),
    Const(String),
}

#[derive(Debug)]
enum FLit {
    Rel { positive: bool, pred: String, args: Vec<FTerm> },
    Eq { positive: bool, lhs: FTerm, rhs: FTerm },
}

#[derive(Debug)]
struct FClause {
    head: String,
    arity: usize,
    nvars: usize,
    body: Vec<FLit>,
    /// Evaluation order over body indices, grounding-safe.
    order: Vec<usize>,
}

#[derive(Default)]
struct VarTable {
    map: BTreeMap<String, usize>,
    names: Vec<String>,
}

impl VarTable {
    fn slot(&mut self, name: &str) -> usize {
        if let Some(&s) = self.map.get(name) {
            return s;
        }
        let s = self.names.len();
        self.map.insert(name.to_string(), s);
        self.names.push(name.to_string());
        s
    }
}

fn compile_fterm(e: &Expr, vt: &mut VarTable) -> Result<FTerm> {
    match e {
        Expr::IndVar(n) => Ok(FTerm::Var(vt.slot(n))),
        Expr::IndConst(c) => Ok(FTerm::Const(c.clone())),
        Expr::FunApp { functor, .. } => Err(Error::HasFunctions { functor: functor.clone() }),
        other => Err(Error::NotFirstOrder {
            message: format!("`{other}` is not an individual term"),
        }),
    }
}

fn compile_flit(l: &Literal, vt: &mut VarTable) -> Result<FLit> {
    match &l.atom {
        Expr::Eq { lhs, rhs } => Ok(FLit::Eq {
            positive: l.positive,
            lhs: compile_fterm(lhs, vt)?,
            rhs: compile_fterm(rhs, vt)?,
        }),
        a => match a.atom_parts() {
            Some((pred, args)) => Ok(FLit::Rel {
                positive: l.positive,
                pred: pred.to_string(),
                args: args.iter().map(|x| compile_fterm(x, vt)).collect::<Result<_>>()?,
            }),
            None => Err(Error::NotFirstOrder {
                message: format!("`{a}` has a variable predicate"),
            }),
        },
    }
}

fn term_vars(t: &FTerm, out: &mut Vec<usize>) {
    if let FTerm::Var(s) = t {
        out.push(*s);
    }
}

enum OrderFailure {
    Stuck,
    UnboundHead(usize),
}

/// Finds an evaluation order that grounds every variable before a negative
/// literal consumes it and before the head is assembled.
fn order_literals(body: &[FLit], arity: usize, nvars: usize) -> std::result::Result<Vec<usize>, OrderFailure> {
    let mut bound = vec![false; nvars];
    let mut used = vec![false; body.len()];
    let mut order = Vec::with_capacity(body.len());
    let is_bound = |t: &FTerm, bound: &[bool]| match t {
        FTerm::Var(s) => bound[*s],
        FTerm::Const(_) => true,
    };
    while order.len() < body.len() {
        let mut picked = None;
        for (i, lit) in body.iter().enumerate() {
            if used[i] {
                continue;
            }
            let ready = match lit {
                FLit::Rel { positive: true, .. } => true,
                FLit::Rel { positive: false, args, .. } => {
                    args.iter().all(|a| is_bound(a, &bound))
                }
                FLit::Eq { positive: true, lhs, rhs } => {
                    is_bound(lhs, &bound) || is_bound(rhs, &bound)
                }
                FLit::Eq { positive: false, lhs, rhs } => {
                    is_bound(lhs, &bound) && is_bound(rhs, &bound)
                }
            };
            if ready {
                picked = Some(i);
                break;
            }
        }
        let Some(i) = picked else {
            return Err(OrderFailure::Stuck);
        };
        used[i] = true;
        order.push(i);
        match &body[i] {
            FLit::Rel { positive: true, args, .. } => {
                for a in args {
                    if let FTerm::Var(s) = a {
                        bound[*s] = true;
                    }
                }
            }
            FLit::Eq { positive: true, lhs, rhs } => {
                let mut vs = Vec::new();
                term_vars(lhs, &mut vs);
                term_vars(rhs, &mut vs);
                for s in vs {
                    bound[s] = true;
                }
            }
            _ => {}
        }
    }
    if let Some(s) = (0..arity).find(|s| !bound[*s]) {
        return Err(OrderFailure::UnboundHead(s));
    }
    Ok(order)
}

fn compile_clause(c: &Clause) -> Result<FClause> {
    let mut vt = VarTable::default();
    for p in &c.params {
        vt.slot(p.var_name().expect("clause parameters are variables"));
    }
    let arity = c.params.len();
    let body: Vec<FLit> =
        c.body.iter().map(|l| compile_flit(l, &mut vt)).collect::<Result<_>>()?;
    let nvars = vt.names.len();
    let order = order_literals(&body, arity, nvars).map_err(|f| {
        let message = match f {
            OrderFailure::Stuck => {
                "no literal ordering grounds every negated or compared variable".to_string()
            }
            OrderFailure::UnboundHead(s) => {
                format!("head variable `{}` is not bound by the body", vt.names[s])
            }
        };
        Error::UnsafeClause { pred: c.head.clone(), line: c.line, message }
    })?;
    Ok(FClause { head: c.head.clone(), arity, nvars, body, order })
}

struct Prepared {
    clauses: Vec<FClause>,
    strata: Vec<Vec<String>>,
}

fn prepare(p: &Program) -> Result<Prepared> {
    if let Some(pred) = first_order_offender(p) {
        return Err(Error::NotFirstOrder {
            message: format!("`{pred}` takes a predicate argument"),
        });
    }
    if let Some(f) = p.func_arities.keys().next() {
        return Err(Error::HasFunctions { functor: f.clone() });
    }
    let strata = DepGraph::build(p).strata()?;
    let clauses = p.clauses.iter().map(compile_clause).collect::<Result<Vec<_>>>()?;
    Ok(Prepared { clauses, strata })
}

/// True when `eval_bottom_up` accepts the program.
pub fn bottom_up_admissible(p: &Program) -> bool {
    prepare(p).is_ok()
}

struct JoinCtx<'a> {
    rule: &'a FClause,
    model: &'a BTreeMap<String, Relation>,
    delta_at: Option<usize>,
    delta: &'a BTreeMap<String, Relation>,
}

fn value(t: &FTerm, env: &[Option<GroundTerm>]) -> Option<GroundTerm> {
    match t {
        FTerm::Const(c) => Some(GroundTerm::Const(c.clone())),
        FTerm::Var(s) => env[*s].clone(),
    }
}

fn join(
    ctx: &JoinCtx,
    k: usize,
    env: &mut [Option<GroundTerm>],
    out: &mut Vec<Tuple>,
    steps: &mut u64,
) {
    if k == ctx.rule.order.len() {
        let tuple: Tuple = (0..ctx.rule.arity)
            .map(|s| env[s].clone().expect("ordering grounds head variables"))
            .collect();
        *steps += 1;
        out.push(tuple);
        return;
    }
    let empty = Relation::new();
    match &ctx.rule.body[ctx.rule.order[k]] {
        FLit::Rel { positive: true, pred, args } => {
            let source = if ctx.delta_at == Some(k) {
                ctx.delta.get(pred).unwrap_or(&empty)
            } else {
                ctx.model.get(pred).unwrap_or(&empty)
            };
            for tuple in source {
                let mut assigned = Vec::new();
                let mut ok = true;
                for (a, t) in args.iter().zip(tuple) {
                    match a {
                        FTerm::Const(c) => {
                            if !matches!(t, GroundTerm::Const(tc) if tc == c) {
                                ok = false;
                                break;
                            }
                        }
                        FTerm::Var(s) => match &env[*s] {
                            Some(v) => {
                                if v != t {
                                    ok = false;
                                    break;
                                }
                            }
                            None => {
                                env[*s] = Some(t.clone());
                                assigned.push(*s);
                            }
                        },
                    }
                }
                if ok {
                    join(ctx, k + 1, env, out, steps);
                }
                for s in assigned {
                    env[s] = None;
                }
            }
        }
        FLit::Rel { positive: false, pred, args } => {
            let tuple: Tuple = args
                .iter()
                .map(|a| value(a, env).expect("ordering grounds negated literals"))
                .collect();
            let present = ctx.model.get(pred).is_some_and(|r| r.contains(&tuple));
            if !present {
                join(ctx, k + 1, env, out, steps);
            }
        }
        FLit::Eq { positive, lhs, rhs } => match (value(lhs, env), value(rhs, env)) {
            (Some(a), Some(b)) => {
                if (a == b) == *positive {
                    join(ctx, k + 1, env, out, steps);
                }
            }
            (Some(v), None) => {
                let FTerm::Var(s) = rhs else { unreachable!("unbound side is a variable") };
                debug_assert!(positive, "negative equality is fully bound when selected");
                env[*s] = Some(v);
                join(ctx, k + 1, env, out, steps);
                env[*s] = None;
            }
            (None, Some(v)) => {
                let FTerm::Var(s) = lhs else { unreachable!("unbound side is a variable") };
                debug_assert!(positive, "negative equality is fully bound when selected");
                env[*s] = Some(v);
                join(ctx, k + 1, env, out, steps);
                env[*s] = None;
            }
            (None, None) => unreachable!("ordering admits equality with a bound side"),
        },
    }
}

fn eval_rule(
    rule: &FClause,
    model: &BTreeMap<String, Relation>,
    delta_at: Option<usize>,
    delta: &BTreeMap<String, Relation>,
    steps: &mut u64,
) -> Vec<Tuple> {
    let ctx = JoinCtx { rule, model, delta_at, delta };
    let mut env = vec![None; rule.nvars];
    let mut out = Vec::new();
    join(&ctx, 0, &mut env, &mut out, steps);
    out
}

/// Positions in the rule's evaluation order holding a positive literal of
/// the current stratum; these are the semi-naive delta slots.
fn delta_positions(rule: &FClause, stratum: &BTreeSet<&str>) -> Vec<usize> {
    rule.order
        .iter()
        .enumerate()
        .filter_map(|(k, &li)| match &rule.body[li] {
            FLit::Rel { positive: true, pred, .. } if stratum.contains(pred.as_str()) => {
                Some(k)
            }
            _ => None,
        })
        .collect()
}

/// Computes the perfect model, stratum by stratum.
pub fn eval_bottom_up(p: &Program) -> Result<Model> {
    let prep = prepare(p)?;
    let mut relations: BTreeMap<String, Relation> = BTreeMap::new();
    for name in p.pred_sigs.keys() {
        relations.insert(name.clone(), Relation::new());
    }
    let mut steps: u64 = 0;
    for names in &prep.strata {
        let stratum: BTreeSet<&str> = names.iter().map(String::as_str).collect();
        let rules: Vec<&FClause> =
            prep.clauses.iter().filter(|c| stratum.contains(c.head.as_str())).collect();
        let mut delta: BTreeMap<String, Relation> = BTreeMap::new();
        for rule in &rules {
            for t in eval_rule(rule, &relations, None, &delta, &mut steps) {
                if !relations[&rule.head].contains(&t) {
                    delta.entry(rule.head.clone()).or_default().insert(t);
                }
            }
        }
        while delta.values().any(|r| !r.is_empty()) {
            for (pred, rel) in &delta {
                relations.get_mut(pred).expect("all predicates have relations").extend(rel.iter().cloned());
            }
            let mut next: BTreeMap<String, Relation> = BTreeMap::new();
            for rule in &rules {
                for k in delta_positions(rule, &stratum) {
                    for t in eval_rule(rule, &relations, Some(k), &delta, &mut steps) {
                        if !relations[&rule.head].contains(&t) {
                            next.entry(rule.head.clone()).or_default().insert(t);
                        }
                    }
                }
            }
            delta = next;
        }
    }
    Ok(Model { relations, steps })
}

/// Reads the goal off a computed model.
pub fn query_model(model: &Model, g: &Goal) -> Result<AnswerSet> {
    let mut vt = VarTable::default();
    let goal_vars: Vec<(String, usize)> = g
        .vars()
        .iter()
        .filter(|v| v.ty().is_individual())
        .map(|v| {
            let name = v.var_name().expect("goal vars are variables").to_string();
            let slot = vt.slot(&name);
            (name, slot)
        })
        .collect();
    let arity = vt.names.len();
    let body: Vec<FLit> =
        g.literals.iter().map(|l| compile_flit(l, &mut vt)).collect::<Result<_>>()?;
    let nvars = vt.names.len();
    let order = order_literals(&body, arity, nvars).map_err(|f| match f {
        OrderFailure::Stuck => Error::UnsafeClause {
            pred: "?-".into(),
            line: 0,
            message: "no literal ordering grounds every negated or compared variable".into(),
        },
        OrderFailure::UnboundHead(s) => Error::NonGroundAnswer { var: vt.names[s].clone() },
    })?;
    let rule = FClause { head: "?-".into(), arity, nvars, body, order };
    let mut steps = model.steps;
    let rows = eval_rule(&rule, &model.relations, None, &BTreeMap::new(), &mut steps);
    let mut bindings: BTreeSet<Binding> = BTreeSet::new();
    for row in rows {
        let mut b = Binding::new();
        for (name, slot) in &goal_vars {
            b.insert(name.clone(), row[*slot].clone());
        }
        bindings.insert(b);
    }
    Ok(AnswerSet { bindings, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::topdown::{solve_topdown, EngineLimits};
    use crate::parser::{load_goal, load_program};

    const WINNOW_FO: &str = "\
winnow_s1(T) :- movie(T), not bypassed_s1(T).
bypassed_s1(T) :- movie(Z), pref(Z,T).
movie(m1).
movie(m2).
movie(m3).
pref(m1,m2).
pref(m2,m3).
";

    fn run(src: &str, goal: &str) -> Result<AnswerSet> {
        let mut p = load_program(src)?;
        let g = load_goal(goal, &mut p)?;
        let model = eval_bottom_up(&p)?;
        query_model(&model, &g)
    }

    #[test]
    fn stratified_negation_matches_top_down() {
        let mut p = load_program(WINNOW_FO).unwrap();
        let g = load_goal("winnow_s1(T)", &mut p).unwrap();
        let model = eval_bottom_up(&p).unwrap();
        let bu = query_model(&model, &g).unwrap();
        let td = solve_topdown(&p, &g, EngineLimits::default(), false).unwrap();
        assert_eq!(bu.bindings, td.bindings);
        assert_eq!(bu.bindings.len(), 1);
    }

    #[test]
    fn transitive_closure_saturates() {
        let src = "\
path(X,Y) :- edge(X,Y).
path(X,Y) :- edge(X,Z), path(Z,Y).
edge(a,b). edge(b,c). edge(c,d).
";
        let a = run(src, "path(a, Y)").unwrap();
        let ys: Vec<String> = a.bindings.iter().map(|b| b["Y"].to_string()).collect();
        assert_eq!(ys, ["b", "c", "d"]);
    }

    #[test]
    fn unstratified_programs_are_rejected() {
        let p = load_program("p :- not p.").unwrap();
        match eval_bottom_up(&p) {
            Err(Error::NotStratified { pred }) => assert_eq!(pred, "p"),
            other => panic!("unexpected result {other:?}"),
        }
        assert!(!bottom_up_admissible(&p));
    }

    #[test]
    fn function_symbols_are_rejected() {
        let p = load_program("p(f(a)).").unwrap();
        match eval_bottom_up(&p) {
            Err(Error::HasFunctions { functor }) => assert_eq!(functor, "f"),
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn higher_order_programs_are_rejected() {
        let src = ":- hotype(w, pred(pred(i), i)).\nw(R,T) :- R(T).";
        let p = load_program(src).unwrap();
        assert!(!bottom_up_admissible(&p));
        match eval_bottom_up(&p) {
            Err(Error::NotFirstOrder { .. }) => {}
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn unsafe_negation_is_rejected() {
        let p = load_program("q(a).\np(X) :- not q(X).").unwrap();
        match eval_bottom_up(&p) {
            Err(Error::UnsafeClause { pred, .. }) => assert_eq!(pred, "p"),
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn unbound_head_variables_are_rejected() {
        let p = load_program("r.\np(X) :- r.").unwrap();
        match eval_bottom_up(&p) {
            Err(Error::UnsafeClause { pred, message, .. }) => {
                assert_eq!(pred, "p");
                assert!(message.contains("head variable `X`"));
            }
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn ground_and_negative_goals_work() {
        let yes = run(WINNOW_FO, "winnow_s1(m1)").unwrap();
        assert_eq!(yes.bindings.len(), 1);
        let no = run(WINNOW_FO, "winnow_s1(m2)").unwrap();
        assert!(no.bindings.is_empty());
        let neg = run(WINNOW_FO, "movie(X), not bypassed_s1(X)").unwrap();
        let xs: Vec<String> = neg.bindings.iter().map(|b| b["X"].to_string()).collect();
        assert_eq!(xs, ["m1"]);
    }

    #[test]
    fn facts_and_steps_are_counted() {
        let p = load_program(WINNOW_FO).unwrap();
        let model = eval_bottom_up(&p).unwrap();
        assert_eq!(model.relations["movie"].len(), 3);
        assert_eq!(model.relations["bypassed_s1"].len(), 2);
        assert_eq!(model.relations["winnow_s1"].len(), 1);
        assert!(model.steps >= model.facts());
    }
}
