//! Predicate specialization: partial evaluation restricted to
//! predicate-typed arguments.
//!
//! Starting from the goal's atoms, the engine repeatedly unfolds each
//! specialization atom one step and abstracts the atoms of the resulting
//! bodies: individual arguments are generalized to fresh variables while
//! predicate-typed arguments are kept verbatim. The set of specialization
//! atoms grows until closed under unfolding (variants are identified), at
//! which point each atom is renamed to a fresh first-order predicate whose
//! parameters are the atom's variables.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::analysis::check_extended_fragment;
use crate::ast::{
    clause_vars, vars, canonicalize_atom, CanonAtom, Clause, Expr, Goal, Literal, Program,
    Substitution, TypeExpr,
};
use crate::error::{Error, Result};

/// Hard ceiling on fixpoint rounds; the fragment checks keep real inputs far
/// below it, so hitting it means a soundness bug rather than a big program.
const MAX_ITERATIONS: usize = 10_000;

/// Insertion-ordered set of specialization atoms.
#[derive(Debug, Clone, Default)]
pub struct SpecSet {
    atoms: Vec<CanonAtom>,
    seen: HashSet<CanonAtom>,
}

impl SpecSet {
    pub fn insert(&mut self, atom: CanonAtom) -> bool {
        if self.seen.contains(&atom) {
            return false;
        }
        self.seen.insert(atom.clone());
        self.atoms.push(atom);
        true
    }

    pub fn contains(&self, atom: &CanonAtom) -> bool {
        self.seen.contains(atom)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CanonAtom> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// An unfolded clause: its head is still a specialization atom; renaming
/// flattens it into an ordinary clause head.
#[derive(Debug, Clone)]
pub struct SpecClause {
    pub head: CanonAtom,
    pub body: Vec<Literal>,
}

/// Generalizes an atom for the specialization set: every individual argument
/// becomes a fresh variable, predicate-typed arguments stay as they are, and
/// the result is canonicalized. Idempotent on atoms already in the set.
pub fn abstract_atom(atom: &Expr) -> Result<CanonAtom> {
    let (head, args): (Expr, &[Expr]) = match atom {
        Expr::PredConst { .. } => (atom.clone(), &[]),
        Expr::App { head, args } if matches!(**head, Expr::PredConst { .. }) => {
            ((**head).clone(), args.as_slice())
        }
        _ => return Err(Error::NotAnAtom { expr: atom.to_string() }),
    };
    if args.is_empty() {
        return canonicalize_atom(&head);
    }
    let mut used: BTreeSet<String> = vars(atom)
        .iter()
        .filter_map(|v| v.var_name().map(String::from))
        .collect();
    let mut n = 0;
    let mut fresh = move || loop {
        n += 1;
        let c = format!("_A{n}");
        if used.insert(c.clone()) {
            return c;
        }
    };
    let abstracted = args
        .iter()
        .map(|a| {
            if a.ty().is_individual() {
                Expr::IndVar(fresh())
            } else {
                a.clone()
            }
        })
        .collect();
    canonicalize_atom(&Expr::app(head, abstracted))
}

/// The specialization seed an atom contributes: none for equalities and for
/// variable-headed atoms (those stay residual).
fn seed_of(literal: &Literal) -> Result<Option<CanonAtom>> {
    match &literal.atom {
        Expr::Eq { .. } => Ok(None),
        a if a.atom_parts().is_some() => abstract_atom(a).map(Some),
        _ => Ok(None),
    }
}

/// One unfolding step for a single atom and clause: bind the clause
/// parameters to the atom's arguments, standardizing apart any clause-local
/// variables that collide with the atom's.
fn unfold_one(clause: &Clause, atom: &CanonAtom) -> Result<SpecClause> {
    let atom_vars: BTreeSet<String> = atom
        .vars()
        .iter()
        .filter_map(|v| v.var_name().map(String::from))
        .collect();
    let param_names: BTreeSet<&str> =
        clause.params.iter().filter_map(|p| p.var_name()).collect();
    let mut taken: BTreeSet<String> = atom_vars.clone();
    let mut rho = Substitution::new();
    let mut n = 0;
    for v in clause_vars(clause) {
        let name = v.var_name().expect("clause vars are variables");
        taken.insert(name.to_string());
        if param_names.contains(name) || !atom_vars.contains(name) {
            continue;
        }
        let fresh = loop {
            n += 1;
            let c = format!("_L{n}");
            if taken.insert(c.clone()) {
                break c;
            }
        };
        let renamed = match &v {
            Expr::IndVar(_) => Expr::IndVar(fresh),
            Expr::PredVar { ty, .. } => Expr::PredVar { name: fresh, ty: ty.clone() },
            _ => unreachable!(),
        };
        rho.bind(&v, renamed)?;
    }
    let theta = Substitution::from_pairs(&clause.params, &atom.args)?;
    let body = theta.apply_literals(&rho.apply_literals(&clause.body));
    Ok(SpecClause { head: atom.clone(), body })
}

/// Unfolds every atom of the set one step against the program. Also reports
/// the predicates that have no clauses (database relations, typically).
pub fn unfold(p: &Program, s: &SpecSet) -> Result<(Vec<SpecClause>, BTreeSet<String>)> {
    let mut clauses = Vec::new();
    let mut undefined = BTreeSet::new();
    for atom in s.iter() {
        let mut any = false;
        for clause in p.clauses_of(&atom.pred) {
            any = true;
            clauses.push(unfold_one(clause, atom)?);
        }
        if !any {
            undefined.insert(atom.pred.clone());
        }
    }
    Ok((clauses, undefined))
}

/// Abstracts the atoms of the unfolded bodies, in clause-then-literal order.
pub fn abstract_atoms(clauses: &[SpecClause]) -> Result<Vec<CanonAtom>> {
    let mut out = Vec::new();
    for c in clauses {
        for l in &c.body {
            if let Some(a) = seed_of(l)? {
                out.push(a);
            }
        }
    }
    Ok(out)
}

#[derive(Debug)]
pub struct Specialized {
    pub clauses: Vec<SpecClause>,
    pub spec_set: SpecSet,
    pub iterations: usize,
    pub undefined: BTreeSet<String>,
}

/// Grows the specialization set to a fixpoint and returns the final
/// unfolding. Runs at most `1 + |S|` rounds: every round but the last adds
/// an atom.
pub fn specialize(p: &Program, seeds: impl IntoIterator<Item = CanonAtom>) -> Result<Specialized> {
    let mut s = SpecSet::default();
    for seed in seeds {
        s.insert(seed);
    }
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > MAX_ITERATIONS {
            return Err(Error::Type {
                line: 0,
                message: "specialization did not reach a fixpoint".into(),
            });
        }
        let (clauses, undefined) = unfold(p, &s)?;
        let mut grew = false;
        for atom in abstract_atoms(&clauses)? {
            grew |= s.insert(atom);
        }
        if !grew {
            return Ok(Specialized { clauses, spec_set: s, iterations, undefined });
        }
    }
}

// ----- renaming -----

#[derive(Debug, Clone)]
pub struct RenameEntry {
    pub name: String,
    /// The atom's variables in canonical order; the parameter list of the
    /// renamed predicate.
    pub params: Vec<Expr>,
    pub most_general: bool,
}

/// Maps each specialization atom to its first-order predicate.
#[derive(Debug, Default)]
pub struct RenameTable {
    entries: Vec<(CanonAtom, RenameEntry)>,
    index: HashMap<CanonAtom, usize>,
}

impl RenameTable {
    /// Names the atoms in insertion order: a most-general atom keeps its
    /// predicate's name, anything else gets the next free `<pred>_s<k>`.
    pub fn build(s: &SpecSet, source: &Program) -> RenameTable {
        let mut taken: BTreeSet<String> = source.pred_sigs.keys().cloned().collect();
        let mut counters: BTreeMap<String, usize> = BTreeMap::new();
        let mut table = RenameTable::default();
        for atom in s.iter() {
            let (name, most_general) = if atom.is_most_general() {
                (atom.pred.clone(), true)
            } else {
                let k = counters.entry(atom.pred.clone()).or_insert(0);
                let name = loop {
                    *k += 1;
                    let candidate = format!("{}_s{}", atom.pred, k);
                    if !taken.contains(&candidate) {
                        break candidate;
                    }
                };
                (name, false)
            };
            taken.insert(name.clone());
            let entry = RenameEntry { name, params: atom.vars(), most_general };
            table.index.insert(atom.clone(), table.entries.len());
            table.entries.push((atom.clone(), entry));
        }
        table
    }

    pub fn entries(&self) -> impl Iterator<Item = &(CanonAtom, RenameEntry)> {
        self.entries.iter()
    }

    pub fn get(&self, atom: &CanonAtom) -> Option<&RenameEntry> {
        self.index.get(atom).map(|&i| &self.entries[i].1)
    }

    fn lookup(&self, atom: &CanonAtom) -> Option<&(CanonAtom, RenameEntry)> {
        self.index.get(atom).map(|&i| &self.entries[i])
    }
}

fn bind_consistent(binds: &mut BTreeMap<String, Expr>, name: &str, value: &Expr) -> bool {
    match binds.get(name) {
        Some(prev) => prev == value,
        None => {
            binds.insert(name.to_string(), value.clone());
            true
        }
    }
}

/// One-way matching of a canonical pattern against an actual expression.
fn match_pattern(pattern: &Expr, actual: &Expr, binds: &mut BTreeMap<String, Expr>) -> bool {
    match (pattern, actual) {
        (Expr::IndVar(n), a) => bind_consistent(binds, n, a),
        (Expr::PredVar { name, .. }, a) => bind_consistent(binds, name, a),
        (Expr::IndConst(x), Expr::IndConst(y)) => x == y,
        (Expr::PredConst { name: x, .. }, Expr::PredConst { name: y, .. }) => x == y,
        (Expr::FunApp { functor: f, args: xs }, Expr::FunApp { functor: g, args: ys }) => {
            f == g && xs.len() == ys.len()
                && xs.iter().zip(ys).all(|(x, y)| match_pattern(x, y, binds))
        }
        (Expr::App { head: h, args: xs }, Expr::App { head: k, args: ys }) => {
            xs.len() == ys.len()
                && match_pattern(h, k, binds)
                && xs.iter().zip(ys).all(|(x, y)| match_pattern(x, y, binds))
        }
        _ => false,
    }
}

/// Rewrites one atom through the table: abstract it, look the variant up,
/// and re-extract the arguments sitting at the entry's parameter positions.
fn rename_atom(atom: &Expr, table: &RenameTable) -> Result<Expr> {
    if matches!(atom, Expr::Eq { .. }) || atom.atom_parts().is_none() {
        return Ok(atom.clone());
    }
    let canon = abstract_atom(atom)?;
    let (pattern, entry) = table.lookup(&canon).ok_or_else(|| Error::Type {
        line: 0,
        message: format!("no specialization recorded for `{canon}`"),
    })?;
    let (_, actual_args) = atom.atom_parts().expect("checked above");
    let mut binds = BTreeMap::new();
    for (pat, act) in pattern.args.iter().zip(actual_args) {
        if !match_pattern(pat, act, &mut binds) {
            return Err(Error::Type {
                line: 0,
                message: format!("`{atom}` does not match its specialization `{pattern}`"),
            });
        }
    }
    let args: Vec<Expr> = entry
        .params
        .iter()
        .map(|v| binds[v.var_name().expect("params are variables")].clone())
        .collect();
    Ok(make_atom(&entry.name, args))
}

fn make_atom(pred: &str, args: Vec<Expr>) -> Expr {
    if args.is_empty() {
        Expr::PredConst { name: pred.to_string(), ty: TypeExpr::Boolean }
    } else {
        let ty = TypeExpr::pred(args.iter().map(|a| a.ty()).collect());
        Expr::app(Expr::PredConst { name: pred.to_string(), ty }, args)
    }
}

fn sig_of(params: &[Expr]) -> TypeExpr {
    if params.is_empty() {
        TypeExpr::Boolean
    } else {
        TypeExpr::pred(params.iter().map(|p| p.ty()).collect())
    }
}

fn collect_funcs(e: &Expr, out: &mut BTreeMap<String, BTreeSet<usize>>) {
    match e {
        Expr::FunApp { functor, args } => {
            out.entry(functor.clone()).or_default().insert(args.len());
            args.iter().for_each(|a| collect_funcs(a, out));
        }
        Expr::App { head, args } => {
            collect_funcs(head, out);
            args.iter().for_each(|a| collect_funcs(a, out));
        }
        Expr::Eq { lhs, rhs } => {
            collect_funcs(lhs, out);
            collect_funcs(rhs, out);
        }
        _ => {}
    }
}

/// Flattens the specialized clauses into an ordinary program over the
/// renamed predicates.
pub fn rename(spec: &Specialized, table: &RenameTable) -> Result<Program> {
    let mut clauses = Vec::with_capacity(spec.clauses.len());
    for sc in &spec.clauses {
        let entry = table.get(&sc.head).ok_or_else(|| Error::Type {
            line: 0,
            message: format!("no specialization recorded for `{}`", sc.head),
        })?;
        let body = sc
            .body
            .iter()
            .map(|l| {
                Ok(Literal { positive: l.positive, atom: rename_atom(&l.atom, table)? })
            })
            .collect::<Result<Vec<_>>>()?;
        clauses.push(Clause {
            head: entry.name.clone(),
            params: entry.params.clone(),
            body,
            line: 0,
        });
    }
    let mut pred_sigs = BTreeMap::new();
    for (_, entry) in table.entries() {
        pred_sigs.insert(entry.name.clone(), sig_of(&entry.params));
    }
    let mut func_arities = BTreeMap::new();
    for c in &clauses {
        for l in &c.body {
            collect_funcs(&l.atom, &mut func_arities);
        }
    }
    let declared = pred_sigs
        .iter()
        .filter(|(_, ty)| matches!(ty, TypeExpr::Pred { params } if params.iter().any(|t| !t.is_individual())))
        .map(|(n, _)| n.clone())
        .collect();
    let out = Program { clauses, pred_sigs, func_arities, declared };
    debug_assert!(out.validate().is_ok(), "renaming produced an invalid program");
    Ok(out)
}

// ----- entry points -----

#[derive(Debug, Clone, Copy, Default)]
pub struct FirstifyOptions {
    /// Keep predicate-typed parameters in the output instead of failing.
    pub allow_residual: bool,
}

#[derive(Debug)]
pub struct Firstified {
    pub program: Program,
    pub goal: Goal,
    pub table: RenameTable,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

fn residual_pred_var(p: &Program) -> Option<String> {
    for c in &p.clauses {
        for v in clause_vars(c) {
            if v.ty().is_predicate() {
                return v.var_name().map(String::from);
            }
        }
    }
    None
}

fn checked(p: &Program) -> Result<()> {
    p.validate()?;
    let report = check_extended_fragment(p);
    if !report.is_admitted() {
        return Err(Error::Fragment { report });
    }
    Ok(())
}

/// Specializes a program against a closed goal, producing a first-order
/// program and the rewritten goal.
pub fn firstify(p: &Program, g: &Goal) -> Result<Firstified> {
    firstify_with(p, g, FirstifyOptions::default())
}

pub fn firstify_with(p: &Program, g: &Goal, opts: FirstifyOptions) -> Result<Firstified> {
    checked(p)?;
    let open: Vec<String> = g
        .vars()
        .iter()
        .filter(|v| v.ty().is_predicate())
        .filter_map(|v| v.var_name().map(String::from))
        .collect();
    if !open.is_empty() {
        return Err(Error::OpenGoal { vars: open });
    }
    let mut seeds = Vec::new();
    for l in &g.literals {
        if let Some(seed) = seed_of(l)? {
            seeds.push(seed);
        }
    }
    let spec = specialize(p, seeds)?;
    let table = RenameTable::build(&spec.spec_set, p);
    let program = rename(&spec, &table)?;
    let goal = rename_goal(g, &table)?;
    if !opts.allow_residual {
        if let Some(var) = residual_pred_var(&program) {
            return Err(Error::ResidualPredicateVariable { var });
        }
    }
    Ok(Firstified {
        program,
        goal,
        table,
        iterations: spec.iterations,
        warnings: warnings_for(&spec.undefined),
    })
}

fn rename_goal(g: &Goal, table: &RenameTable) -> Result<Goal> {
    let literals = g
        .literals
        .iter()
        .map(|l| Ok(Literal { positive: l.positive, atom: rename_atom(&l.atom, table)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Goal { literals })
}

fn warnings_for(undefined: &BTreeSet<String>) -> Vec<String> {
    undefined
        .iter()
        .map(|p| format!("`{p}` has no clauses; only facts supplied elsewhere can satisfy it"))
        .collect()
}

/// Specializes away partial applications, seeding with the most general atom
/// of `top`. The output is still higher-order but every predicate-typed
/// argument in it is a variable or a predicate name, so `firstify` applies.
pub fn eliminate_partial_apps(p: &Program, top: &str) -> Result<Firstified> {
    checked(p)?;
    let sig = p.pred_sigs.get(top).cloned().ok_or_else(|| Error::Type {
        line: 0,
        message: format!("unknown predicate `{top}`"),
    })?;
    let params = match &sig {
        TypeExpr::Pred { params } => params.clone(),
        _ => Vec::new(),
    };
    let args: Vec<Expr> = params
        .iter()
        .enumerate()
        .map(|(i, ty)| {
            let name = format!("V{}", i + 1);
            match ty {
                TypeExpr::Individual => Expr::IndVar(name),
                other => Expr::PredVar { name, ty: other.clone() },
            }
        })
        .collect();
    let seed = CanonAtom { pred: top.to_string(), args };
    let spec = specialize(p, [seed.clone()])?;
    let table = RenameTable::build(&spec.spec_set, p);
    let program = rename(&spec, &table)?;
    let goal = rename_goal(
        &Goal { literals: vec![Literal::pos(seed.to_expr(&sig))] },
        &table,
    )?;
    Ok(Firstified {
        program,
        goal,
        table,
        iterations: spec.iterations,
        warnings: warnings_for(&spec.undefined),
    })
}
