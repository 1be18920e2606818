//! Predicate dependency graphs, stratification, and fragment checks.
//!
//! Specialization only terminates on programs inside the accepted fragments:
//! every clause must be definitional (body predicate variables are head
//! parameters), and predicate-typed arguments of body atoms must be atomic.
//! The extended fragment relaxes the second condition to partial
//! applications passed to predicates outside the caller's cycle.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::ast::{vars, Clause, Expr, Program};
use crate::error::{Error, Result};

/// The call graph over predicate names. An edge `p -> q` means some clause
/// of `p` mentions `q` in its body, either as an applied predicate or as a
/// predicate value inside an argument.
#[derive(Debug, Clone)]
pub struct DepGraph {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
    edges: Vec<BTreeSet<usize>>,
    neg: BTreeSet<(usize, usize)>,
    scc_of: Vec<usize>,
    sccs: Vec<Vec<usize>>,
    /// Component ids with dependencies before dependents.
    topo: Vec<usize>,
}

fn pred_consts_in(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::PredConst { name, .. } => out.push(name.clone()),
        Expr::App { head, args } => {
            pred_consts_in(head, out);
            args.iter().for_each(|a| pred_consts_in(a, out));
        }
        Expr::Eq { lhs, rhs } => {
            pred_consts_in(lhs, out);
            pred_consts_in(rhs, out);
        }
        _ => {}
    }
}

impl DepGraph {
    pub fn build(p: &Program) -> DepGraph {
        let mut names: Vec<String> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let intern = |names: &mut Vec<String>, index: &mut BTreeMap<String, usize>, n: &str| {
            *index.entry(n.to_string()).or_insert_with(|| {
                names.push(n.to_string());
                names.len() - 1
            })
        };
        for c in &p.clauses {
            intern(&mut names, &mut index, &c.head);
        }
        let mut raw_edges: Vec<(usize, usize, bool)> = Vec::new();
        for c in &p.clauses {
            let h = intern(&mut names, &mut index, &c.head);
            for l in &c.body {
                if matches!(l.atom, Expr::Eq { .. }) {
                    continue;
                }
                let mut consts = Vec::new();
                match l.atom.atom_parts() {
                    Some((pred, args)) => {
                        let q = intern(&mut names, &mut index, pred);
                        raw_edges.push((h, q, !l.positive));
                        args.iter().for_each(|a| pred_consts_in(a, &mut consts));
                    }
                    None => {
                        if let Expr::App { args, .. } = &l.atom {
                            args.iter().for_each(|a| pred_consts_in(a, &mut consts));
                        }
                    }
                }
                for name in consts {
                    let q = intern(&mut names, &mut index, &name);
                    raw_edges.push((h, q, false));
                }
            }
        }
        for name in p.pred_sigs.keys() {
            intern(&mut names, &mut index, name);
        }
        let mut edges = vec![BTreeSet::new(); names.len()];
        let mut neg = BTreeSet::new();
        for (u, v, negative) in raw_edges {
            edges[u].insert(v);
            if negative {
                neg.insert((u, v));
            }
        }
        Self::finish(names, index, edges, neg)
    }

    fn finish(
        names: Vec<String>,
        index: BTreeMap<String, usize>,
        edges: Vec<BTreeSet<usize>>,
        neg: BTreeSet<(usize, usize)>,
    ) -> DepGraph {
        let emitted = tarjan(&edges);
        // renumber components by their smallest node so ids are stable
        let mut order: Vec<usize> = (0..emitted.len()).collect();
        order.sort_by_key(|&i| emitted[i][0]);
        let mut rank = vec![0; emitted.len()];
        for (new_id, &old) in order.iter().enumerate() {
            rank[old] = new_id;
        }
        let mut sccs = vec![Vec::new(); emitted.len()];
        for (old, comp) in emitted.iter().enumerate() {
            sccs[rank[old]] = comp.clone();
        }
        let mut scc_of = vec![0; names.len()];
        for (id, comp) in sccs.iter().enumerate() {
            for &v in comp {
                scc_of[v] = id;
            }
        }
        let topo = (0..emitted.len()).map(|old| rank[old]).collect();
        DepGraph { names, index, edges, neg, scc_of, sccs, topo }
    }

    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    fn cyclic_component(&self, scc: usize) -> bool {
        let comp = &self.sccs[scc];
        comp.len() > 1 || self.edges[comp[0]].contains(&comp[0])
    }

    /// True when `p` and `q` sit on a common cycle.
    pub fn same_cycle(&self, p: &str, q: &str) -> bool {
        match (self.index.get(p), self.index.get(q)) {
            (Some(&a), Some(&b)) => {
                self.scc_of[a] == self.scc_of[b] && self.cyclic_component(self.scc_of[a])
            }
            _ => false,
        }
    }

    pub fn in_cycle(&self, p: &str) -> bool {
        self.index
            .get(p)
            .map(|&v| self.cyclic_component(self.scc_of[v]))
            .unwrap_or(false)
    }

    /// Everything reachable from the seed predicates, seeds included.
    pub fn reachable<'a>(&self, seeds: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
        let mut stack: Vec<usize> =
            seeds.into_iter().filter_map(|s| self.index.get(s).copied()).collect();
        let mut seen: BTreeSet<usize> = stack.iter().copied().collect();
        while let Some(u) = stack.pop() {
            for &v in &self.edges[u] {
                if seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen.into_iter().map(|v| self.names[v].clone()).collect()
    }

    /// Assigns each predicate to a stratum such that positive dependencies
    /// stay within or below and negative dependencies go strictly below.
    pub fn strata(&self) -> Result<Vec<Vec<String>>> {
        let mut level = vec![0usize; self.sccs.len()];
        for &s in &self.topo {
            for &u in &self.sccs[s] {
                for &v in &self.edges[u] {
                    let t = self.scc_of[v];
                    let negative = self.neg.contains(&(u, v));
                    if t == s {
                        if negative {
                            return Err(Error::NotStratified { pred: self.names[v].clone() });
                        }
                    } else {
                        level[s] = level[s].max(level[t] + negative as usize);
                    }
                }
            }
        }
        let depth = level.iter().max().map(|m| m + 1).unwrap_or(0);
        let mut out = vec![Vec::new(); depth];
        for (id, name) in self.names.iter().enumerate() {
            out[level[self.scc_of[id]]].push(name.clone());
        }
        Ok(out)
    }
}

/// Iterative Tarjan; components come out with dependencies first.
fn tarjan(edges: &[BTreeSet<usize>]) -> Vec<Vec<usize>> {
    let n = edges.len();
    let adj: Vec<Vec<usize>> = edges.iter().map(|s| s.iter().copied().collect()).collect();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next = 0usize;
    let mut sccs: Vec<Vec<usize>> = Vec::new();
    let mut frames: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        frames.push((root, 0));
        while let Some(&mut (v, ref mut pi)) = frames.last_mut() {
            if index[v] == usize::MAX {
                index[v] = next;
                low[v] = next;
                next += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *pi < adj[v].len() {
                let w = adj[v][*pi];
                *pi += 1;
                if index[w] == usize::MAX {
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&(parent, _)) = frames.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    sccs.push(comp);
                }
            }
        }
    }
    sccs
}

// ----- fragment checks -----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    FreeBodyPredVar,
    PartialApplication,
    CyclicPartialApplication,
}

impl ViolationKind {
    fn label(self) -> &'static str {
        match self {
            ViolationKind::FreeBodyPredVar => "free predicate variable",
            ViolationKind::PartialApplication => "partial application",
            ViolationKind::CyclicPartialApplication => "cyclic partial application",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub line: u32,
    pub clause_index: usize,
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FragmentReport {
    pub violations: Vec<Violation>,
}

impl FragmentReport {
    pub fn is_admitted(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn render(&self, file: &str) -> String {
        self.violations
            .iter()
            .map(|v| format!("{file}:{}: {}: {}", v.line, v.kind.label(), v.message))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn definitional_violations(p: &Program) -> Vec<Violation> {
    let mut out = Vec::new();
    for (ci, c) in p.clauses.iter().enumerate() {
        let params: BTreeSet<&str> = c
            .params
            .iter()
            .filter(|e| e.ty().is_predicate())
            .filter_map(|e| e.var_name())
            .collect();
        let mut reported = BTreeSet::new();
        for l in &c.body {
            for v in vars(&l.atom) {
                if let Expr::PredVar { name, .. } = &v {
                    if !params.contains(name.as_str()) && reported.insert(name.clone()) {
                        out.push(Violation {
                            line: c.line,
                            clause_index: ci,
                            kind: ViolationKind::FreeBodyPredVar,
                            message: format!(
                                "predicate variable `{name}` is not a parameter of `{}`",
                                c.head
                            ),
                        });
                    }
                }
            }
        }
    }
    out
}

fn structural_violations(p: &Program, graph: Option<&DepGraph>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |c: &Clause, ci: usize, kind: ViolationKind, message: String| {
        out.push(Violation { line: c.line, clause_index: ci, kind, message });
    };
    for (ci, c) in p.clauses.iter().enumerate() {
        for l in &c.body {
            if matches!(l.atom, Expr::Eq { .. }) {
                continue;
            }
            let (apred, args): (Option<&str>, &[Expr]) = match l.atom.atom_parts() {
                Some((pred, args)) => (Some(pred), args),
                None => match &l.atom {
                    Expr::App { args, .. } => (None, args.as_slice()),
                    _ => (None, &[]),
                },
            };
            for arg in args {
                if !(arg.ty().is_predicate() && matches!(arg, Expr::App { .. })) {
                    continue;
                }
                match (apred, graph) {
                    (Some(ap), Some(g)) => {
                        if g.same_cycle(ap, &c.head) {
                            push(
                                c,
                                ci,
                                ViolationKind::CyclicPartialApplication,
                                format!(
                                    "`{arg}` is passed to `{ap}`, which shares a cycle with `{}`",
                                    c.head
                                ),
                            );
                        }
                    }
                    (None, Some(_)) => push(
                        c,
                        ci,
                        ViolationKind::PartialApplication,
                        format!("`{arg}` is an argument of a variable-headed atom"),
                    ),
                    (_, None) => push(
                        c,
                        ci,
                        ViolationKind::PartialApplication,
                        format!("`{arg}` is not a variable or predicate name"),
                    ),
                }
            }
        }
    }
    out
}

fn merged(mut a: Vec<Violation>, b: Vec<Violation>) -> FragmentReport {
    a.extend(b);
    a.sort_by_key(|v| v.clause_index);
    FragmentReport { violations: a }
}

/// Definitional check: predicate variables in bodies must be parameters of
/// the clause head.
pub fn check_definitional(p: &Program) -> FragmentReport {
    FragmentReport { violations: definitional_violations(p) }
}

/// Core fragment: definitional, and predicate-typed arguments of body atoms
/// are variables or predicate names.
pub fn check_h_fragment(p: &Program) -> FragmentReport {
    merged(definitional_violations(p), structural_violations(p, None))
}

/// Extended fragment: a partial application is tolerated when the predicate
/// it is passed to shares no cycle with the clause head, so specialization
/// still terminates.
pub fn check_extended_fragment(p: &Program) -> FragmentReport {
    let graph = DepGraph::build(p);
    merged(definitional_violations(p), structural_violations(p, Some(&graph)))
}

/// True when no predicate takes a predicate-typed argument.
pub fn is_first_order(p: &Program) -> bool {
    first_order_offender(p).is_none()
}

/// The first predicate (alphabetically) with a predicate-typed parameter.
pub fn first_order_offender(p: &Program) -> Option<&str> {
    p.pred_sigs.iter().find_map(|(name, ty)| match ty {
        crate::ast::TypeExpr::Pred { params }
            if params.iter().any(|t| !t.is_individual()) =>
        {
            Some(name.as_str())
        }
        _ => None,
    })
}
