//! Typed abstract syntax for higher-order logic programs.
//!
//! Expressions are kept in spine-normal form: the head of an application is
//! never itself an application, so a curried call collapses into one `App`
//! node with the argument list flattened.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// Simple types. `Individual` is the data sort, `Boolean` the result sort of
/// predicates (and the type of zero-ary predicate constants), `Func` the type
/// of an n-ary function symbol, and `Pred` a predicate over the listed
/// argument types.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeExpr {
    Individual,
    Boolean,
    Func { arity: usize },
    Pred { params: Vec<TypeExpr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeClass {
    Functional,
    Predicate,
    Argument,
    IllFormed,
}

/// Classifies a type: function symbols are functional, `o` and `pred(..)`
/// predicate, `i` argument, anything else ill-formed. Argument positions of a
/// predicate may hold individuals or predicates, never functions or bare `o`.
pub fn classify_type(t: &TypeExpr) -> TypeClass {
    match t {
        TypeExpr::Individual => TypeClass::Argument,
        TypeExpr::Boolean => TypeClass::Predicate,
        TypeExpr::Func { arity } => {
            if *arity > 0 {
                TypeClass::Functional
            } else {
                TypeClass::IllFormed
            }
        }
        TypeExpr::Pred { params } => {
            if params.is_empty() {
                return TypeClass::IllFormed;
            }
            for p in params {
                let ok = match p {
                    TypeExpr::Individual => true,
                    TypeExpr::Pred { .. } => classify_type(p) == TypeClass::Predicate,
                    _ => false,
                };
                if !ok {
                    return TypeClass::IllFormed;
                }
            }
            TypeClass::Predicate
        }
    }
}

impl TypeExpr {
    pub fn pred(params: Vec<TypeExpr>) -> TypeExpr {
        TypeExpr::Pred { params }
    }

    pub fn is_predicate(&self) -> bool {
        matches!(self, TypeExpr::Pred { .. } | TypeExpr::Boolean)
    }

    pub fn is_individual(&self) -> bool {
        matches!(self, TypeExpr::Individual)
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Individual => write!(f, "i"),
            TypeExpr::Boolean => write!(f, "o"),
            TypeExpr::Func { arity } => write!(f, "fun/{arity}"),
            TypeExpr::Pred { params } => {
                write!(f, "pred(")?;
                for (i, p) in params.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Expressions. Variables and constants are split by sort so that every node
/// knows its own type without context.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    IndVar(String),
    PredVar { name: String, ty: TypeExpr },
    IndConst(String),
    PredConst { name: String, ty: TypeExpr },
    FunApp { functor: String, args: Vec<Expr> },
    App { head: Box<Expr>, args: Vec<Expr> },
    Eq { lhs: Box<Expr>, rhs: Box<Expr> },
}

impl Expr {
    /// Builds an application in spine-normal form, flattening a curried head.
    pub fn app(head: Expr, args: Vec<Expr>) -> Expr {
        debug_assert!(!args.is_empty(), "applications take at least one argument");
        match head {
            Expr::App { head: inner, args: mut first } => {
                first.extend(args);
                Expr::App { head: inner, args: first }
            }
            other => Expr::App { head: Box::new(other), args },
        }
    }

    pub fn eq(lhs: Expr, rhs: Expr) -> Expr {
        Expr::Eq { lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn ty(&self) -> TypeExpr {
        match self {
            Expr::IndVar(_) | Expr::IndConst(_) | Expr::FunApp { .. } => TypeExpr::Individual,
            Expr::PredVar { ty, .. } | Expr::PredConst { ty, .. } => ty.clone(),
            Expr::Eq { .. } => TypeExpr::Boolean,
            Expr::App { head, args } => match head.ty() {
                TypeExpr::Pred { params } => {
                    assert!(
                        args.len() <= params.len(),
                        "over-applied predicate expression: {self}"
                    );
                    if args.len() == params.len() {
                        TypeExpr::Boolean
                    } else {
                        TypeExpr::Pred { params: params[args.len()..].to_vec() }
                    }
                }
                other => panic!("application head has non-predicate type {other}"),
            },
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Expr::IndVar(_) | Expr::PredVar { .. })
    }

    pub fn var_name(&self) -> Option<&str> {
        match self {
            Expr::IndVar(n) | Expr::PredVar { name: n, .. } => Some(n),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Expr::IndVar(_) | Expr::PredVar { .. } => false,
            Expr::IndConst(_) | Expr::PredConst { .. } => true,
            Expr::FunApp { args, .. } => args.iter().all(Expr::is_ground),
            Expr::App { head, args } => head.is_ground() && args.iter().all(Expr::is_ground),
            Expr::Eq { lhs, rhs } => lhs.is_ground() && rhs.is_ground(),
        }
    }

    /// Splits an atom (an expression of type `o`) into predicate name and
    /// argument list. Returns `None` for equalities and variable-headed atoms.
    pub fn atom_parts(&self) -> Option<(&str, &[Expr])> {
        match self {
            Expr::PredConst { name, ty: TypeExpr::Boolean } => Some((name, &[])),
            Expr::App { head, args } => match head.as_ref() {
                Expr::PredConst { name, .. } => Some((name, args)),
                _ => None,
            },
            _ => None,
        }
    }

    /// True for expressions usable as a body literal: equalities and full
    /// applications (of constant or variable head).
    pub fn is_atom(&self) -> bool {
        matches!(self.ty(), TypeExpr::Boolean)
            && matches!(self, Expr::App { .. } | Expr::Eq { .. } | Expr::PredConst { .. })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::IndVar(n) | Expr::IndConst(n) => write!(f, "{n}"),
            Expr::PredVar { name, .. } | Expr::PredConst { name, .. } => write!(f, "{name}"),
            Expr::FunApp { functor, args } => write_call(f, functor, args),
            Expr::App { head, args } => {
                let head = head.to_string();
                write_call(f, &head, args)
            }
            Expr::Eq { lhs, rhs } => write!(f, "{lhs} = {rhs}"),
        }
    }
}

fn write_call(f: &mut fmt::Formatter<'_>, head: &str, args: &[Expr]) -> fmt::Result {
    write!(f, "{head}(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{a}")?;
    }
    write!(f, ")")
}

/// A body literal: an atom with a polarity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub positive: bool,
    pub atom: Expr,
}

impl Literal {
    pub fn pos(atom: Expr) -> Literal {
        Literal { positive: true, atom }
    }

    pub fn neg(atom: Expr) -> Literal {
        Literal { positive: false, atom }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "not {}", self.atom)
        }
    }
}

/// A program clause. Head parameters are pairwise-distinct variables; any
/// structure a source head carried has been moved into leading equalities by
/// the desugarer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub head: String,
    pub params: Vec<Expr>,
    pub body: Vec<Literal>,
    /// Source line, or 0 for synthesized clauses.
    pub line: u32,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.params.is_empty() {
            write!(f, "{}", self.head)?;
        } else {
            write_call(f, &self.head, &self.params)?;
        }
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{l}")?;
            }
        }
        write!(f, ".")
    }
}

/// A query: a conjunction of literals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Goal {
    pub literals: Vec<Literal>,
}

impl Goal {
    pub fn vars(&self) -> Vec<Expr> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for l in &self.literals {
            collect_vars(&l.atom, &mut seen, &mut out);
        }
        out
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.literals.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// A typed program: clauses plus signatures for every predicate and the
/// arities of every function symbol in use.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Program {
    pub clauses: Vec<Clause>,
    pub pred_sigs: BTreeMap<String, TypeExpr>,
    pub func_arities: BTreeMap<String, BTreeSet<usize>>,
    /// Predicates whose signatures were written down rather than defaulted.
    pub declared: BTreeSet<String>,
}

impl Program {
    pub fn clauses_of<'a>(&'a self, pred: &'a str) -> impl Iterator<Item = &'a Clause> {
        self.clauses.iter().filter(move |c| c.head == pred)
    }

    pub fn pred_arity(&self, pred: &str) -> Option<usize> {
        match self.pred_sigs.get(pred) {
            Some(TypeExpr::Pred { params }) => Some(params.len()),
            Some(TypeExpr::Boolean) => Some(0),
            _ => None,
        }
    }

    /// Structural sanity walker used by tests and debug assertions.
    pub fn validate(&self) -> Result<()> {
        for c in &self.clauses {
            let sig = self.pred_sigs.get(&c.head).ok_or_else(|| Error::Type {
                line: c.line,
                message: format!("predicate `{}` has no signature", c.head),
            })?;
            let params = match sig {
                TypeExpr::Pred { params } => params.clone(),
                TypeExpr::Boolean => Vec::new(),
                other => {
                    return Err(Error::Type {
                        line: c.line,
                        message: format!("`{}` has non-predicate signature {other}", c.head),
                    })
                }
            };
            if params.len() != c.params.len() {
                return Err(Error::Type {
                    line: c.line,
                    message: format!("arity mismatch in head of `{}`", c.head),
                });
            }
            let mut names = BTreeSet::new();
            for (p, t) in c.params.iter().zip(&params) {
                let name = p.var_name().ok_or_else(|| Error::Type {
                    line: c.line,
                    message: format!("head parameter `{p}` is not a variable"),
                })?;
                if !names.insert(name.to_string()) {
                    return Err(Error::Type {
                        line: c.line,
                        message: format!("repeated head parameter `{name}`"),
                    });
                }
                if &p.ty() != t {
                    return Err(Error::Type {
                        line: c.line,
                        message: format!("head parameter `{name}` has wrong type"),
                    });
                }
            }
            for l in &c.body {
                validate_expr(&l.atom, c.line)?;
                if l.atom.ty() != TypeExpr::Boolean {
                    return Err(Error::Type {
                        line: c.line,
                        message: format!("body literal `{}` is not boolean", l.atom),
                    });
                }
            }
        }
        Ok(())
    }
}

fn validate_expr(e: &Expr, line: u32) -> Result<()> {
    match e {
        Expr::App { head, args } => {
            if matches!(head.as_ref(), Expr::App { .. }) {
                return Err(Error::Type {
                    line,
                    message: format!("application `{e}` is not spine-normal"),
                });
            }
            if !matches!(head.as_ref(), Expr::PredVar { .. } | Expr::PredConst { .. }) {
                return Err(Error::Type {
                    line,
                    message: format!("application head `{head}` is not a predicate"),
                });
            }
            for a in args {
                validate_expr(a, line)?;
            }
        }
        Expr::FunApp { args, .. } => {
            for a in args {
                if !a.ty().is_individual() {
                    return Err(Error::Type {
                        line,
                        message: format!("function argument `{a}` is not individual"),
                    });
                }
                validate_expr(a, line)?;
            }
        }
        Expr::Eq { lhs, rhs } => {
            if !lhs.ty().is_individual() || !rhs.ty().is_individual() {
                return Err(Error::Type {
                    line,
                    message: format!("equality `{e}` over non-individual terms"),
                });
            }
            validate_expr(lhs, line)?;
            validate_expr(rhs, line)?;
        }
        _ => {}
    }
    Ok(())
}

/// Variables of an expression in first-occurrence, depth-first order.
pub fn vars(e: &Expr) -> Vec<Expr> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    collect_vars(e, &mut seen, &mut out);
    out
}

/// Variables of a clause (parameters first), first occurrence order.
pub fn clause_vars(c: &Clause) -> Vec<Expr> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for p in &c.params {
        collect_vars(p, &mut seen, &mut out);
    }
    for l in &c.body {
        collect_vars(&l.atom, &mut seen, &mut out);
    }
    out
}

fn collect_vars(e: &Expr, seen: &mut BTreeSet<String>, out: &mut Vec<Expr>) {
    match e {
        Expr::IndVar(n) | Expr::PredVar { name: n, .. } => {
            if seen.insert(n.clone()) {
                out.push(e.clone());
            }
        }
        Expr::IndConst(_) | Expr::PredConst { .. } => {}
        Expr::FunApp { args, .. } => args.iter().for_each(|a| collect_vars(a, seen, out)),
        Expr::App { head, args } => {
            collect_vars(head, seen, out);
            args.iter().for_each(|a| collect_vars(a, seen, out));
        }
        Expr::Eq { lhs, rhs } => {
            collect_vars(lhs, seen, out);
            collect_vars(rhs, seen, out);
        }
    }
}

/// A finite map from variables to expressions of the same type.
#[derive(Debug, Clone, Default)]
pub struct Substitution {
    map: BTreeMap<String, Expr>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    /// Binds `var` to `value`; the binding must preserve the variable's type.
    pub fn bind(&mut self, var: &Expr, value: Expr) -> Result<()> {
        let name = var.var_name().ok_or_else(|| Error::SubstTypeMismatch {
            var: var.to_string(),
        })?;
        if var.ty() != value.ty() {
            return Err(Error::SubstTypeMismatch { var: name.to_string() });
        }
        self.map.insert(name.to_string(), value);
        Ok(())
    }

    pub fn from_pairs(vars: &[Expr], values: &[Expr]) -> Result<Substitution> {
        debug_assert_eq!(vars.len(), values.len());
        let mut s = Substitution::new();
        for (v, e) in vars.iter().zip(values) {
            s.bind(v, e.clone())?;
        }
        Ok(s)
    }

    pub fn get(&self, name: &str) -> Option<&Expr> {
        self.map.get(name)
    }

    pub fn domain(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn range(&self) -> impl Iterator<Item = &Expr> {
        self.map.values()
    }

    /// Applies the substitution, re-normalizing the application spine when a
    /// head variable is replaced by a partial application.
    pub fn apply(&self, e: &Expr) -> Expr {
        match e {
            Expr::IndConst(_) | Expr::PredConst { .. } => e.clone(),
            Expr::IndVar(n) | Expr::PredVar { name: n, .. } => {
                self.map.get(n).cloned().unwrap_or_else(|| e.clone())
            }
            Expr::FunApp { functor, args } => Expr::FunApp {
                functor: functor.clone(),
                args: args.iter().map(|a| self.apply(a)).collect(),
            },
            Expr::App { head, args } => Expr::app(
                self.apply(head),
                args.iter().map(|a| self.apply(a)).collect(),
            ),
            Expr::Eq { lhs, rhs } => Expr::eq(self.apply(lhs), self.apply(rhs)),
        }
    }

    pub fn apply_literal(&self, l: &Literal) -> Literal {
        Literal { positive: l.positive, atom: self.apply(&l.atom) }
    }

    pub fn apply_literals(&self, ls: &[Literal]) -> Vec<Literal> {
        ls.iter().map(|l| self.apply_literal(l)).collect()
    }
}

/// An atom with its variables renamed to `V1, V2, ...` in first-occurrence
/// order. Two atoms are variants of each other exactly when their canonical
/// forms are structurally equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonAtom {
    pub pred: String,
    pub args: Vec<Expr>,
}

impl CanonAtom {
    /// Rebuilds the atom as an expression.
    pub fn to_expr(&self, pred_ty: &TypeExpr) -> Expr {
        let head = Expr::PredConst { name: self.pred.clone(), ty: pred_ty.clone() };
        if self.args.is_empty() {
            head
        } else {
            Expr::app(head, self.args.clone())
        }
    }

    /// Canonical variables in numbering order; the spine of a rename entry.
    pub fn vars(&self) -> Vec<Expr> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for a in &self.args {
            collect_vars(a, &mut seen, &mut out);
        }
        out
    }

    /// All arguments are pairwise-distinct variables: the atom constrains
    /// nothing and keeps its own predicate name through renaming.
    pub fn is_most_general(&self) -> bool {
        let mut names = BTreeSet::new();
        self.args.iter().all(|a| match a.var_name() {
            Some(n) => names.insert(n.to_string()),
            None => false,
        })
    }
}

impl fmt::Display for CanonAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "{}", self.pred)
        } else {
            write_call(f, &self.pred, &self.args)
        }
    }
}

struct Renamer {
    map: BTreeMap<String, String>,
    next: usize,
}

impl Renamer {
    fn new() -> Renamer {
        Renamer { map: BTreeMap::new(), next: 1 }
    }

    fn fresh(&mut self, old: &str) -> String {
        if let Some(n) = self.map.get(old) {
            return n.clone();
        }
        let name = format!("V{}", self.next);
        self.next += 1;
        self.map.insert(old.to_string(), name.clone());
        name
    }

    fn rename(&mut self, e: &Expr) -> Expr {
        match e {
            Expr::IndVar(n) => Expr::IndVar(self.fresh(n)),
            Expr::PredVar { name, ty } => {
                Expr::PredVar { name: self.fresh(name), ty: ty.clone() }
            }
            Expr::IndConst(_) | Expr::PredConst { .. } => e.clone(),
            Expr::FunApp { functor, args } => Expr::FunApp {
                functor: functor.clone(),
                args: args.iter().map(|a| self.rename(a)).collect(),
            },
            Expr::App { head, args } => Expr::App {
                head: Box::new(self.rename(head)),
                args: args.iter().map(|a| self.rename(a)).collect(),
            },
            Expr::Eq { lhs, rhs } => Expr::eq(self.rename(lhs), self.rename(rhs)),
        }
    }
}

/// Canonicalizes a full application with a constant head. Fails on
/// equalities, partial applications and variable-headed atoms.
pub fn canonicalize_atom(a: &Expr) -> Result<CanonAtom> {
    let not_an_atom = || Error::NotAnAtom { expr: a.to_string() };
    if a.ty() != TypeExpr::Boolean {
        return Err(not_an_atom());
    }
    let (pred, args) = a.atom_parts().ok_or_else(not_an_atom)?;
    let mut r = Renamer::new();
    Ok(CanonAtom {
        pred: pred.to_string(),
        args: args.iter().map(|arg| r.rename(arg)).collect(),
    })
}

/// Renames every variable of a clause to `V1, V2, ...` in first-occurrence
/// order (parameters first). Clauses are alpha-equivalent exactly when their
/// canonical forms are equal.
pub fn canonicalize_clause(c: &Clause) -> Clause {
    let mut r = Renamer::new();
    Clause {
        head: c.head.clone(),
        params: c.params.iter().map(|p| r.rename(p)).collect(),
        body: c
            .body
            .iter()
            .map(|l| Literal { positive: l.positive, atom: r.rename(&l.atom) })
            .collect(),
        line: 0,
    }
}

pub fn alpha_eq(a: &Clause, b: &Clause) -> bool {
    canonicalize_clause(a) == canonicalize_clause(b)
}
