//! Reader for the Prolog-like `.hl` surface syntax.
//!
//! A program is a sequence of `:- hotype(name, pred(...)).` directives and
//! clauses. Desugaring rewrites clause heads so that every parameter is a
//! distinct variable: structured or repeated individual arguments move into
//! leading equalities, while structured predicate-typed head positions are
//! rejected (there is no equality at predicate types).

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::{
    classify_type, Clause, Expr, Goal, Literal, Program, TypeClass, TypeExpr,
};
use crate::error::{Error, Result};

// ----- surface syntax -----

#[derive(Debug, Clone, PartialEq)]
pub enum STermKind {
    Var(String),
    Atom(String),
    Call { head: Box<STerm>, args: Vec<STerm> },
    Eq(Box<STerm>, Box<STerm>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct STerm {
    pub kind: STermKind,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SLit {
    pub positive: bool,
    pub term: STerm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceClause {
    pub head: STerm,
    pub body: Vec<SLit>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureDirective {
    pub pred: String,
    pub ty: TypeExpr,
    pub line: u32,
}

// ----- lexer -----

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    Var(String),
    LParen,
    RParen,
    Comma,
    Dot,
    ColonDash,
    NafSign,
    Equals,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'%') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn ident(&mut self, first: u8) -> String {
        let mut s = String::new();
        s.push(first as char);
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                s.push(c as char);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn next_token(&mut self) -> Result<Token> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        let mk = |tok| Token { tok, line, col };
        let c = match self.bump() {
            None => return Ok(mk(Tok::Eof)),
            Some(c) => c,
        };
        let tok = match c {
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'.' => Tok::Dot,
            b'=' => Tok::Equals,
            b':' => {
                if self.peek() == Some(b'-') {
                    self.bump();
                    Tok::ColonDash
                } else {
                    return Err(Error::Syntax {
                        line,
                        col,
                        message: "expected `:-`".into(),
                    });
                }
            }
            b'\\' => {
                if self.peek() == Some(b'+') {
                    self.bump();
                    Tok::NafSign
                } else {
                    return Err(Error::Syntax {
                        line,
                        col,
                        message: "expected `\\+`".into(),
                    });
                }
            }
            c if c.is_ascii_lowercase() || c.is_ascii_digit() => Tok::Atom(self.ident(c)),
            c if c.is_ascii_uppercase() || c == b'_' => Tok::Var(self.ident(c)),
            other => {
                return Err(Error::Syntax {
                    line,
                    col,
                    message: format!("unexpected character `{}`", other as char),
                })
            }
        };
        Ok(mk(tok))
    }
}

// ----- parser -----

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: Token,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Parser<'a>> {
        let mut lexer = Lexer::new(src);
        let current = lexer.next_token()?;
        Ok(Parser { lexer, current })
    }

    fn advance(&mut self) -> Result<Token> {
        let next = self.lexer.next_token()?;
        Ok(std::mem::replace(&mut self.current, next))
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.current.line,
            col: self.current.col,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token> {
        if self.current.tok == tok {
            self.advance()
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn term(&mut self) -> Result<STerm> {
        let t = self.advance()?;
        let mut base = match t.tok {
            Tok::Var(n) => STerm { kind: STermKind::Var(n), line: t.line, col: t.col },
            Tok::Atom(n) => STerm { kind: STermKind::Atom(n), line: t.line, col: t.col },
            _ => return Err(Error::Syntax {
                line: t.line,
                col: t.col,
                message: "expected a term".into(),
            }),
        };
        while self.current.tok == Tok::LParen {
            self.advance()?;
            let mut args = vec![self.term()?];
            while self.current.tok == Tok::Comma {
                self.advance()?;
                args.push(self.term()?);
            }
            self.expect(Tok::RParen, "`)`")?;
            base = STerm {
                line: base.line,
                col: base.col,
                kind: STermKind::Call { head: Box::new(base), args },
            };
        }
        Ok(base)
    }

    /// A term, optionally followed by `= term`.
    fn eq_term(&mut self) -> Result<STerm> {
        let lhs = self.term()?;
        if self.current.tok == Tok::Equals {
            self.advance()?;
            let rhs = self.term()?;
            return Ok(STerm {
                line: lhs.line,
                col: lhs.col,
                kind: STermKind::Eq(Box::new(lhs), Box::new(rhs)),
            });
        }
        Ok(lhs)
    }

    fn literal(&mut self) -> Result<SLit> {
        let negated = match &self.current.tok {
            Tok::NafSign => {
                self.advance()?;
                true
            }
            Tok::Atom(n) if n == "not" => {
                self.advance()?;
                true
            }
            _ => false,
        };
        let term = if negated && self.current.tok == Tok::LParen {
            self.advance()?;
            let inner = self.eq_term()?;
            self.expect(Tok::RParen, "`)`")?;
            inner
        } else {
            self.eq_term()?
        };
        Ok(SLit { positive: !negated, term })
    }

    fn body(&mut self) -> Result<Vec<SLit>> {
        let mut lits = vec![self.literal()?];
        while self.current.tok == Tok::Comma {
            self.advance()?;
            lits.push(self.literal()?);
        }
        Ok(lits)
    }

    fn type_expr(&mut self) -> Result<TypeExpr> {
        let t = self.advance()?;
        match t.tok {
            Tok::Atom(n) if n == "i" => Ok(TypeExpr::Individual),
            Tok::Atom(n) if n == "pred" => {
                self.expect(Tok::LParen, "`(`")?;
                let mut params = vec![self.type_expr()?];
                while self.current.tok == Tok::Comma {
                    self.advance()?;
                    params.push(self.type_expr()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(TypeExpr::Pred { params })
            }
            _ => Err(Error::Syntax {
                line: t.line,
                col: t.col,
                message: "expected a type (`i` or `pred(...)`)".into(),
            }),
        }
    }

    fn directive(&mut self) -> Result<SignatureDirective> {
        let t = self.advance()?; // directive keyword
        match t.tok {
            Tok::Atom(n) if n == "hotype" => {
                self.expect(Tok::LParen, "`(`")?;
                let name = match self.advance()? {
                    Token { tok: Tok::Atom(n), .. } => n,
                    other => {
                        return Err(Error::Syntax {
                            line: other.line,
                            col: other.col,
                            message: "expected a predicate name".into(),
                        })
                    }
                };
                self.expect(Tok::Comma, "`,`")?;
                let ty = self.type_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                self.expect(Tok::Dot, "`.`")?;
                Ok(SignatureDirective { pred: name, ty, line: t.line })
            }
            Tok::Atom(n) => Err(Error::Syntax {
                line: t.line,
                col: t.col,
                message: format!("unknown directive `{n}`"),
            }),
            _ => Err(self.err("expected a directive name")),
        }
    }

    fn program(&mut self) -> Result<(Vec<SurfaceClause>, Vec<SignatureDirective>)> {
        let mut clauses = Vec::new();
        let mut directives = Vec::new();
        while self.current.tok != Tok::Eof {
            if self.current.tok == Tok::ColonDash {
                self.advance()?;
                directives.push(self.directive()?);
                continue;
            }
            let head = self.term()?;
            let line = head.line;
            let body = if self.current.tok == Tok::ColonDash {
                self.advance()?;
                self.body()?
            } else {
                Vec::new()
            };
            self.expect(Tok::Dot, "`.`")?;
            clauses.push(SurfaceClause { head, body, line });
        }
        Ok((clauses, directives))
    }
}

/// Parses a program source into surface clauses and signature directives.
pub fn parse_program(src: &str) -> Result<(Vec<SurfaceClause>, Vec<SignatureDirective>)> {
    Parser::new(src)?.program()
}

/// Parses a query: comma-separated literals, trailing `.` optional.
pub fn parse_query(src: &str) -> Result<Vec<SLit>> {
    let mut p = Parser::new(src)?;
    let lits = p.body()?;
    if p.current.tok == Tok::Dot {
        p.advance()?;
    }
    if p.current.tok != Tok::Eof {
        return Err(p.err("trailing input after query"));
    }
    Ok(lits)
}

// ----- signatures -----

#[derive(Debug, Clone)]
struct PredInfo {
    ty: TypeExpr,
    declared: bool,
}

/// Predicate signatures and function arities observed so far. Predicates
/// without a directive default to all-individual argument types at their
/// observed arity.
#[derive(Debug, Clone, Default)]
pub struct SigTable {
    preds: BTreeMap<String, PredInfo>,
    funcs: BTreeMap<String, BTreeSet<usize>>,
}

impl SigTable {
    pub fn from_program(p: &Program) -> SigTable {
        let mut t = SigTable::default();
        for (name, ty) in &p.pred_sigs {
            t.preds.insert(
                name.clone(),
                PredInfo { ty: ty.clone(), declared: p.declared.contains(name) },
            );
        }
        t.funcs = p.func_arities.clone();
        t
    }

    fn is_pred(&self, name: &str) -> bool {
        self.preds.contains_key(name)
    }

    fn pred_ty(&self, name: &str) -> Option<&TypeExpr> {
        self.preds.get(name).map(|i| &i.ty)
    }

    fn declared(&self, name: &str) -> bool {
        self.preds.get(name).map(|i| i.declared).unwrap_or(false)
    }

    fn arity_of(ty: &TypeExpr) -> usize {
        match ty {
            TypeExpr::Pred { params } => params.len(),
            _ => 0,
        }
    }

    fn declare(&mut self, d: &SignatureDirective) -> Result<()> {
        if classify_type(&d.ty) != TypeClass::Predicate {
            return Err(Error::Type {
                line: d.line,
                message: format!("directive for `{}` gives a non-predicate type", d.pred),
            });
        }
        match self.preds.get(&d.pred) {
            Some(info) if info.ty != d.ty => Err(Error::Type {
                line: d.line,
                message: format!("conflicting signatures for `{}`", d.pred),
            }),
            _ => {
                self.preds.insert(d.pred.clone(), PredInfo { ty: d.ty.clone(), declared: true });
                Ok(())
            }
        }
    }

    /// Records an observed use of `name` as a predicate of `arity`,
    /// defaulting the signature when none was declared.
    fn observe_pred(&mut self, name: &str, arity: usize, line: u32) -> Result<()> {
        match self.preds.get(name) {
            Some(info) => {
                if Self::arity_of(&info.ty) != arity {
                    Err(Error::Type {
                        line,
                        message: format!(
                            "`{name}` used with arity {arity} but has arity {}",
                            Self::arity_of(&info.ty)
                        ),
                    })
                } else {
                    Ok(())
                }
            }
            None => {
                let ty = if arity == 0 {
                    TypeExpr::Boolean
                } else {
                    TypeExpr::pred(vec![TypeExpr::Individual; arity])
                };
                self.preds.insert(name.to_string(), PredInfo { ty, declared: false });
                Ok(())
            }
        }
    }

    /// Records a predicate constant inferred from an argument position.
    fn infer_pred_const(&mut self, name: &str, ty: &TypeExpr, line: u32) -> Result<()> {
        match self.preds.get(name) {
            Some(info) if &info.ty != ty => Err(Error::Type {
                line,
                message: format!("`{name}` has type {} but is used at {ty}", info.ty),
            }),
            Some(_) => Ok(()),
            None => {
                self.preds.insert(name.to_string(), PredInfo { ty: ty.clone(), declared: false });
                Ok(())
            }
        }
    }

    fn observe_func(&mut self, name: &str, arity: usize) {
        self.funcs.entry(name.to_string()).or_default().insert(arity);
    }
}

// ----- desugaring and typing -----

struct ClauseTyper<'t> {
    sigs: &'t mut SigTable,
    env: BTreeMap<String, TypeExpr>,
    /// Clause head predicate and whether it has a directive; used to blame
    /// a missing directive when a defaulted parameter is applied.
    head: Option<(String, bool)>,
    head_params: BTreeSet<String>,
}

/// Context for diagnosing a predicate-typed value in an individual position:
/// the applied predicate and whether it carries an explicit directive.
#[derive(Clone, Copy)]
struct Enclosing<'a> {
    pred: &'a str,
    declared: bool,
    line: u32,
}

impl<'t> ClauseTyper<'t> {
    fn new(sigs: &'t mut SigTable) -> ClauseTyper<'t> {
        ClauseTyper { sigs, env: BTreeMap::new(), head: None, head_params: BTreeSet::new() }
    }

    fn type_err(&self, line: u32, message: impl Into<String>) -> Error {
        Error::Type { line, message: message.into() }
    }

    fn var_node(&self, name: &str, ty: &TypeExpr) -> Expr {
        match ty {
            TypeExpr::Individual => Expr::IndVar(name.to_string()),
            _ => Expr::PredVar { name: name.to_string(), ty: ty.clone() },
        }
    }

    fn lower_var(
        &mut self,
        name: &str,
        expected: Option<&TypeExpr>,
        t: &STerm,
        enclosing: Option<Enclosing>,
    ) -> Result<Expr> {
        if let Some(ty) = self.env.get(name).cloned() {
            if let Some(want) = expected {
                if want != &ty {
                    if ty.is_individual() && want.is_predicate() {
                        if let Some(enc) = enclosing {
                            if !enc.declared {
                                return Err(Error::MissingSignature {
                                    pred: enc.pred.to_string(),
                                    line: enc.line,
                                });
                            }
                        }
                    }
                    return Err(self.type_err(
                        t.line,
                        format!("variable `{name}` has type {ty} but {want} is required"),
                    ));
                }
            }
            return Ok(self.var_node(name, &ty));
        }
        let ty = match expected {
            Some(TypeExpr::Boolean) | None => TypeExpr::Individual,
            Some(ty) => ty.clone(),
        };
        if matches!(expected, Some(TypeExpr::Boolean)) {
            return Err(self.type_err(t.line, format!("variable `{name}` cannot be a literal")));
        }
        self.env.insert(name.to_string(), ty.clone());
        Ok(self.var_node(name, &ty))
    }

    fn lower_atom_name(
        &mut self,
        name: &str,
        expected: Option<&TypeExpr>,
        t: &STerm,
        enclosing: Option<Enclosing>,
    ) -> Result<Expr> {
        match expected {
            Some(TypeExpr::Individual) => {
                if self.sigs.is_pred(name) {
                    if let Some(enc) = enclosing {
                        if !enc.declared {
                            return Err(Error::MissingSignature {
                                pred: enc.pred.to_string(),
                                line: enc.line,
                            });
                        }
                    }
                    return Err(self.type_err(
                        t.line,
                        format!("predicate `{name}` used as an individual"),
                    ));
                }
                Ok(Expr::IndConst(name.to_string()))
            }
            Some(TypeExpr::Boolean) => {
                self.sigs.observe_pred(name, 0, t.line)?;
                Ok(Expr::PredConst { name: name.to_string(), ty: TypeExpr::Boolean })
            }
            Some(ty @ TypeExpr::Pred { .. }) => {
                self.sigs.infer_pred_const(name, ty, t.line)?;
                Ok(Expr::PredConst { name: name.to_string(), ty: ty.clone() })
            }
            Some(other) => {
                Err(self.type_err(t.line, format!("no term can have type {other}")))
            }
            None => match self.sigs.pred_ty(name) {
                Some(ty) => Ok(Expr::PredConst { name: name.to_string(), ty: ty.clone() }),
                None => Ok(Expr::IndConst(name.to_string())),
            },
        }
    }

    /// Flattens surface curried calls into (base, args).
    fn flatten_call<'s>(t: &'s STerm) -> (&'s STerm, Vec<&'s STerm>) {
        match &t.kind {
            STermKind::Call { head, args } => {
                let (base, mut all) = Self::flatten_call(head);
                all.extend(args.iter());
                (base, all)
            }
            _ => (t, Vec::new()),
        }
    }

    fn lower_call(
        &mut self,
        t: &STerm,
        expected: Option<&TypeExpr>,
        enclosing: Option<Enclosing>,
    ) -> Result<Expr> {
        let (base, args) = Self::flatten_call(t);
        match &base.kind {
            STermKind::Var(v) => {
                let head_ty = match self.env.get(v).cloned() {
                    Some(TypeExpr::Pred { params }) => TypeExpr::Pred { params },
                    Some(TypeExpr::Individual) => {
                        if let Some((pred, false)) = &self.head {
                            if self.head_params.contains(v) {
                                return Err(Error::MissingSignature {
                                    pred: pred.clone(),
                                    line: base.line,
                                });
                            }
                        }
                        return Err(self.type_err(
                            base.line,
                            format!("individual variable `{v}` used as a predicate"),
                        ));
                    }
                    Some(other) => {
                        return Err(self.type_err(
                            base.line,
                            format!("variable `{v}` of type {other} cannot be applied"),
                        ));
                    }
                    None => {
                        // infer the variable's predicate type from its call
                        if !matches!(expected, Some(TypeExpr::Boolean) | None) {
                            return Err(self.type_err(
                                base.line,
                                format!("cannot infer the type of `{v}` in this position"),
                            ));
                        }
                        let mut params = Vec::new();
                        let mut lowered = Vec::new();
                        for a in &args {
                            let e = self.lower(a, None, enclosing)?;
                            params.push(e.ty());
                            lowered.push(e);
                        }
                        let ty = TypeExpr::pred(params);
                        self.env.insert(v.clone(), ty.clone());
                        return Ok(Expr::app(
                            Expr::PredVar { name: v.clone(), ty },
                            lowered,
                        ));
                    }
                };
                let head = Expr::PredVar { name: v.clone(), ty: head_ty };
                self.lower_application(head, &args, expected, t)
            }
            STermKind::Atom(f) => {
                let treat_as_pred = match expected {
                    Some(TypeExpr::Individual) => false,
                    Some(TypeExpr::Boolean) | Some(TypeExpr::Pred { .. }) => true,
                    _ => self.sigs.is_pred(f),
                };
                if !treat_as_pred {
                    if self.sigs.is_pred(f) {
                        if let Some(enc) = enclosing {
                            if !enc.declared {
                                return Err(Error::MissingSignature {
                                    pred: enc.pred.to_string(),
                                    line: enc.line,
                                });
                            }
                        }
                        return Err(self.type_err(
                            base.line,
                            format!("predicate `{f}` used as a function symbol"),
                        ));
                    }
                    let lowered = args
                        .iter()
                        .map(|a| self.lower(a, Some(&TypeExpr::Individual), enclosing))
                        .collect::<Result<Vec<_>>>()?;
                    self.sigs.observe_func(f, lowered.len());
                    return Ok(Expr::FunApp { functor: f.clone(), args: lowered });
                }
                let head_ty = match self.sigs.pred_ty(f).cloned() {
                    Some(ty) => ty,
                    None => match expected {
                        Some(TypeExpr::Boolean) => {
                            self.sigs.observe_pred(f, args.len(), base.line)?;
                            self.sigs.pred_ty(f).cloned().unwrap()
                        }
                        Some(TypeExpr::Pred { params: residual }) => {
                            // a partial application of an undeclared predicate:
                            // infer the full type from the arguments supplied
                            let mut params: Vec<TypeExpr> = args
                                .iter()
                                .map(|a| self.lower(a, None, enclosing).map(|e| e.ty()))
                                .collect::<Result<_>>()?;
                            params.extend(residual.clone());
                            let ty = TypeExpr::pred(params);
                            self.sigs.infer_pred_const(f, &ty, base.line)?;
                            ty
                        }
                        _ => unreachable!("treat_as_pred implies a known or expected type"),
                    },
                };
                let head = Expr::PredConst { name: f.clone(), ty: head_ty };
                self.lower_application(head, &args, expected, t)
            }
            STermKind::Eq(..) => {
                Err(self.type_err(base.line, "`=` cannot be applied".to_string()))
            }
            STermKind::Call { .. } => unreachable!("flatten_call returns a non-call base"),
        }
    }

    fn lower_application(
        &mut self,
        head: Expr,
        args: &[&STerm],
        expected: Option<&TypeExpr>,
        t: &STerm,
    ) -> Result<Expr> {
        let params = match head.ty() {
            TypeExpr::Pred { params } => params,
            TypeExpr::Boolean => {
                return Err(self.type_err(t.line, format!("`{head}` takes no arguments")));
            }
            other => return Err(self.type_err(t.line, format!("cannot apply a {other}"))),
        };
        if args.len() > params.len() {
            return Err(self.type_err(
                t.line,
                format!("`{head}` takes {} arguments, got {}", params.len(), args.len()),
            ));
        }
        let declared = match &head {
            Expr::PredConst { name, .. } => self.sigs.declared(name),
            _ => true, // a variable's predicate type always comes from a directive
        };
        let head_name = head.to_string();
        let enc = Enclosing { pred: &head_name, declared, line: t.line };
        let lowered = args
            .iter()
            .zip(&params)
            .map(|(a, want)| self.lower(a, Some(want), Some(enc)))
            .collect::<Result<Vec<_>>>()?;
        let app = Expr::app(head, lowered);
        let ty = app.ty();
        match expected {
            Some(want) if want != &ty => Err(self.type_err(
                t.line,
                format!("`{app}` has type {ty} but {want} is required"),
            )),
            _ => Ok(app),
        }
    }

    fn lower(
        &mut self,
        t: &STerm,
        expected: Option<&TypeExpr>,
        enclosing: Option<Enclosing>,
    ) -> Result<Expr> {
        match &t.kind {
            STermKind::Var(v) => self.lower_var(v, expected, t, enclosing),
            STermKind::Atom(n) => self.lower_atom_name(n, expected, t, enclosing),
            STermKind::Call { .. } => self.lower_call(t, expected, enclosing),
            STermKind::Eq(l, r) => {
                if !matches!(expected, Some(TypeExpr::Boolean) | None) {
                    return Err(self.type_err(t.line, "`=` is only a literal".to_string()));
                }
                let lhs = self.lower(l, Some(&TypeExpr::Individual), None)?;
                let rhs = self.lower(r, Some(&TypeExpr::Individual), None)?;
                Ok(Expr::eq(lhs, rhs))
            }
        }
    }

    fn lower_literal(&mut self, l: &SLit) -> Result<Literal> {
        let atom = self.lower(&l.term, Some(&TypeExpr::Boolean), None)?;
        Ok(Literal { positive: l.positive, atom })
    }
}

fn surface_var_names(t: &STerm, out: &mut BTreeSet<String>) {
    match &t.kind {
        STermKind::Var(v) => {
            out.insert(v.clone());
        }
        STermKind::Atom(_) => {}
        STermKind::Call { head, args } => {
            surface_var_names(head, out);
            args.iter().for_each(|a| surface_var_names(a, out));
        }
        STermKind::Eq(l, r) => {
            surface_var_names(l, out);
            surface_var_names(r, out);
        }
    }
}

/// Desugars one clause against the signature table, typing it along the way.
///
/// Individual head arguments that are structured or repeated are replaced by
/// fresh parameters with equalities prepended in position order: a term `E`
/// yields `Fresh = E`, a repeated variable `X` yields `X = Fresh`.
pub fn desugar_clause(c: &SurfaceClause, sigs: &mut SigTable) -> Result<Clause> {
    let (base, head_args) = ClauseTyper::flatten_call(&c.head);
    let pred = match &base.kind {
        STermKind::Atom(n) => n.clone(),
        _ => {
            return Err(Error::Syntax {
                line: base.line,
                col: base.col,
                message: "clause head must be a predicate name".into(),
            })
        }
    };
    let sig = sigs.pred_ty(&pred).cloned().unwrap_or(TypeExpr::Boolean);
    let param_tys = match &sig {
        TypeExpr::Pred { params } => params.clone(),
        _ => Vec::new(),
    };
    debug_assert_eq!(param_tys.len(), head_args.len(), "arity fixed by observe_pred");

    let mut used = BTreeSet::new();
    surface_var_names(&c.head, &mut used);
    for l in &c.body {
        surface_var_names(&l.term, &mut used);
    }
    let mut fresh_counter = 0;
    let mut fresh = || loop {
        fresh_counter += 1;
        let name = format!("_V{fresh_counter}");
        if used.insert(name.clone()) {
            return name;
        }
    };

    let declared = sigs.declared(&pred);
    let mut typer = ClauseTyper::new(sigs);
    typer.head = Some((pred.clone(), declared));
    let mut params: Vec<Expr> = Vec::new();
    let mut param_names = BTreeSet::new();
    let mut eqs: Vec<Literal> = Vec::new();

    for (arg, ty) in head_args.iter().zip(&param_tys) {
        match ty {
            TypeExpr::Individual => match &arg.kind {
                STermKind::Var(v) if !param_names.contains(v) => {
                    param_names.insert(v.clone());
                    typer.env.insert(v.clone(), TypeExpr::Individual);
                    params.push(Expr::IndVar(v.clone()));
                }
                STermKind::Var(v) => {
                    let f = fresh();
                    typer.env.insert(f.clone(), TypeExpr::Individual);
                    params.push(Expr::IndVar(f.clone()));
                    eqs.push(Literal::pos(Expr::eq(
                        Expr::IndVar(v.clone()),
                        Expr::IndVar(f),
                    )));
                }
                _ => {
                    let enc = Enclosing {
                        pred: &pred,
                        declared: typer.sigs.declared(&pred),
                        line: arg.line,
                    };
                    let e = typer.lower(arg, Some(&TypeExpr::Individual), Some(enc))?;
                    let f = fresh();
                    typer.env.insert(f.clone(), TypeExpr::Individual);
                    params.push(Expr::IndVar(f.clone()));
                    eqs.push(Literal::pos(Expr::eq(Expr::IndVar(f), e)));
                }
            },
            pt => match &arg.kind {
                STermKind::Var(v) if !param_names.contains(v) => {
                    param_names.insert(v.clone());
                    typer.env.insert(v.clone(), pt.clone());
                    params.push(Expr::PredVar { name: v.clone(), ty: pt.clone() });
                }
                _ => {
                    return Err(Error::PredicateEqualityUnsupported {
                        pred: pred.clone(),
                        line: arg.line,
                    })
                }
            },
        }
    }

    typer.head_params = param_names;
    let mut body = eqs;
    for l in &c.body {
        body.push(typer.lower_literal(l)?);
    }

    Ok(Clause { head: pred, params, body, line: c.line })
}

/// Types a whole program: applies directives, defaults the remaining
/// signatures from observed arities, desugars every clause.
pub fn typecheck_program(
    clauses: &[SurfaceClause],
    directives: &[SignatureDirective],
) -> Result<Program> {
    let mut sigs = SigTable::default();
    for d in directives {
        sigs.declare(d)?;
    }
    // observe heads first so bodies can call forward
    for c in clauses {
        let (base, args) = ClauseTyper::flatten_call(&c.head);
        if let STermKind::Atom(n) = &base.kind {
            sigs.observe_pred(n, args.len(), c.line)?;
        }
    }
    // literal-position calls of undeclared predicates fix their arity too
    for c in clauses {
        for l in &c.body {
            match &l.term.kind {
                STermKind::Call { .. } => {
                    let (base, args) = ClauseTyper::flatten_call(&l.term);
                    if let STermKind::Atom(f) = &base.kind {
                        sigs.observe_pred(f, args.len(), l.term.line)?;
                    }
                }
                STermKind::Atom(n) => sigs.observe_pred(n, 0, l.term.line)?,
                _ => {}
            }
        }
    }
    let lowered = clauses
        .iter()
        .map(|c| desugar_clause(c, &mut sigs))
        .collect::<Result<Vec<_>>>()?;
    Ok(program_from(lowered, sigs))
}

fn program_from(clauses: Vec<Clause>, sigs: SigTable) -> Program {
    let mut pred_sigs = BTreeMap::new();
    let mut declared = BTreeSet::new();
    for (name, info) in sigs.preds {
        if info.declared {
            declared.insert(name.clone());
        }
        pred_sigs.insert(name, info.ty);
    }
    Program { clauses, pred_sigs, func_arities: sigs.funcs, declared }
}

/// Parses and types a program in one step.
pub fn load_program(src: &str) -> Result<Program> {
    let (clauses, directives) = parse_program(src)?;
    let p = typecheck_program(&clauses, &directives)?;
    debug_assert!(p.validate().is_ok(), "typechecker produced an invalid program");
    Ok(p)
}

/// Parses and types a query against a program. Predicate constants whose
/// types are only fixed by the query (such as relations passed as arguments)
/// are recorded into the program's signature table.
pub fn load_goal(src: &str, program: &mut Program) -> Result<Goal> {
    let lits = parse_query(src)?;
    let mut sigs = SigTable::from_program(program);
    let mut typer = ClauseTyper::new(&mut sigs);
    let literals = lits
        .iter()
        .map(|l| typer.lower_literal(l))
        .collect::<Result<Vec<_>>>()?;
    let updated = program_from(std::mem::take(&mut program.clauses), sigs);
    *program = updated;
    Ok(Goal { literals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{alpha_eq, vars};
    use proptest::prelude::*;

    const WINNOW: &str = "\
:- hotype(winnow, pred(pred(i,i), pred(i), i)).
:- hotype(bypassed, pred(pred(i,i), pred(i), i)).
winnow(P,R,T) :- R(T), not bypassed(P,R,T).
bypassed(P,R,T) :- R(Z), P(Z,T).
";

    #[test]
    fn parses_clauses_and_directives() {
        let (clauses, dirs) = parse_program(WINNOW).unwrap();
        assert_eq!(clauses.len(), 2);
        assert_eq!(dirs.len(), 2);
        assert_eq!(dirs[0].pred, "winnow");
        assert_eq!(clauses[0].line, 3);
        assert!(!clauses[0].body[1].positive);
    }

    #[test]
    fn negation_spellings_agree() {
        let a = load_program(":- hotype(w, pred(pred(i), i)).\nw(R,T) :- R(T), not p(T).").unwrap();
        let b = load_program(":- hotype(w, pred(pred(i), i)).\nw(R,T) :- R(T), \\+ p(T).").unwrap();
        assert!(alpha_eq(&a.clauses[0], &b.clauses[0]));
    }

    #[test]
    fn reports_syntax_position() {
        let err = parse_program("p(a) q(b).").unwrap_err();
        match err {
            Error::Syntax { line: 1, col, .. } => assert_eq!(col, 6),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn types_the_winnow_program() {
        let p = load_program(WINNOW).unwrap();
        assert_eq!(
            p.pred_sigs["winnow"],
            TypeExpr::pred(vec![
                TypeExpr::pred(vec![TypeExpr::Individual, TypeExpr::Individual]),
                TypeExpr::pred(vec![TypeExpr::Individual]),
                TypeExpr::Individual,
            ])
        );
        p.validate().unwrap();
    }

    #[test]
    fn desugars_constant_head_argument() {
        // p(a). becomes p(F) :- F = a.
        let p = load_program("p(a).").unwrap();
        let expected = Clause {
            head: "p".into(),
            params: vec![Expr::IndVar("F".into())],
            body: vec![Literal::pos(Expr::eq(Expr::IndVar("F".into()), Expr::IndConst("a".into())))],
            line: 0,
        };
        assert!(alpha_eq(&p.clauses[0], &expected));
    }

    #[test]
    fn desugars_repeated_head_variable() {
        // q(X,X). becomes q(X,F) :- X = F.
        let p = load_program("q(X,X).").unwrap();
        let expected = Clause {
            head: "q".into(),
            params: vec![Expr::IndVar("X".into()), Expr::IndVar("F".into())],
            body: vec![Literal::pos(Expr::eq(Expr::IndVar("X".into()), Expr::IndVar("F".into())))],
            line: 0,
        };
        assert!(alpha_eq(&p.clauses[0], &expected));
    }

    #[test]
    fn desugars_functor_head_argument() {
        let src = "\
:- hotype(r, pred(pred(i), pred(i), i)).
r(P,Q,f(X)) :- P(X), Q(Y).
";
        let p = load_program(src).unwrap();
        let pred1 = TypeExpr::pred(vec![TypeExpr::Individual]);
        let pv = |n: &str| Expr::PredVar { name: n.into(), ty: pred1.clone() };
        let expected = Clause {
            head: "r".into(),
            params: vec![pv("P"), pv("Q"), Expr::IndVar("Z".into())],
            body: vec![
                Literal::pos(Expr::eq(
                    Expr::IndVar("Z".into()),
                    Expr::FunApp { functor: "f".into(), args: vec![Expr::IndVar("X".into())] },
                )),
                Literal::pos(Expr::app(pv("P"), vec![Expr::IndVar("X".into())])),
                Literal::pos(Expr::app(pv("Q"), vec![Expr::IndVar("Y".into())])),
            ],
            line: 0,
        };
        assert!(alpha_eq(&p.clauses[0], &expected));
        assert!(p.func_arities["f"].contains(&1));
    }

    #[test]
    fn rejects_predicate_equality_in_heads() {
        let src = "\
:- hotype(p, pred(pred(i), pred(i))).
p(Q,Q) :- Q(a).
";
        match load_program(src) {
            Err(Error::PredicateEqualityUnsupported { pred, .. }) => assert_eq!(pred, "p"),
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn missing_signature_for_predicate_argument() {
        // q is a predicate; p has no directive, so its argument defaults to i
        match load_program("q(a).\np(q).") {
            Err(Error::MissingSignature { pred, .. }) => assert_eq!(pred, "p"),
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn missing_signature_for_applied_head_parameter() {
        match load_program("p(R) :- R(a).") {
            Err(Error::MissingSignature { pred, .. }) => assert_eq!(pred, "p"),
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn defaults_arity_of_undefined_predicates() {
        let p = load_program("t(X) :- q(X, b).").unwrap();
        assert_eq!(
            p.pred_sigs["q"],
            TypeExpr::pred(vec![TypeExpr::Individual, TypeExpr::Individual])
        );
    }

    #[test]
    fn rejects_conflicting_arities() {
        assert!(matches!(load_program("q(a).\nq(a,b)."), Err(Error::Type { .. })));
    }

    #[test]
    fn goal_typing_infers_argument_relations() {
        let mut p = load_program(WINNOW).unwrap();
        let g = load_goal("winnow(pref, movie, T)", &mut p).unwrap();
        assert_eq!(
            p.pred_sigs["pref"],
            TypeExpr::pred(vec![TypeExpr::Individual, TypeExpr::Individual])
        );
        assert_eq!(p.pred_sigs["movie"], TypeExpr::pred(vec![TypeExpr::Individual]));
        let names: Vec<_> = g.vars().iter().map(|v| v.var_name().unwrap().to_string()).collect();
        assert_eq!(names, ["T"]);
    }

    #[test]
    fn goal_accepts_negative_literals() {
        let mut p = load_program(WINNOW).unwrap();
        let g = load_goal("movie(X), not bypassed(pref, movie, X).", &mut p).unwrap();
        assert_eq!(g.literals.len(), 2);
        assert!(!g.literals[1].positive);
    }

    #[test]
    fn parses_partial_application_arguments() {
        let src = "\
:- hotype(conj2, pred(pred(i), pred(i), i)).
:- hotype(conj3, pred(pred(i), pred(i), pred(i), i)).
conj2(P,Q,X) :- P(X), Q(X).
conj3(P,Q,R,X) :- conj2(P, conj2(Q,R), X).
";
        let p = load_program(src).unwrap();
        let atom = &p.clauses[1].body[0].atom;
        let (pred, args) = atom.atom_parts().unwrap();
        assert_eq!(pred, "conj2");
        assert_eq!(args.len(), 3);
        assert_eq!(args[1].ty(), TypeExpr::pred(vec![TypeExpr::Individual]));
    }

    // random surface heads exercise the desugaring invariants
    fn head_arg() -> BoxedStrategy<STerm> {
        let t = |kind| STerm { kind, line: 1, col: 1 };
        prop_oneof![
            prop_oneof![Just("X"), Just("Y"), Just("Z")]
                .prop_map(move |v| t(STermKind::Var(v.into()))),
            prop_oneof![Just("a"), Just("b")].prop_map(move |v| t(STermKind::Atom(v.into()))),
            prop_oneof![Just("X"), Just("Y")].prop_map(move |v| {
                t(STermKind::Call {
                    head: Box::new(t(STermKind::Atom("f".into()))),
                    args: vec![t(STermKind::Var(v.into()))],
                })
            }),
        ]
        .boxed()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn desugared_heads_are_linear(args in prop::collection::vec(head_arg(), 1..5)) {
            let head = STerm {
                kind: STermKind::Call {
                    head: Box::new(STerm { kind: STermKind::Atom("h".into()), line: 1, col: 1 }),
                    args: args.clone(),
                },
                line: 1,
                col: 1,
            };
            let surface = SurfaceClause { head, body: vec![], line: 1 };
            let mut sigs = SigTable::default();
            sigs.observe_pred("h", args.len(), 1).unwrap();
            let c = desugar_clause(&surface, &mut sigs).unwrap();

            // every parameter a distinct variable
            let mut names = BTreeSet::new();
            for p in &c.params {
                prop_assert!(names.insert(p.var_name().unwrap().to_string()));
            }
            // one equality per non-first-occurrence position
            let mut seen = BTreeSet::new();
            let mut expected_eqs = 0;
            for a in &args {
                match &a.kind {
                    STermKind::Var(v) if seen.insert(v.clone()) => {}
                    _ => expected_eqs += 1,
                }
            }
            prop_assert_eq!(c.body.len(), expected_eqs);
            // equalities only bind head parameters or clause-local terms
            for l in &c.body {
                let is_eq = matches!(l.atom, Expr::Eq { .. });
                prop_assert!(is_eq);
            }
            let _ = vars(&Expr::app(
                Expr::PredConst { name: "h".into(), ty: TypeExpr::pred(vec![TypeExpr::Individual; c.params.len()]) },
                c.params.clone(),
            ));
        }
    }
}
