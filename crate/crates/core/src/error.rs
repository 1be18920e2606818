//! Error type shared by every stage of the pipeline.

use crate::analysis::FragmentReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax { line: u32, col: u32, message: String },

    #[error("line {line}: type error: {message}")]
    Type { line: u32, message: String },

    #[error("line {line}: predicate `{pred}` takes a predicate-typed argument but has no hotype directive")]
    MissingSignature { pred: String, line: u32 },

    #[error("line {line}: head of `{pred}` constrains a predicate-typed position; equality is not defined at predicate types")]
    PredicateEqualityUnsupported { pred: String, line: u32 },

    #[error("substitution does not preserve the type of `{var}`")]
    SubstTypeMismatch { var: String },

    #[error("not an atom: {expr}")]
    NotAnAtom { expr: String },

    #[error("program outside the supported fragment:\n{}", report.render("input"))]
    Fragment { report: FragmentReport },

    #[error("goal has free predicate variables: {}", vars.join(", "))]
    OpenGoal { vars: Vec<String> },

    #[error("specialized program still contains predicate variable `{var}`")]
    ResidualPredicateVariable { var: String },

    #[error("not first-order: {message}")]
    NotFirstOrder { message: String },

    #[error("floundering: negative literal `{atom}` selected with unbound variables")]
    Floundering { atom: String },

    #[error("resolution depth limit {limit} exceeded")]
    DepthExceeded { limit: usize },

    #[error("resolution step limit {limit} exceeded")]
    StepsExceeded { limit: u64 },

    #[error("call through unbound predicate variable `{name}`")]
    UnboundPredicateCall { name: String },

    #[error("program is not stratified: `{pred}` depends negatively on its own stratum")]
    NotStratified { pred: String },

    #[error("bottom-up evaluation requires a function-free program; found functor `{functor}`")]
    HasFunctions { functor: String },

    #[error("line {line}: clause for `{pred}` cannot be evaluated bottom-up: {message}")]
    UnsafeClause { pred: String, line: u32, message: String },

    #[error("answer leaves goal variable `{var}` unbound")]
    NonGroundAnswer { var: String },

    #[error("unknown benchmark family `{name}`")]
    UnknownFamily { name: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for the verdict-relevant resource errors: equivalence checking
    /// reports these as inconclusive rather than failing outright.
    pub fn is_resource_exhausted(&self) -> bool {
        matches!(self, Error::DepthExceeded { .. } | Error::StepsExceeded { .. })
    }
}
