//! C ABI over the firstify pipeline.
//!
//! Every entry point is panic-isolated, uses opaque handles for programs,
//! and reports failures through status codes; `ff_last_error` returns the
//! message for the most recent failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use firstify::analysis::check_extended_fragment;
use firstify::ast::{Goal, Program};
use firstify::emitter::{defunctionalize_reynolds, emit_prolog, program_to_hl, EmitOptions};
use firstify::interp::{check_equivalence, solve_topdown, EngineLimits};
use firstify::parser::{load_goal, load_program};
use firstify::specializer::firstify as firstify_program;
use firstify::Error;

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An input string was not valid UTF-8.
    InvalidUtf8 = 2,
    Syntax = 3,
    Type = 4,
    /// The program falls outside the supported fragment.
    Fragment = 5,
    /// The goal is unusable: open predicate variables or unknown predicates.
    Goal = 6,
    /// Evaluation failed (floundering, stratification, unsafe clauses, ...).
    Eval = 7,
    /// A depth or step limit was exhausted.
    Exhausted = 8,
    Internal = 9,
}

/// An opaque parsed program, optionally carrying the goal produced by a
/// transformation.
pub struct FfProgram {
    program: Program,
    goal: Option<Goal>,
    source: Option<String>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: Vec<u8> = msg.bytes().filter(|&b| b != 0).collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(e: &Error) -> FfStatus {
    match e {
        Error::Syntax { .. } => FfStatus::Syntax,
        Error::Type { .. }
        | Error::MissingSignature { .. }
        | Error::PredicateEqualityUnsupported { .. }
        | Error::SubstTypeMismatch { .. }
        | Error::NotAnAtom { .. } => FfStatus::Type,
        Error::Fragment { .. } => FfStatus::Fragment,
        Error::OpenGoal { .. }
        | Error::ResidualPredicateVariable { .. }
        | Error::UnknownFamily { .. } => FfStatus::Goal,
        Error::DepthExceeded { .. } | Error::StepsExceeded { .. } => FfStatus::Exhausted,
        Error::NotFirstOrder { .. }
        | Error::Floundering { .. }
        | Error::UnboundPredicateCall { .. }
        | Error::NotStratified { .. }
        | Error::HasFunctions { .. }
        | Error::UnsafeClause { .. }
        | Error::NonGroundAnswer { .. } => FfStatus::Eval,
        Error::Io(_) => FfStatus::Internal,
    }
}

fn fail(e: &Error) -> FfStatus {
    set_error(&e.to_string());
    status_of(e)
}

/// Runs a closure with panics converted into `Internal`.
fn guarded(f: impl FnOnce() -> FfStatus) -> FfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            FfStatus::Internal
        }
    }
}

/// # Safety
/// `s` must be a valid NUL-terminated string or null.
unsafe fn utf8_arg<'a>(s: *const c_char) -> Result<&'a str, FfStatus> {
    if s.is_null() {
        set_error("null argument");
        return Err(FfStatus::NullArgument);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        FfStatus::InvalidUtf8
    })
}

fn out_string(text: String, out: *mut *mut c_char) -> FfStatus {
    let sanitized: Vec<u8> = text.into_bytes().into_iter().filter(|&b| b != 0).collect();
    match CString::new(sanitized) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            FfStatus::Ok
        }
        Err(_) => {
            set_error("output contained an interior NUL");
            FfStatus::Internal
        }
    }
}

/// Version of the underlying compiler, as a static string.
#[no_mangle]
pub extern "C" fn ff_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent error on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ff_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a program. On success stores a fresh handle in `out`.
///
/// # Safety
/// `src` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_program_parse(
    src: *const c_char,
    out: *mut *mut FfProgram,
) -> FfStatus {
    if out.is_null() {
        set_error("null argument");
        return FfStatus::NullArgument;
    }
    let text = match utf8_arg(src) {
        Ok(t) => t.to_owned(),
        Err(s) => return s,
    };
    guarded(|| match load_program(&text) {
        Ok(program) => {
            let handle = Box::new(FfProgram { program, goal: None, source: Some(text) });
            unsafe { *out = Box::into_raw(handle) };
            FfStatus::Ok
        }
        Err(e) => fail(&e),
    })
}

/// Releases a handle returned by this library. Null is ignored.
///
/// # Safety
/// `p` must have come from this library and not have been freed before.
#[no_mangle]
pub unsafe extern "C" fn ff_program_free(p: *mut FfProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must have come from this library and not have been freed before.
#[no_mangle]
pub unsafe extern "C" fn ff_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Number of clauses in the program, facts included.
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_program_clause_count(p: *const FfProgram) -> usize {
    p.as_ref().map_or(0, |h| h.program.clauses.len())
}

/// Checks membership in the supported fragment.
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_program_check(p: *const FfProgram) -> FfStatus {
    let Some(handle) = p.as_ref() else {
        set_error("null argument");
        return FfStatus::NullArgument;
    };
    guarded(|| {
        let report = check_extended_fragment(&handle.program);
        if report.is_admitted() {
            FfStatus::Ok
        } else {
            fail(&Error::Fragment { report })
        }
    })
}

/// Specializes the program for `query`. The new handle carries the renamed
/// goal, retrievable with `ff_program_goal`.
///
/// # Safety
/// `p` must be a live handle; `query` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ff_program_firstify(
    p: *const FfProgram,
    query: *const c_char,
    out: *mut *mut FfProgram,
) -> FfStatus {
    let Some(handle) = p.as_ref() else {
        set_error("null argument");
        return FfStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null argument");
        return FfStatus::NullArgument;
    }
    let q = match utf8_arg(query) {
        Ok(t) => t.to_owned(),
        Err(s) => return s,
    };
    guarded(|| {
        let mut program = handle.program.clone();
        let goal = match load_goal(&q, &mut program) {
            Ok(g) => g,
            Err(e) => return fail(&e),
        };
        match firstify_program(&program, &goal) {
            Ok(done) => {
                let next = Box::new(FfProgram {
                    program: done.program,
                    goal: Some(done.goal),
                    source: handle.source.clone(),
                });
                unsafe { *out = Box::into_raw(next) };
                FfStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Defunctionalizes the program for `query` with the Reynolds encoding.
///
/// # Safety
/// Same contract as `ff_program_firstify`.
#[no_mangle]
pub unsafe extern "C" fn ff_program_defunctionalize(
    p: *const FfProgram,
    query: *const c_char,
    out: *mut *mut FfProgram,
) -> FfStatus {
    let Some(handle) = p.as_ref() else {
        set_error("null argument");
        return FfStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null argument");
        return FfStatus::NullArgument;
    }
    let q = match utf8_arg(query) {
        Ok(t) => t.to_owned(),
        Err(s) => return s,
    };
    guarded(|| {
        let mut program = handle.program.clone();
        let goal = match load_goal(&q, &mut program) {
            Ok(g) => g,
            Err(e) => return fail(&e),
        };
        match defunctionalize_reynolds(&program, &goal) {
            Ok((fo, fo_goal)) => {
                let next = Box::new(FfProgram {
                    program: fo,
                    goal: Some(fo_goal),
                    source: handle.source.clone(),
                });
                unsafe { *out = Box::into_raw(next) };
                FfStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// The goal attached to a transformed handle, rendered as text; the empty
/// string when the handle has none. Free with `ff_string_free`.
///
/// # Safety
/// `p` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ff_program_goal(
    p: *const FfProgram,
    out: *mut *mut c_char,
) -> FfStatus {
    let Some(handle) = p.as_ref() else {
        set_error("null argument");
        return FfStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null argument");
        return FfStatus::NullArgument;
    }
    let text = handle.goal.as_ref().map(Goal::to_string).unwrap_or_default();
    out_string(text, out)
}

/// Renders the program: Prolog when it is first-order, source syntax
/// otherwise. `driver` adds a main/0 entry point when a goal is attached.
/// Free the result with `ff_string_free`.
///
/// # Safety
/// `p` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ff_program_render(
    p: *const FfProgram,
    driver: bool,
    out: *mut *mut c_char,
) -> FfStatus {
    let Some(handle) = p.as_ref() else {
        set_error("null argument");
        return FfStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null argument");
        return FfStatus::NullArgument;
    }
    guarded(|| {
        if !firstify::analysis::is_first_order(&handle.program) {
            return out_string(program_to_hl(&handle.program), out);
        }
        let opts = EmitOptions { source: handle.source.as_deref(), driver };
        let goal = if driver { handle.goal.as_ref() } else { None };
        match emit_prolog(&handle.program, goal, &opts) {
            Ok(doc) => out_string(doc.to_string(), out),
            Err(e) => fail(&e),
        }
    })
}

/// Solves `query` (or the attached goal when `query` is null) and returns
/// the answers, one per line, as the CLI prints them. Free the result with
/// `ff_string_free`.
///
/// # Safety
/// `p` must be a live handle; `query` NUL-terminated or null; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ff_program_solve(
    p: *const FfProgram,
    query: *const c_char,
    max_depth: usize,
    max_steps: u64,
    out: *mut *mut c_char,
) -> FfStatus {
    let Some(handle) = p.as_ref() else {
        set_error("null argument");
        return FfStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null argument");
        return FfStatus::NullArgument;
    }
    let explicit = if query.is_null() {
        None
    } else {
        match utf8_arg(query) {
            Ok(t) => Some(t.to_owned()),
            Err(s) => return s,
        }
    };
    guarded(|| {
        let mut program = handle.program.clone();
        let goal = match (&explicit, &handle.goal) {
            (Some(q), _) => match load_goal(q, &mut program) {
                Ok(g) => g,
                Err(e) => return fail(&e),
            },
            (None, Some(g)) => g.clone(),
            (None, None) => {
                set_error("no query given and the handle has no attached goal");
                return FfStatus::Goal;
            }
        };
        let defaults = EngineLimits::default();
        let limits = EngineLimits {
            max_depth: if max_depth == 0 { defaults.max_depth } else { max_depth },
            max_steps: if max_steps == 0 { defaults.max_steps } else { max_steps },
        };
        match solve_topdown(&program, &goal, limits, false) {
            Ok(answers) => {
                let mut text = String::new();
                if goal.vars().is_empty() {
                    text.push_str(if answers.bindings.is_empty() { "no" } else { "yes" });
                    text.push('\n');
                } else if answers.bindings.is_empty() {
                    text.push_str("no\n");
                } else {
                    for binding in &answers.bindings {
                        let row: Vec<String> =
                            binding.iter().map(|(v, t)| format!("{v} = {t}")).collect();
                        text.push_str(&row.join(", "));
                        text.push('\n');
                    }
                }
                out_string(text, out)
            }
            Err(e) => fail(&e),
        }
    })
}

/// Compares the answers of two handles on their shared query, writing the
/// verdict record (`result=... steps_lhs=... steps_rhs=...`) to `out`.
/// `query` applies to the left handle; the right handle must carry its own
/// goal from a transformation. Free the result with `ff_string_free`.
///
/// # Safety
/// Both handles must be live; `query` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ff_equivalence(
    lhs: *const FfProgram,
    query: *const c_char,
    rhs: *const FfProgram,
    max_depth: usize,
    max_steps: u64,
    out: *mut *mut c_char,
) -> FfStatus {
    let (Some(l), Some(r)) = (lhs.as_ref(), rhs.as_ref()) else {
        set_error("null argument");
        return FfStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null argument");
        return FfStatus::NullArgument;
    }
    let q = match utf8_arg(query) {
        Ok(t) => t.to_owned(),
        Err(s) => return s,
    };
    guarded(|| {
        let mut left = l.program.clone();
        let lgoal = match load_goal(&q, &mut left) {
            Ok(g) => g,
            Err(e) => return fail(&e),
        };
        let Some(rgoal) = r.goal.clone() else {
            set_error("right handle has no attached goal; transform it first");
            return FfStatus::Goal;
        };
        let defaults = EngineLimits::default();
        let limits = EngineLimits {
            max_depth: if max_depth == 0 { defaults.max_depth } else { max_depth },
            max_steps: if max_steps == 0 { defaults.max_steps } else { max_steps },
        };
        match check_equivalence(&left, &lgoal, &r.program, &rgoal, limits) {
            Ok(report) => out_string(report.to_string(), out),
            Err(e) => fail(&e),
        }
    })
}
