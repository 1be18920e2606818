//! firstify: specializing higher-order logic programs into first-order
//! Prolog.
//!
//! The pipeline reads a typed higher-order program, checks that it falls in
//! a fragment where specialization terminates, and then partially evaluates
//! every predicate-typed argument away, leaving an ordinary Prolog program
//! that a first-order engine can run. Two reference interpreters (top-down
//! SLD with negation as failure, bottom-up semi-naive) make the results
//! checkable, and a Reynolds-style defunctionalizer provides the classical
//! baseline to compare against.

pub mod analysis;
pub mod ast;
pub mod corpus;
pub mod emitter;
pub mod error;
pub mod interp;
pub mod parser;
pub mod specializer;

pub use error::{Error, Result};
