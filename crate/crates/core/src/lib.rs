//! An untyped lambda calculus with parallel joins, evaluated as a stream of
//! monotonically improving approximations, together with a checker for
//! formula assignments.

pub mod assign;
pub mod corpus;
pub mod error;
pub mod formula;
pub mod pretty;
pub mod props;
pub mod reduce;
pub mod stream;
pub mod surface;
pub mod syntax;

pub use error::{Error, Result};
pub use syntax::{Expr, Symbol, SymbolTable};
