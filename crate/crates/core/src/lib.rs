//! Gradual GV: a gradually session-typed functional language with a
//! typechecker, a cast-inserting elaborator and a simulator for the cast
//! calculus it elaborates into.

pub mod ast;
pub mod blame;
pub mod check;
pub mod config;
pub mod embed;
pub mod load;
pub mod parser;
pub mod relations;
pub mod runtime;
pub mod types;
pub mod term;
pub mod typer;
