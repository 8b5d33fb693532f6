//! Command-line front end: expression grammar and subcommand dispatch.

pub mod commands;
pub mod expr;

pub use expr::{parse_expression, Value};
