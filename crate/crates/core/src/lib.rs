//! Exact engine for single-valued multiple polylogarithms, multiple zeta values and
//! four-dimensional graphical functions.
//!
//! - [`words`]: words over `{0,1}` / `{0,1,2}` and the shuffle Hopf algebra
//! - [`mzv`]: formal multiple zeta values, regularization and the double-shuffle reducer
//! - [`ncseries`]: truncated noncommutative series, the associator and `x1'`
//! - [`svmp`]: single-valued polylogarithms, integration, limits and Möbius transforms
//! - [`ratfield`]: rational prefactors, expansions, residues and plane integrals
//! - [`graphfn`]: graphs, completion, the append-edge integral, construction and periods
//! - [`numeric`]: arbitrary-precision evaluation, monodromy checks and quadrature

pub mod graphfn;
pub mod mzv;
pub mod ncseries;
pub mod numeric;
pub mod ratfield;
pub mod svmp;
pub mod words;

pub use mzv::{Composition, MzvExpr};
pub use words::{SeqWord, Word, WordPoly};

/// Exact rational numbers.
pub type Q = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("not Lyndon: {0}")]
    NotLyndon(String),
    #[error("not admissible: {0}")]
    NotAdmissible(String),
    #[error("weight cap exceeded: weight {weight} > cap {cap}")]
    WeightCap { weight: usize, cap: usize },
    #[error("not invertible: {0}")]
    NotInvertible(String),
    #[error("cap mismatch: {0} vs {1}")]
    CapMismatch(usize, usize),
    #[error("divergent: {0}")]
    Divergent(String),
    #[error("divergent limit")]
    DivergentLimit,
    #[error("divergent (word must begin with 2)")]
    DivergentWord,
    #[error("not appendable (decomposition violated): {0}")]
    NotAppendable(String),
    #[error("not constructible: {0}")]
    NotConstructible(String),
    #[error("not in the span of single-valued polylogarithms: {0}")]
    NotSingleValued(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(String),
}
