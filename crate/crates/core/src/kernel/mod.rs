//! Terms, reduction, η-long forms and the size measure.

mod eta;
mod reduce;
mod syntax;
mod term;

pub use eta::{
    eta_long, eta_long_in, normal_eta_long, normal_eta_long_in, size_in, size_of, sorts_in,
    spine_type, Locals, Signature,
};
pub use reduce::{is_normal, normalize, normalize_with, reduce_step, Strategy, DEFAULT_FUEL};
pub use syntax::{parse_term, parse_term_in, print_in, SyntaxError};
pub use term::{name, Head, Name, Node, Sort, Term};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("normalization ran out of fuel after {0} steps")]
    FuelExhausted(usize),
    #[error("term is not in normal form: {0}")]
    NotNormal(String),
    #[error("term is not atomic")]
    NotAtomic,
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("ill-typed term: {0}")]
    IllTyped(String),
}

/// Head symbol of an atomic term.
pub fn head_of(t: &Term) -> Result<Head, KernelError> {
    t.head().ok_or(KernelError::NotAtomic)
}

/// Replaces the free name `target` by `u` everywhere in `t`.
pub fn substitute(t: &Term, target: &str, u: &Term) -> Term {
    t.subst_free(target, u)
}
