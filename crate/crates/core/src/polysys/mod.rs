//! Exact sparse polynomials, monomial orders and polynomial systems.

mod json;
mod monomial;
mod polynomial;
mod system;

pub use json::{
    int, parse_system, poly_from_terms, poly_to_terms, serialize_system, system_from_doc,
    system_to_doc, PolyDoc, SystemDoc, TermDoc,
};
pub use monomial::{monomial_cmp, monomials_of_degree, Monomial, MonomialOrder};
pub use polynomial::Polynomial;
pub use system::PolySystem;

#[cfg(test)]
pub(crate) use polynomial::rat;
