//! On-disk system format.
//!
//! ```json
//! {"n": 3, "polys": [{"degree": 1, "terms": [{"exp": [1,0,0], "c": "1"}, ...]}]}
//! ```
//!
//! Coefficients are written as decimal strings; plain JSON integers are
//! accepted on input.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::polynomial::Polynomial;
use super::system::PolySystem;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
pub struct TermDoc {
    pub exp: Vec<u32>,
    pub c: Value,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PolyDoc {
    pub degree: u32,
    pub terms: Vec<TermDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SystemDoc {
    pub n: usize,
    pub polys: Vec<PolyDoc>,
}

fn parse_integer(v: &Value) -> Result<BigInt> {
    match v {
        Value::Number(num) => {
            if let Some(i) = num.as_i64() {
                Ok(BigInt::from(i))
            } else if let Some(u) = num.as_u64() {
                Ok(BigInt::from(u))
            } else {
                Err(Error::Validation(format!(
                    "coefficient {num} is not an integer"
                )))
            }
        }
        Value::String(s) => BigInt::from_str(s.trim())
            .map_err(|_| Error::Validation(format!("coefficient \"{s}\" is not an integer"))),
        other => Err(Error::Parse(format!("coefficient must be a string or number, got {other}"))),
    }
}

/// Converts a term list to a polynomial, checking exponent lengths.
pub fn poly_from_terms(n: usize, terms: &[TermDoc]) -> Result<Polynomial> {
    let mut pairs = Vec::with_capacity(terms.len());
    for t in terms {
        if t.exp.len() != n {
            return Err(Error::Validation(format!(
                "exponent vector {:?} has length {}, expected {n}",
                t.exp,
                t.exp.len()
            )));
        }
        pairs.push((t.exp.clone(), BigRational::from_integer(parse_integer(&t.c)?)));
    }
    Polynomial::from_terms(n, pairs)
}

/// Encodes a polynomial as a sorted term list with string coefficients.
pub fn poly_to_terms(p: &Polynomial) -> Vec<TermDoc> {
    p.terms()
        .map(|(m, c)| TermDoc {
            exp: m.exponents().to_vec(),
            c: Value::String(if c.denom().is_one() {
                c.numer().to_string()
            } else {
                c.to_string()
            }),
        })
        .collect()
}

pub fn system_from_doc(doc: &SystemDoc) -> Result<PolySystem> {
    let mut s = PolySystem::empty(doc.n);
    for (k, pd) in doc.polys.iter().enumerate() {
        let p = poly_from_terms(doc.n, &pd.terms)?;
        if p.is_zero() {
            return Err(Error::Validation(format!("polynomial #{k} is identically zero")));
        }
        s.push_declared(pd.degree, p)
            .map_err(|e| Error::Validation(format!("polynomial #{k}: {e}")))?;
    }
    Ok(s)
}

pub fn system_to_doc(s: &PolySystem) -> SystemDoc {
    SystemDoc {
        n: s.n(),
        polys: s
            .polys_with_degree()
            .map(|(l, p)| PolyDoc {
                degree: l,
                terms: poly_to_terms(p),
            })
            .collect(),
    }
}

pub fn parse_system(text: &str) -> Result<PolySystem> {
    let doc: SystemDoc =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("malformed system JSON: {e}")))?;
    system_from_doc(&doc)
}

pub fn serialize_system(s: &PolySystem) -> String {
    serde_json::to_string(&system_to_doc(s)).expect("system documents always serialize")
}

/// Helper for callers that build systems in code.
pub fn int(v: i64) -> BigRational {
    if v == 0 {
        BigRational::zero()
    } else {
        BigRational::from_integer(BigInt::from(v))
    }
}
