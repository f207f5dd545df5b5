//! Machine-integer evaluation of integer polynomials for the hot loops.

use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::linalg::{mul_mod, pow_mod};
use crate::polysys::Polynomial;

#[derive(Clone, Debug)]
pub struct CompiledTerm {
    pub coeff: i128,
    /// `(variable, exponent)` pairs with positive exponent.
    pub factors: Vec<(usize, u32)>,
}

/// Integer polynomial as a flat list of terms.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    pub n: usize,
    pub terms: Vec<CompiledTerm>,
}

impl CompiledPoly {
    pub fn new(p: &Polynomial) -> Result<Self> {
        let mut terms = Vec::with_capacity(p.num_terms());
        for (m, c) in p.terms() {
            if !c.is_integer() {
                return Err(Error::Validation(format!(
                    "coefficient {c} of {p} is not an integer"
                )));
            }
            let coeff = c
                .numer()
                .to_i128()
                .ok_or_else(|| Error::Overflow(format!("converting coefficient {c} to i128")))?;
            let factors = m
                .exponents()
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| (i, e))
                .collect();
            terms.push(CompiledTerm { coeff, factors });
        }
        Ok(CompiledPoly { n: p.n(), terms })
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.factors.iter().map(|f| f.1).sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Variables that occur in some term.
    pub fn variables(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .terms
            .iter()
            .flat_map(|t| t.factors.iter().map(|f| f.0))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Value mod `m` at a point whose coordinates are already reduced mod `m`.
    pub fn eval_mod(&self, x: &[u64], m: u64) -> u64 {
        let mi = m as i128;
        let mut acc: u64 = 0;
        for t in &self.terms {
            let mut v = match i64::try_from(t.coeff) {
                Ok(c) if m <= i64::MAX as u64 => c.rem_euclid(m as i64) as u64,
                _ => t.coeff.rem_euclid(mi) as u64,
            };
            for &(i, e) in &t.factors {
                if v == 0 {
                    break;
                }
                v = mul_mod(v, pow_mod(x[i], e as u64, m), m);
            }
            acc = (acc + v) % m;
        }
        acc
    }

    /// Exact value, or `None` on i128 overflow.
    pub fn eval_i128(&self, x: &[i64]) -> Option<i128> {
        let mut acc: i128 = 0;
        for t in &self.terms {
            let mut v = t.coeff;
            for &(i, e) in &t.factors {
                let xi = x[i] as i128;
                for _ in 0..e {
                    v = v.checked_mul(xi)?;
                }
            }
            acc = acc.checked_add(v)?;
        }
        Some(acc)
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.factors
                    .iter()
                    .fold(t.coeff as f64, |v, &(i, e)| v * x[i].powi(e as i32))
            })
            .sum()
    }

    /// Largest `|value|` over the box `|x_i| ≤ b`; `None` if it overflows.
    pub fn magnitude_bound(&self, b: u64) -> Option<u128> {
        let mut acc: u128 = 0;
        for t in &self.terms {
            let mut v = t.coeff.unsigned_abs();
            for &(_, e) in &t.factors {
                for _ in 0..e {
                    v = v.checked_mul(b as u128)?;
                }
            }
            acc = acc.checked_add(v)?;
        }
        Some(acc)
    }
}

/// Compiles every polynomial of a list.
pub fn compile_all<'a, I>(polys: I) -> Result<Vec<CompiledPoly>>
where
    I: IntoIterator<Item = &'a Polynomial>,
{
    polys.into_iter().map(CompiledPoly::new).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluations_agree() {
        let p = Polynomial::from_int_terms(2, &[(&[2, 1], 3), (&[0, 1], -5), (&[0, 0], 7)]).unwrap();
        let c = CompiledPoly::new(&p).unwrap();
        for x in -4i64..=4 {
            for y in -4i64..=4 {
                let exact = p.evaluate(&[x, y]).unwrap().to_integer();
                assert_eq!(c.eval_i128(&[x, y]).unwrap(), exact.to_i128().unwrap());
                let m = 11u64;
                let xm = [x.rem_euclid(11) as u64, y.rem_euclid(11) as u64];
                assert_eq!(c.eval_mod(&xm, m) as i128, exact.to_i128().unwrap().rem_euclid(11));
            }
        }
        assert_eq!(c.degree(), 3);
        assert_eq!(c.variables(), vec![0, 1]);
        assert_eq!(c.magnitude_bound(2), Some(3 * 8 + 10 + 7));
    }
}
