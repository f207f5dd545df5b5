use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Exponent vector of a monomial in `n` variables.
///
/// The derived `Ord` is plain lexicographic order on the exponent vector and
/// is only used for map storage; use [`MonomialOrder`] for the algebraic order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    /// The monomial `x_i`.
    pub fn var(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// `self | other`: every exponent of `self` is at most the matching one of `other`.
    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `other / self`, provided `self | other`.
    pub fn quotient_of(&self, other: &Monomial) -> Option<Monomial> {
        if !self.divides(other) {
            return None;
        }
        Some(Monomial(other.0.iter().zip(&self.0).map(|(b, a)| b - a).collect()))
    }

    /// Indices of the variables with positive exponent.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, _)| i)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// Graded lexicographic order with a configurable variable priority.
///
/// `priority[0]` is the most significant variable. Degrees are compared
/// first; ties are broken by the exponent of each variable in priority order,
/// a larger exponent giving the larger monomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialOrder {
    priority: Vec<usize>,
}

impl MonomialOrder {
    /// Identity priority: `x_1 > x_2 > ... > x_n` at equal degree.
    pub fn grlex(n: usize) -> Self {
        MonomialOrder {
            priority: (0..n).collect(),
        }
    }

    pub fn with_priority(priority: Vec<usize>) -> Result<Self> {
        let n = priority.len();
        let mut seen = vec![false; n];
        for &v in &priority {
            if v >= n || seen[v] {
                return Err(Error::Validation(format!(
                    "variable priority {priority:?} is not a permutation of 0..{n}"
                )));
            }
            seen[v] = true;
        }
        Ok(MonomialOrder { priority })
    }

    pub fn n(&self) -> usize {
        self.priority.len()
    }

    pub fn priority(&self) -> &[usize] {
        &self.priority
    }

    pub fn cmp(&self, a: &Monomial, b: &Monomial) -> Result<Ordering> {
        let n = self.priority.len();
        if a.n() != n {
            return Err(Error::Dimension {
                expected: n,
                got: a.n(),
            });
        }
        if b.n() != n {
            return Err(Error::Dimension {
                expected: n,
                got: b.n(),
            });
        }
        Ok(self.cmp_unchecked(a, b))
    }

    pub(crate) fn cmp_unchecked(&self, a: &Monomial, b: &Monomial) -> Ordering {
        a.degree().cmp(&b.degree()).then_with(|| {
            for &v in &self.priority {
                match a.0[v].cmp(&b.0[v]) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            Ordering::Equal
        })
    }
}

/// Free function form of [`MonomialOrder::cmp`].
pub fn monomial_cmp(a: &Monomial, b: &Monomial, ord: &MonomialOrder) -> Result<Ordering> {
    ord.cmp(a, b)
}

/// All exponent vectors of total degree `deg` in `n` variables.
pub fn monomials_of_degree(n: usize, deg: u32) -> Vec<Monomial> {
    fn rec(n: usize, i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        if i + 1 == n {
            cur[i] = left;
            out.push(Monomial(cur.clone()));
            cur[i] = 0;
            return;
        }
        for e in (0..=left).rev() {
            cur[i] = e;
            rec(n, i + 1, left - e, cur, out);
        }
        cur[i] = 0;
    }
    let mut out = Vec::new();
    if n == 0 {
        if deg == 0 {
            out.push(Monomial(Vec::new()));
        }
        return out;
    }
    rec(n, 0, deg, &mut vec![0; n], &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(e: &[u32]) -> Monomial {
        Monomial::new(e.to_vec())
    }

    #[test]
    fn grlex_examples() {
        let ord = MonomialOrder::grlex(3);
        assert_eq!(ord.cmp(&m(&[1, 1, 0]), &m(&[2, 0, 0])).unwrap(), Ordering::Less);
        assert_eq!(ord.cmp(&m(&[3, 0, 0]), &m(&[1, 1, 1])).unwrap(), Ordering::Greater);
        assert_eq!(ord.cmp(&m(&[0, 1, 0]), &m(&[2, 0, 0])).unwrap(), Ordering::Less);
    }

    #[test]
    fn priority_changes_tie_break() {
        let ord = MonomialOrder::with_priority(vec![1, 0]).unwrap();
        assert_eq!(ord.cmp(&m(&[1, 0]), &m(&[0, 1])).unwrap(), Ordering::Less);
        assert!(MonomialOrder::with_priority(vec![0, 0]).is_err());
    }

    #[test]
    fn length_mismatch_is_dimension_error() {
        let ord = MonomialOrder::grlex(2);
        assert!(matches!(
            ord.cmp(&m(&[1, 0, 0]), &m(&[1, 0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn divisibility() {
        assert!(m(&[1, 0, 2]).divides(&m(&[1, 1, 2])));
        assert!(!m(&[2, 0, 0]).divides(&m(&[1, 1, 2])));
        assert_eq!(m(&[1, 0]).quotient_of(&m(&[2, 3])), Some(m(&[1, 3])));
    }

    #[test]
    fn degree_enumeration_counts() {
        // C(n + d - 1, d)
        assert_eq!(monomials_of_degree(3, 2).len(), 6);
        assert_eq!(monomials_of_degree(4, 3).len(), 20);
        assert_eq!(monomials_of_degree(2, 0), vec![m(&[0, 0])]);
    }
}
