use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::monomial::{Monomial, MonomialOrder};
use crate::error::{Error, Result};

/// Sparse polynomial with exact rational coefficients in `n` variables.
///
/// Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: BigRational) -> Self {
        let mut p = Polynomial::zero(n);
        p.add_term(Monomial::one(n), c);
        p
    }

    pub fn var(n: usize, i: usize) -> Self {
        let mut p = Polynomial::zero(n);
        p.add_term(Monomial::var(n, i), BigRational::one());
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs; repeated
    /// monomials are summed.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, BigRational)>,
    {
        let mut p = Polynomial::zero(n);
        for (e, c) in terms {
            if e.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: e.len(),
                });
            }
            p.add_term(Monomial::new(e), c);
        }
        Ok(p)
    }

    /// Convenience constructor with integer coefficients.
    pub fn from_int_terms(n: usize, terms: &[(&[u32], i64)]) -> Result<Self> {
        Polynomial::from_terms(
            n,
            terms
                .iter()
                .map(|(e, c)| (e.to_vec(), BigRational::from_integer(BigInt::from(*c)))),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn add_term(&mut self, m: Monomial, c: BigRational) {
        debug_assert_eq!(m.n(), self.n);
        if c.is_zero() {
            return;
        }
        let remove = match self.terms.get_mut(&m) {
            Some(v) => {
                *v += &c;
                v.is_zero()
            }
            None => {
                self.terms.insert(m, c);
                false
            }
        };
        if remove {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.degree()).max()
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(|m| m.degree());
        match degs.next() {
            None => true,
            Some(d) => degs.all(|e| e == d),
        }
    }

    /// Sum of the terms of total degree `j`.
    pub fn homogeneous_part(&self, j: u32) -> Polynomial {
        Polynomial {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() == j)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Highest-degree homogeneous part.
    pub fn leading_form(&self) -> Polynomial {
        match self.degree() {
            Some(d) => self.homogeneous_part(d),
            None => self.clone(),
        }
    }

    pub fn leading_monomial(&self, ord: &MonomialOrder) -> Option<&Monomial> {
        self.terms.keys().max_by(|a, b| ord.cmp_unchecked(a, b))
    }

    pub fn scale(&self, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(self.n);
        }
        Polynomial {
            n: self.n,
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(self.n);
        }
        Polynomial {
            n: self.n,
            terms: self.terms.iter().map(|(k, v)| (k.mul(m), v * c)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut acc = Polynomial::constant(self.n, BigRational::one());
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    pub fn has_integer_coefficients(&self) -> bool {
        self.terms.values().all(|c| c.is_integer())
    }

    /// Least common multiple of the coefficient denominators.
    pub fn denominator_lcm(&self) -> BigInt {
        self.terms
            .values()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
    }

    /// Scales to the primitive integer polynomial with the same zero set:
    /// clears denominators, then divides by the content. The sign is kept.
    pub fn primitive_integer(&self) -> Polynomial {
        if self.is_zero() {
            return self.clone();
        }
        let l = BigRational::from_integer(self.denominator_lcm());
        let scaled = self.scale(&l);
        let g = scaled
            .terms
            .values()
            .fold(BigInt::zero(), |acc, c| acc.gcd(c.numer()));
        scaled.scale(&BigRational::new(BigInt::one(), g))
    }

    /// Exact value at an integer point.
    pub fn evaluate(&self, x: &[i64]) -> Result<BigRational> {
        if x.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: x.len(),
            });
        }
        let xs: Vec<BigInt> = x.iter().map(|&v| BigInt::from(v)).collect();
        Ok(self.eval_bigint(&xs))
    }

    pub fn evaluate_rational(&self, x: &[BigRational]) -> Result<BigRational> {
        if x.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &e) in x.iter().zip(m.exponents()) {
                if e > 0 {
                    t *= num_traits::pow(xi.clone(), e as usize);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    pub(crate) fn eval_bigint(&self, x: &[BigInt]) -> BigRational {
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = BigInt::one();
            for (xi, &e) in x.iter().zip(m.exponents()) {
                if e > 0 {
                    t *= num_traits::pow(xi.clone(), e as usize);
                }
            }
            acc += c * BigRational::from_integer(t);
        }
        acc
    }

    /// Floating point value at a real point.
    pub fn evaluate_f64(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut t = c.to_f64().unwrap_or(f64::NAN);
                for (xi, &e) in x.iter().zip(m.exponents()) {
                    if e > 0 {
                        t *= xi.powi(e as i32);
                    }
                }
                t
            })
            .sum()
    }

    /// Partial derivative with respect to `x_i`.
    pub fn derivative(&self, i: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.n);
        for (m, c) in &self.terms {
            let e = m.exponents()[i];
            if e == 0 {
                continue;
            }
            let mut ex = m.exponents().to_vec();
            ex[i] -= 1;
            out.add_term(
                Monomial::new(ex),
                c * BigRational::from_integer(BigInt::from(e)),
            );
        }
        out
    }

    /// Substitutes `x_i -> images[i]`; the images live in `new_n` variables.
    pub fn compose(&self, images: &[Polynomial], new_n: usize) -> Result<Polynomial> {
        if images.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: images.len(),
            });
        }
        if let Some(bad) = images.iter().find(|p| p.n != new_n) {
            return Err(Error::Dimension {
                expected: new_n,
                got: bad.n,
            });
        }
        // cache powers of each image
        let mut powers: Vec<Vec<Polynomial>> = images
            .iter()
            .map(|p| vec![Polynomial::constant(new_n, BigRational::one()), p.clone()])
            .collect();
        let mut out = Polynomial::zero(new_n);
        for (m, c) in &self.terms {
            let mut t = Polynomial::constant(new_n, c.clone());
            for (i, &e) in m.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = &powers[i][powers[i].len() - 1] * &images[i];
                    powers[i].push(next);
                }
                t = &t * &powers[i][e as usize];
            }
            out = &out + &t;
        }
        Ok(out)
    }

    /// Replaces a single variable `x_i` by `image` (same variable count).
    pub fn substitute(&self, i: usize, image: &Polynomial) -> Result<Polynomial> {
        let images: Vec<Polynomial> = (0..self.n)
            .map(|j| {
                if j == i {
                    image.clone()
                } else {
                    Polynomial::var(self.n, j)
                }
            })
            .collect();
        self.compose(&images, self.n)
    }

    /// Variables appearing in at least one term.
    pub fn variables(&self) -> Vec<usize> {
        let mut used = vec![false; self.n];
        for m in self.terms.keys() {
            for i in m.support() {
                used[i] = true;
            }
        }
        (0..self.n).filter(|&i| used[i]).collect()
    }

    /// Coefficients as machine integers, if they all are integers that fit.
    pub fn integer_terms_i128(&self) -> Option<Vec<(Vec<u32>, i128)>> {
        self.terms
            .iter()
            .map(|(m, c)| {
                if !c.is_integer() {
                    return None;
                }
                c.numer().to_i128().map(|v| (m.exponents().to_vec(), v))
            })
            .collect()
    }

    /// Largest absolute coefficient.
    pub fn height(&self) -> BigRational {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(BigRational::zero)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero(self.n);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            n: self.n,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let ord = MonomialOrder::grlex(self.n);
        let mut keys: Vec<&Monomial> = self.terms.keys().collect();
        keys.sort_by(|a, b| ord.cmp_unchecked(b, a));
        for (k, m) in keys.into_iter().enumerate() {
            let c = &self.terms[m];
            let neg = c.is_negative();
            let a = c.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            if m.is_one() {
                write!(f, "{a}")?;
            } else if a.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{a}*{m}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}
