use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use super::polynomial::Polynomial;
use crate::error::{Error, Result};

/// A system of integer polynomials grouped by exact total degree.
///
/// Group `ℓ` holds the `r_ℓ` polynomials of degree `ℓ`. A degree-0 group of
/// nonzero constants is allowed so that inconsistent systems can be written
/// down; it contributes to `R` but not to `D`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolySystem {
    n: usize,
    groups: BTreeMap<u32, Vec<Polynomial>>,
}

impl PolySystem {
    pub fn empty(n: usize) -> Self {
        PolySystem {
            n,
            groups: BTreeMap::new(),
        }
    }

    /// Groups `polys` by degree. Every polynomial must be nonzero with
    /// integer coefficients in `n` variables.
    pub fn new(n: usize, polys: Vec<Polynomial>) -> Result<Self> {
        let mut s = PolySystem::empty(n);
        for p in polys {
            s.push(p)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, p: Polynomial) -> Result<()> {
        if p.n() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: p.n(),
            });
        }
        let deg = p
            .degree()
            .ok_or_else(|| Error::Validation("the zero polynomial is not a valid equation".into()))?;
        if !p.has_integer_coefficients() {
            return Err(Error::Validation(format!(
                "polynomial {p} has non-integer coefficients"
            )));
        }
        self.groups.entry(deg).or_default().push(p);
        Ok(())
    }

    /// Like [`PolySystem::push`] but checks the declared degree first.
    pub fn push_declared(&mut self, degree: u32, p: Polynomial) -> Result<()> {
        match p.degree() {
            Some(d) if d == degree => self.push(p),
            Some(d) => Err(Error::Validation(format!(
                "declared degree {degree} but polynomial {p} has degree {d}"
            ))),
            None => Err(Error::Validation("the zero polynomial is not a valid equation".into())),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Highest degree present (0 for an empty system).
    pub fn d(&self) -> u32 {
        self.groups.keys().next_back().copied().unwrap_or(0)
    }

    pub fn group(&self, l: u32) -> &[Polynomial] {
        self.groups.get(&l).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn groups(&self) -> impl Iterator<Item = (u32, &[Polynomial])> {
        self.groups.iter().map(|(&l, v)| (l, v.as_slice()))
    }

    pub fn r(&self, l: u32) -> usize {
        self.group(l).len()
    }

    /// Total number of equations `R`.
    pub fn big_r(&self) -> usize {
        self.groups.values().map(|v| v.len()).sum()
    }

    /// `D = Σ ℓ r_ℓ`.
    pub fn big_d(&self) -> u64 {
        self.groups
            .iter()
            .map(|(&l, v)| l as u64 * v.len() as u64)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// All polynomials, ascending by degree, in insertion order within a degree.
    pub fn polys(&self) -> impl Iterator<Item = &Polynomial> {
        self.groups.values().flatten()
    }

    /// Like [`PolySystem::polys`] but with the degree attached.
    pub fn polys_with_degree(&self) -> impl Iterator<Item = (u32, &Polynomial)> {
        self.groups
            .iter()
            .flat_map(|(&l, v)| v.iter().map(move |p| (l, p)))
    }

    /// True if a degree-0 equation (a nonzero constant) is present.
    pub fn is_trivially_inconsistent(&self) -> bool {
        !self.group(0).is_empty()
    }

    /// Leading forms `F_{ℓ,r}` in the same order as [`PolySystem::polys`].
    pub fn leading_forms(&self) -> Vec<Polynomial> {
        self.polys().map(|p| p.leading_form()).collect()
    }

    /// True if every polynomial vanishes at `x`.
    pub fn is_solution(&self, x: &[i64]) -> Result<bool> {
        for p in self.polys() {
            if !p.evaluate(x)?.is_zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Largest absolute coefficient across the system.
    pub fn height(&self) -> num_rational::BigRational {
        self.polys()
            .map(|p| p.height().abs())
            .max()
            .unwrap_or_else(num_rational::BigRational::zero)
    }
}
