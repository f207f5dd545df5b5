//! Graded-lex normal form of a polynomial system.
//!
//! Linear equations are row reduced and their pivot variables substituted out
//! of everything else. Then, degree by degree, each group is reduced
//! (Gröbner-style) against the leading monomials already fixed at lower
//! degrees, and row reduced on its top-degree coefficient matrix. Every
//! equation ends up as `c·w^j + χ + f̃`, where `w^j` is its leading monomial.
//! No monomial of `χ` or `f̃` is divisible by any leading monomial of equal or
//! lower degree. The integer solution set never changes.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariants::h_upper_bound;
use crate::linalg::rref;
use crate::polysys::{
    poly_to_terms, system_to_doc, Monomial, MonomialOrder, PolySystem, Polynomial, SystemDoc,
    TermDoc,
};

/// Division steps allowed before the reduction is declared stuck.
const MAX_DIVISION_STEPS: usize = 1_000_000;

/// One reduced equation `c·w^j + χ + f̃`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalEntry {
    pub degree: u32,
    pub leading: Monomial,
    pub c: BigInt,
    pub chi: Polynomial,
    pub tail: Polynomial,
}

impl NormalEntry {
    pub fn poly(&self) -> Polynomial {
        let mut p = &self.chi + &self.tail;
        p.add_term(self.leading.clone(), BigRational::from_integer(self.c.clone()));
        p
    }
}

/// Linear elimination `x_var = expr`, with `expr` free of every eliminated variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Substitution {
    pub var: usize,
    pub expr: Polynomial,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalForm {
    pub n: usize,
    pub order: MonomialOrder,
    /// Entries ascending by degree; within a degree in row-echelon order.
    pub entries: Vec<NormalEntry>,
    /// Designated variables: linear pivots first, then the new variables of
    /// each degree's leading monomials.
    pub w_vars: Vec<usize>,
    pub substitutions: Vec<Substitution>,
}

impl NormalForm {
    fn empty(n: usize, order: MonomialOrder) -> Self {
        NormalForm {
            n,
            order,
            entries: Vec::new(),
            w_vars: Vec::new(),
            substitutions: Vec::new(),
        }
    }

    /// The reduced system itself.
    pub fn base(&self) -> PolySystem {
        let mut s = PolySystem::empty(self.n);
        for e in &self.entries {
            s.push(e.poly())
                .expect("normal form entries are nonzero integer polynomials");
        }
        s
    }

    /// Equations of degree at least two, which never mention a linear pivot.
    pub fn higher(&self) -> PolySystem {
        let mut s = PolySystem::empty(self.n);
        for e in self.entries.iter().filter(|e| e.degree >= 2) {
            s.push(e.poly())
                .expect("normal form entries are nonzero integer polynomials");
        }
        s
    }

    pub fn entries_of_degree(&self, l: u32) -> impl Iterator<Item = &NormalEntry> {
        self.entries.iter().filter(move |e| e.degree == l)
    }

    /// Completes a point by the recorded substitutions. The coordinates of
    /// eliminated variables in `y` are ignored. `None` if some eliminated
    /// coordinate is not an integer.
    pub fn apply_substitutions(&self, y: &[i64]) -> Result<Option<Vec<i64>>> {
        if y.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: y.len(),
            });
        }
        let mut x = y.to_vec();
        for s in &self.substitutions {
            let v = s.expr.evaluate(y)?;
            if !v.is_integer() {
                return Ok(None);
            }
            match i64::try_from(v.to_integer()) {
                Ok(v) => x[s.var] = v,
                Err(_) => return Ok(None),
            }
        }
        Ok(Some(x))
    }

    fn push_w_vars(&mut self, m: &Monomial) {
        for v in m.support() {
            if !self.w_vars.contains(&v) {
                self.w_vars.push(v);
            }
        }
    }
}

/// Row reduces the linear equations and substitutes their pivot variables
/// into the higher-degree equations, which are then cleared to primitive
/// integer polynomials.
pub fn eliminate_linear(s: &PolySystem, ord: &MonomialOrder) -> Result<(NormalForm, PolySystem)> {
    let n = s.n();
    check_input(s, ord)?;
    let mut nf = NormalForm::empty(n, ord.clone());
    let lin = s.group(1);
    if lin.is_empty() {
        let mut higher = PolySystem::empty(n);
        for p in s.polys() {
            higher.push(p.clone())?;
        }
        return Ok((nf, higher));
    }

    let cols = sorted_columns(ord, (0..n).map(|i| Monomial::var(n, i)).collect());
    let (rows, pivots) = row_reduce(lin, &cols, 1)?;
    let mut images: Vec<Polynomial> = (0..n).map(|i| Polynomial::var(n, i)).collect();
    for (row, &pc) in rows.iter().zip(&pivots) {
        let w = cols[pc].clone();
        let var = w.support().next().expect("degree one monomial");
        // row = w + rest, so w = -rest
        let mut rest = row.clone();
        rest.add_term(w.clone(), -BigRational::one());
        let scaled = row.primitive_integer();
        let c = scaled.coeff(&w).to_integer();
        let mut tail = scaled.clone();
        tail.add_term(w.clone(), -BigRational::from_integer(c.clone()));
        nf.entries.push(NormalEntry {
            degree: 1,
            leading: w.clone(),
            c,
            chi: Polynomial::zero(n),
            tail,
        });
        nf.w_vars.push(var);
        let expr = -&rest;
        images[var] = expr.clone();
        nf.substitutions.push(Substitution { var, expr });
    }

    let mut higher = PolySystem::empty(n);
    for (l, group) in s.groups().filter(|(l, _)| *l >= 2) {
        let mut subbed = Vec::with_capacity(group.len());
        for p in group {
            subbed.push(p.compose(&images, n)?.primitive_integer());
        }
        let rank = top_degree_rank(&subbed, l, ord);
        if rank < group.len() || subbed.iter().any(|p| p.degree() != Some(l)) {
            return Err(Error::RankDeficient {
                degree: l as usize,
                rank,
                expected: group.len(),
            });
        }
        for p in subbed {
            higher.push(p)?;
        }
    }
    Ok((nf, higher))
}

/// Full reduction to normal form.
pub fn reduce_to_normal_form(s: &PolySystem, ord: &MonomialOrder) -> Result<NormalForm> {
    let (mut nf, higher) = eliminate_linear(s, ord)?;
    let n = s.n();
    for (l, group) in higher.groups() {
        // split off the part divisible by lower leading monomials and reduce it
        let divisors: Vec<(Monomial, BigRational, Polynomial)> = nf
            .entries
            .iter()
            .filter(|e| e.degree >= 2)
            .map(|e| (e.leading.clone(), BigRational::from_integer(e.c.clone()), e.poly()))
            .collect();
        let mut chi_prime = Vec::with_capacity(group.len());
        let mut f_second = Vec::with_capacity(group.len());
        for p in group {
            let mut chi2 = Polynomial::zero(n);
            let mut f2 = Polynomial::zero(n);
            for (m, c) in p.terms() {
                if divisors.iter().any(|(lm, _, _)| lm.divides(m)) {
                    chi2.add_term(m.clone(), c.clone());
                } else {
                    f2.add_term(m.clone(), c.clone());
                }
            }
            chi_prime.push(divide(&chi2, &divisors, ord)?);
            f_second.push(f2);
        }
        let combined: Vec<Polynomial> = chi_prime
            .iter()
            .zip(&f_second)
            .map(|(a, b)| a + b)
            .collect();

        let cols = sorted_columns(ord, top_monomials(&combined, l));
        let mat = coefficient_matrix(&combined, &cols, l);
        let red = rref(&mat);
        if red.rank() < group.len() {
            return Err(Error::RankDeficient {
                degree: l as usize,
                rank: red.rank(),
                expected: group.len(),
            });
        }
        let pivot_monomials: Vec<Monomial> =
            red.pivots.iter().map(|&c| cols[c].clone()).collect();
        for (k, lead) in pivot_monomials.iter().enumerate() {
            let mut chi = Polynomial::zero(n);
            let mut tail = Polynomial::zero(n);
            for j in 0..group.len() {
                let t = &red.transform[k][j];
                if t.is_zero() {
                    continue;
                }
                chi = &chi + &chi_prime[j].scale(t);
                tail = &tail + &f_second[j].scale(t);
            }
            let c1 = chi.coeff(lead);
            let c2 = tail.coeff(lead);
            chi.add_term(lead.clone(), -c1.clone());
            tail.add_term(lead.clone(), -c2.clone());
            // other pivots cancel between the two parts; drop them from both
            for other in pivot_monomials.iter().filter(|m| *m != lead) {
                let a = chi.coeff(other);
                if !a.is_zero() {
                    chi.add_term(other.clone(), -a.clone());
                    tail.add_term(other.clone(), a);
                }
                if !tail.coeff(other).is_zero() {
                    return Err(Error::Internal(format!(
                        "row reduction left pivot {other} in a non-pivot row"
                    )));
                }
            }
            let c = c1 + c2;
            let scale = integer_scale(&c, &chi, &tail);
            let entry = NormalEntry {
                degree: l,
                leading: lead.clone(),
                c: (&c * &scale).to_integer(),
                chi: chi.scale(&scale),
                tail: tail.scale(&scale),
            };
            nf.push_w_vars(lead);
            nf.entries.push(entry);
        }
    }
    Ok(nf)
}

fn check_input(s: &PolySystem, ord: &MonomialOrder) -> Result<()> {
    if ord.n() != s.n() {
        return Err(Error::Dimension {
            expected: s.n(),
            got: ord.n(),
        });
    }
    if s.is_trivially_inconsistent() {
        return Err(Error::Validation(
            "constant equations have no normal form".into(),
        ));
    }
    Ok(())
}

/// Columns in decreasing monomial order.
fn sorted_columns(ord: &MonomialOrder, mut cols: Vec<Monomial>) -> Vec<Monomial> {
    cols.sort_by(|a, b| ord.cmp_unchecked(b, a));
    cols.dedup();
    cols
}

fn top_monomials(polys: &[Polynomial], l: u32) -> Vec<Monomial> {
    let set: BTreeSet<Monomial> = polys
        .iter()
        .flat_map(|p| p.terms().map(|(m, _)| m.clone()))
        .filter(|m| m.degree() == l)
        .collect();
    set.into_iter().collect()
}

fn coefficient_matrix(polys: &[Polynomial], cols: &[Monomial], _l: u32) -> Vec<Vec<BigRational>> {
    polys
        .iter()
        .map(|p| cols.iter().map(|m| p.coeff(m)).collect())
        .collect()
}

fn top_degree_rank(polys: &[Polynomial], l: u32, ord: &MonomialOrder) -> usize {
    let cols = sorted_columns(ord, top_monomials(polys, l));
    rref(&coefficient_matrix(polys, &cols, l)).rank()
}

/// Row reduces `polys` on their degree-`l` coefficients over `cols` and
/// applies the same operations to the whole polynomials.
fn row_reduce(
    polys: &[Polynomial],
    cols: &[Monomial],
    l: u32,
) -> Result<(Vec<Polynomial>, Vec<usize>)> {
    let red = rref(&coefficient_matrix(polys, cols, l));
    if red.rank() < polys.len() {
        return Err(Error::RankDeficient {
            degree: l as usize,
            rank: red.rank(),
            expected: polys.len(),
        });
    }
    let n = polys[0].n();
    let rows = (0..red.rank())
        .map(|k| {
            polys
                .iter()
                .enumerate()
                .fold(Polynomial::zero(n), |acc, (j, p)| &acc + &p.scale(&red.transform[k][j]))
        })
        .collect();
    Ok((rows, red.pivots))
}

/// Multivariate division remainder of `p` by `(leading monomial, leading
/// coefficient, polynomial)` triples.
fn divide(
    p: &Polynomial,
    divisors: &[(Monomial, BigRational, Polynomial)],
    ord: &MonomialOrder,
) -> Result<Polynomial> {
    let n = p.n();
    let mut work = p.clone();
    let mut rem = Polynomial::zero(n);
    let mut steps = 0;
    while let Some(m) = work.leading_monomial(ord).cloned() {
        steps += 1;
        if steps > MAX_DIVISION_STEPS {
            return Err(Error::Internal(
                "division did not terminate; leading monomials are inconsistent".into(),
            ));
        }
        let c = work.coeff(&m);
        match divisors.iter().find(|(lm, _, _)| lm.divides(&m)) {
            Some((lm, lc, f)) => {
                let q = lm.quotient_of(&m).expect("checked divisibility");
                work = &work - &f.mul_monomial(&q, &(&c / lc));
                if !work.coeff(&m).is_zero() {
                    return Err(Error::Internal(format!(
                        "division step failed to cancel {m}"
                    )));
                }
            }
            None => {
                rem.add_term(m.clone(), c.clone());
                work.add_term(m, -c);
            }
        }
    }
    Ok(rem)
}

/// Smallest positive rational `λ` making `λc`, `λχ` and `λf̃` primitive integers.
fn integer_scale(c: &BigRational, chi: &Polynomial, tail: &Polynomial) -> BigRational {
    // χ and f̃ are scaled separately, so both must come out integral
    let mut coeffs: Vec<BigRational> = vec![c.clone()];
    coeffs.extend(chi.terms().map(|(_, v)| v.clone()));
    coeffs.extend(tail.terms().map(|(_, v)| v.clone()));
    let lcm = coeffs
        .iter()
        .fold(BigInt::one(), |acc, v| num_integer::Integer::lcm(&acc, v.denom()));
    let g = coeffs.iter().fold(BigInt::zero(), |acc, v| {
        num_integer::Integer::gcd(&acc, &(v * BigRational::from_integer(lcm.clone())).to_integer())
    });
    let mut s = BigRational::new(lcm, g);
    if (c * &s).is_negative() {
        s = -s;
    }
    s
}

/// Outcome of one property check with an optional witness.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub holds: bool,
    pub witness: Option<String>,
}

impl PropertyCheck {
    fn pass() -> Self {
        PropertyCheck {
            holds: true,
            witness: None,
        }
    }

    fn fail_with(&mut self, w: String) {
        if self.holds {
            self.holds = false;
            self.witness = Some(w);
        }
    }
}

/// Result of [`verify_normal_form`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormalFormReport {
    /// Integer nonzero `c`, `w^j` of degree `ℓ` is the leading monomial.
    pub shape: PropertyCheck,
    /// Leading monomials distinct, none divisible by a lower-degree one.
    pub leading_distinct: PropertyCheck,
    /// `χ` integral, degree `≤ ℓ`, free of divisible monomials.
    pub chi_reduced: PropertyCheck,
    /// `f̃` integral, degree `≤ ℓ`, free of divisible monomials.
    pub tail_reduced: PropertyCheck,
    /// `K = |w| ≤ Σ ℓ r_ℓ`.
    pub k_bound: PropertyCheck,
    /// Constructive upper bound for the h-invariant of each `χ`'s top part,
    /// as `(degree, index within degree, bound)`.
    pub chi_h_bounds: Vec<(u32, usize, u64)>,
}

impl NormalFormReport {
    pub fn all_hold(&self) -> bool {
        self.shape.holds
            && self.leading_distinct.holds
            && self.chi_reduced.holds
            && self.tail_reduced.holds
            && self.k_bound.holds
    }
}

pub fn verify_normal_form(nf: &NormalForm) -> NormalFormReport {
    let mut shape = PropertyCheck::pass();
    let mut distinct = PropertyCheck::pass();
    let mut chi_ok = PropertyCheck::pass();
    let mut tail_ok = PropertyCheck::pass();
    let mut k_bound = PropertyCheck::pass();
    let mut chi_h_bounds = Vec::new();

    let mut index_in_degree = 0usize;
    let mut last_degree = 0u32;
    for (k, e) in nf.entries.iter().enumerate() {
        if e.degree != last_degree {
            index_in_degree = 0;
            last_degree = e.degree;
        }
        let label = format!("equation {} (degree {}, #{})", k, e.degree, index_in_degree + 1);
        index_in_degree += 1;

        if e.c.is_zero() {
            shape.fail_with(format!("{label}: zero leading coefficient"));
        }
        if e.leading.degree() != e.degree {
            shape.fail_with(format!("{label}: leading monomial {} has wrong degree", e.leading));
        }
        let full = e.poly();
        match full.leading_monomial(&nf.order) {
            Some(lm) if *lm == e.leading => {}
            Some(lm) => shape.fail_with(format!(
                "{label}: leading monomial is {lm}, recorded {}",
                e.leading
            )),
            None => shape.fail_with(format!("{label}: equation vanishes")),
        }
        if e.degree == 1 && !e.chi.is_zero() {
            shape.fail_with(format!("{label}: linear equation carries a residual"));
        }

        for (part, check, name) in [(&e.chi, &mut chi_ok, "χ"), (&e.tail, &mut tail_ok, "f̃")] {
            if !part.has_integer_coefficients() {
                check.fail_with(format!("{label}: {name} has non-integer coefficients"));
            }
            if part.degree().unwrap_or(0) > e.degree {
                check.fail_with(format!("{label}: {name} exceeds degree {}", e.degree));
            }
            for (m, _) in part.terms() {
                if let Some(o) = nf
                    .entries
                    .iter()
                    .find(|o| o.degree <= e.degree && o.leading.divides(m))
                {
                    check.fail_with(format!(
                        "{label}: {name} contains {m}, divisible by leading monomial {}",
                        o.leading
                    ));
                }
            }
        }

        for (j, o) in nf.entries.iter().enumerate() {
            if j != k && o.leading == e.leading {
                distinct.fail_with(format!("{label}: leading monomial {} repeated", e.leading));
            }
            if o.degree < e.degree && o.leading.divides(&e.leading) {
                distinct.fail_with(format!(
                    "{label}: {} divisible by lower leading monomial {}",
                    e.leading, o.leading
                ));
            }
        }

        if e.degree >= 2 {
            let top = e.chi.homogeneous_part(e.degree);
            chi_h_bounds.push((e.degree, index_in_degree - 1, h_upper_bound(&top, e.degree)));
        }
    }

    let big_d: u64 = nf.entries.iter().map(|e| e.degree as u64).sum();
    if nf.w_vars.len() as u64 > big_d {
        k_bound.fail_with(format!("K = {} exceeds D = {big_d}", nf.w_vars.len()));
    }

    NormalFormReport {
        shape,
        leading_distinct: distinct,
        chi_reduced: chi_ok,
        tail_reduced: tail_ok,
        k_bound,
        chi_h_bounds,
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EntryDoc {
    pub degree: u32,
    pub leading: Vec<u32>,
    pub c: String,
    pub chi: Vec<TermDoc>,
    pub tail: Vec<TermDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubstitutionDoc {
    pub var: usize,
    pub expr: Vec<TermDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NormalFormDoc {
    pub n: usize,
    pub variable_priority: Vec<usize>,
    pub w_vars: Vec<usize>,
    pub entries: Vec<EntryDoc>,
    pub substitutions: Vec<SubstitutionDoc>,
    pub system: SystemDoc,
}

impl NormalForm {
    pub fn to_doc(&self) -> NormalFormDoc {
        NormalFormDoc {
            n: self.n,
            variable_priority: self.order.priority().to_vec(),
            w_vars: self.w_vars.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| EntryDoc {
                    degree: e.degree,
                    leading: e.leading.exponents().to_vec(),
                    c: e.c.to_string(),
                    chi: poly_to_terms(&e.chi),
                    tail: poly_to_terms(&e.tail),
                })
                .collect(),
            substitutions: self
                .substitutions
                .iter()
                .map(|s| SubstitutionDoc {
                    var: s.var,
                    expr: poly_to_terms(&s.expr),
                })
                .collect(),
            system: system_to_doc(&self.base()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::rat;

    fn p(n: usize, t: &[(&[u32], i64)]) -> Polynomial {
        Polynomial::from_int_terms(n, t).unwrap()
    }

    fn solutions(s: &PolySystem, b: i64) -> BTreeSet<Vec<i64>> {
        let n = s.n();
        let mut out = BTreeSet::new();
        let mut x = vec![-b; n];
        loop {
            if s.is_solution(&x).unwrap() {
                out.insert(x.clone());
            }
            let mut i = 0;
            loop {
                if i == n {
                    return out;
                }
                if x[i] < b {
                    x[i] += 1;
                    break;
                }
                x[i] = -b;
                i += 1;
            }
        }
    }

    #[test]
    fn linear_pivot_and_substitution() {
        // x1 + x2 - 4, x1^2 + x2^2 - 8; priority x2 > x1 puts the pivot on x2
        let s = PolySystem::new(
            2,
            vec![
                p(2, &[(&[1, 0], 1), (&[0, 1], 1), (&[0, 0], -4)]),
                p(2, &[(&[2, 0], 1), (&[0, 2], 1), (&[0, 0], -8)]),
            ],
        )
        .unwrap();
        let ord = MonomialOrder::with_priority(vec![1, 0]).unwrap();
        let (nf, higher) = eliminate_linear(&s, &ord).unwrap();
        assert_eq!(nf.w_vars, vec![1]);
        let e = &nf.entries[0];
        assert_eq!(e.leading, Monomial::var(2, 1));
        assert_eq!(e.c, BigInt::from(1));
        assert_eq!(e.tail, p(2, &[(&[1, 0], 1), (&[0, 0], -4)]));
        // 2x1^2 - 8x1 + 8 is primitive as x1^2 - 4x1 + 4
        assert_eq!(higher.group(2)[0], p(2, &[(&[2, 0], 1), (&[1, 0], -4), (&[0, 0], 4)]));
        let full = reduce_to_normal_form(&s, &ord).unwrap();
        assert_eq!(solutions(&s, 10), solutions(&full.base(), 10));
        assert_eq!(solutions(&s, 10).into_iter().collect::<Vec<_>>(), vec![vec![2, 2]]);
    }

    #[test]
    fn linear_scaling() {
        let s = PolySystem::new(2, vec![p(2, &[(&[1, 0], 2), (&[0, 1], -2)])]).unwrap();
        let (nf, _) = eliminate_linear(&s, &MonomialOrder::grlex(2)).unwrap();
        let e = &nf.entries[0];
        assert_eq!(e.leading, Monomial::var(2, 0));
        assert_eq!(e.c, BigInt::from(1));
        assert_eq!(e.tail, p(2, &[(&[0, 1], -1)]));
        assert_eq!(nf.substitutions[0].expr, p(2, &[(&[0, 1], 1)]));
    }

    #[test]
    fn no_linear_is_identity() {
        let s = PolySystem::new(2, vec![p(2, &[(&[1, 1], 1), (&[0, 0], -1)])]).unwrap();
        let (nf, higher) = eliminate_linear(&s, &MonomialOrder::grlex(2)).unwrap();
        assert!(nf.entries.is_empty());
        assert_eq!(higher, s);
    }

    #[test]
    fn dependent_linear_forms_rejected() {
        let s = PolySystem::new(
            2,
            vec![
                p(2, &[(&[1, 0], 1), (&[0, 1], 1)]),
                p(2, &[(&[1, 0], 2), (&[0, 1], 2), (&[0, 0], 1)]),
            ],
        )
        .unwrap();
        assert!(matches!(
            eliminate_linear(&s, &MonomialOrder::grlex(2)),
            Err(Error::RankDeficient { degree: 1, rank: 1, expected: 2 })
        ));
    }

    #[test]
    fn single_quadratic() {
        let s = PolySystem::new(2, vec![p(2, &[(&[2, 0], 1), (&[0, 2], 1), (&[0, 0], -2)])]).unwrap();
        let nf = reduce_to_normal_form(&s, &MonomialOrder::grlex(2)).unwrap();
        let e = &nf.entries[0];
        assert_eq!(e.leading, Monomial::new(vec![2, 0]));
        assert_eq!(e.c, BigInt::from(1));
        assert!(e.chi.is_zero());
        assert_eq!(e.tail, p(2, &[(&[0, 2], 1), (&[0, 0], -2)]));
        assert!(verify_normal_form(&nf).all_hold());
    }

    #[test]
    fn two_quadratics_distinct_leads() {
        let s = PolySystem::new(
            2,
            vec![
                p(2, &[(&[1, 1], 1), (&[0, 0], -1)]),
                p(2, &[(&[2, 0], 1), (&[0, 1], 1), (&[0, 0], -3)]),
            ],
        )
        .unwrap();
        let nf = reduce_to_normal_form(&s, &MonomialOrder::grlex(2)).unwrap();
        let leads: Vec<_> = nf.entries.iter().map(|e| e.leading.clone()).collect();
        assert_eq!(leads, vec![Monomial::new(vec![2, 0]), Monomial::new(vec![1, 1])]);
        let r = verify_normal_form(&nf);
        assert!(r.all_hold(), "{r:?}");
        assert_eq!(solutions(&s, 6), solutions(&nf.base(), 6));
    }

    #[test]
    fn cubic_reduced_against_quadratic() {
        // x1^2 - x2, x1^3 + x2^2 x3 - 1: x1^3 = x1 * x1^2 reduces to x1 x2
        let s = PolySystem::new(
            3,
            vec![
                p(3, &[(&[2, 0, 0], 1), (&[0, 1, 0], -1)]),
                p(3, &[(&[3, 0, 0], 1), (&[0, 2, 1], 1), (&[0, 0, 0], -1)]),
            ],
        )
        .unwrap();
        let nf = reduce_to_normal_form(&s, &MonomialOrder::grlex(3)).unwrap();
        let r = verify_normal_form(&nf);
        assert!(r.all_hold(), "{r:?}");
        let cubic = nf.entries_of_degree(3).next().unwrap();
        assert_eq!(cubic.leading, Monomial::new(vec![0, 2, 1]));
        assert_eq!(cubic.chi, p(3, &[(&[1, 1, 0], 1)]));
        assert_eq!(cubic.tail, p(3, &[(&[0, 0, 0], -1)]));
        assert_eq!(solutions(&s, 6), solutions(&nf.base(), 6));
        assert_eq!(nf.w_vars, vec![0, 1, 2]);
    }

    #[test]
    fn idempotent() {
        let s = PolySystem::new(
            3,
            vec![
                p(3, &[(&[1, 0, 0], 2), (&[0, 1, 0], 1), (&[0, 0, 1], -3)]),
                p(3, &[(&[0, 2, 0], 1), (&[0, 1, 1], 3), (&[0, 0, 0], 1)]),
            ],
        )
        .unwrap();
        let ord = MonomialOrder::grlex(3);
        let nf = reduce_to_normal_form(&s, &ord).unwrap();
        let again = reduce_to_normal_form(&nf.base(), &ord).unwrap();
        assert_eq!(again.base(), nf.base());
        assert_eq!(again.w_vars, nf.w_vars);
    }

    #[test]
    fn corrupted_chi_is_caught() {
        let s = PolySystem::new(2, vec![p(2, &[(&[2, 0], 1), (&[0, 2], 1), (&[0, 0], -2)])]).unwrap();
        let mut nf = reduce_to_normal_form(&s, &MonomialOrder::grlex(2)).unwrap();
        nf.entries[0].chi.add_term(Monomial::new(vec![2, 0]), rat(1));
        let r = verify_normal_form(&nf);
        assert!(!r.chi_reduced.holds);
        assert!(r.chi_reduced.witness.unwrap().contains("x1^2"));
    }

    #[test]
    fn empty_system_passes() {
        let nf = reduce_to_normal_form(&PolySystem::empty(3), &MonomialOrder::grlex(3)).unwrap();
        assert!(verify_normal_form(&nf).all_hold());
        assert!(nf.base().is_empty());
    }

    #[test]
    fn substitution_map_recovers_solutions() {
        let s = PolySystem::new(
            3,
            vec![
                p(3, &[(&[1, 0, 0], 2), (&[0, 1, 0], 2), (&[0, 0, 1], -1)]),
                p(3, &[(&[0, 2, 0], 1), (&[0, 0, 1], -4)]),
            ],
        )
        .unwrap();
        let nf = reduce_to_normal_form(&s, &MonomialOrder::grlex(3)).unwrap();
        let higher = nf.higher();
        let mut mapped = BTreeSet::new();
        for y in solutions(&higher, 6) {
            if let Some(x) = nf.apply_substitutions(&y).unwrap() {
                if x.iter().all(|v| v.abs() <= 6) {
                    mapped.insert(x);
                }
            }
        }
        assert_eq!(mapped, solutions(&s, 6));
    }
}
