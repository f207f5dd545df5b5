//! Birch rank and h-invariant estimates, Schmidt's ρ thresholds, and an
//! empirical regularity fit.

use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compiled::CompiledPoly;
use crate::counting::integer_count;
use crate::error::{Error, Result};
use crate::linalg::{rank_mod_p, rref};
use crate::polysys::{Monomial, PolySystem, Polynomial};

/// Default work allowance for point counting (Jacobian evaluations).
pub const DEFAULT_RANK_BUDGET: f64 = 5e8;

/// Primes used for the point-count dimension fit when none are given.
pub const DEFAULT_PRIMES: [u64; 3] = [97, 101, 103];

/// `ρ_{d,ℓ}(t) = d · 2^{4ℓ} · ℓ! · t²`.
pub fn rho(d: u32, l: u32, t: u64) -> Result<u128> {
    if l < 2 || l > d {
        return Err(Error::Validation(format!(
            "rho needs 2 <= l <= d, got d = {d}, l = {l}"
        )));
    }
    let overflow = || Error::Overflow(format!("evaluating rho({d}, {l}, {t})"));
    let fact = (1..=l as u128).try_fold(1u128, |a, k| a.checked_mul(k)).ok_or_else(overflow)?;
    let pow = 1u128.checked_shl(4 * l).filter(|_| 4 * l < 128).ok_or_else(overflow)?;
    let t2 = (t as u128).checked_mul(t as u128).ok_or_else(overflow)?;
    (d as u128)
        .checked_mul(pow)
        .and_then(|v| v.checked_mul(fact))
        .and_then(|v| v.checked_mul(t2))
        .ok_or_else(overflow)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankMethod {
    /// Exact search over flats of the coefficient matrix (linear forms).
    Combinatorial,
    /// Recognized closed-form case (empty list, single diagonal form).
    SymbolicTrivial,
    /// Point counts of the singular locus over finite fields.
    FiniteFieldPointCount,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Confidence {
    Exact,
    Heuristic,
    Low,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankEstimate {
    /// `None` encodes `+∞` (no forms).
    pub value: Option<usize>,
    pub method: RankMethod,
    pub primes_used: Vec<u64>,
    /// Per-prime `|V*(F_p)|` when point counting was used.
    pub point_counts: Vec<u64>,
    pub confidence: Confidence,
}

impl RankEstimate {
    fn exact(value: Option<usize>, method: RankMethod) -> Self {
        RankEstimate {
            value,
            method,
            primes_used: Vec::new(),
            point_counts: Vec::new(),
            confidence: Confidence::Exact,
        }
    }
}

/// Estimates the Birch rank of a list of forms of one degree.
pub fn birch_rank_estimate(forms: &[Polynomial], primes: &[u64], budget: f64) -> Result<RankEstimate> {
    if forms.is_empty() {
        return Ok(RankEstimate::exact(None, RankMethod::SymbolicTrivial));
    }
    let n = forms[0].n();
    let l = forms[0].degree().unwrap_or(0);
    for f in forms {
        if !f.is_homogeneous() || f.degree() != Some(l) || f.n() != n {
            return Err(Error::Validation(format!(
                "Birch rank needs forms of one degree in {n} variables; got {f}"
            )));
        }
    }
    if l == 1 {
        return Ok(RankEstimate::exact(
            Some(linear_birch_rank(forms, budget)?),
            RankMethod::Combinatorial,
        ));
    }
    if forms.len() == 1 && forms[0].terms().all(|(m, _)| m.support().count() == 1) {
        return Ok(RankEstimate::exact(
            Some(forms[0].variables().len()),
            RankMethod::SymbolicTrivial,
        ));
    }
    point_count_rank(forms, primes, budget)
}

/// `B₁`: minimum number of nonzero coefficients over nontrivial rational
/// combinations of the forms. Zero if the forms are dependent.
pub fn linear_birch_rank(forms: &[Polynomial], budget: f64) -> Result<usize> {
    let n = forms[0].n();
    let r = forms.len();
    let a: Vec<Vec<BigRational>> = forms
        .iter()
        .map(|f| (0..n).map(|i| f.coeff(&Monomial::var(n, i))).collect())
        .collect();
    if rref(&a).rank() < r {
        return Ok(0);
    }
    let cols: Vec<Vec<BigRational>> = (0..n).map(|j| a.iter().map(|row| row[j].clone()).collect()).collect();
    // A nonzero combination vanishes exactly on the columns of some flat of
    // rank r-1; the largest such flat gives the minimum weight.
    let k = r - 1;
    let subsets = binomial(n, k);
    if subsets * (n * r * r) as f64 > budget {
        return Err(Error::budget("linear Birch rank search", subsets * (n * r * r) as f64, budget));
    }
    let mut best = 0usize;
    for_each_subset(n, k, &mut |idx: &[usize]| {
        let base: Vec<Vec<BigRational>> = idx.iter().map(|&j| cols[j].clone()).collect();
        if rref(&base).rank() < k {
            return;
        }
        let closure = (0..n)
            .filter(|&j| {
                let mut m = base.clone();
                m.push(cols[j].clone());
                rref(&m).rank() == k
            })
            .count();
        best = best.max(closure);
    });
    Ok(n - best)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn for_each_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for j in start..n {
            if n - j < k - cur.len() {
                break;
            }
            cur.push(j);
            rec(j + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Counts `x ∈ F_p^k` (involved variables only) where the Jacobian has rank
/// `< r`, then converts each count to a dimension and rounds the average.
fn point_count_rank(forms: &[Polynomial], primes: &[u64], budget: f64) -> Result<RankEstimate> {
    let n = forms[0].n();
    let r = forms.len();
    let mut involved: Vec<usize> = forms.iter().flat_map(|f| f.variables()).collect();
    involved.sort_unstable();
    involved.dedup();
    let k = involved.len();
    let primes: Vec<u64> = if primes.is_empty() {
        DEFAULT_PRIMES.to_vec()
    } else {
        primes.to_vec()
    };
    let cost: f64 = primes
        .iter()
        .map(|&p| (p as f64).powi(k as i32) * (r * k) as f64)
        .sum();
    if cost > budget {
        return Err(Error::budget("singular locus point count", cost, budget));
    }
    // Jacobian restricted to the involved variables, relabelled 0..k
    let mut jac: Vec<Vec<CompiledPoly>> = Vec::with_capacity(r);
    for f in forms {
        let restricted = restrict_to(f, &involved);
        let row = (0..k)
            .map(|i| CompiledPoly::new(&restricted.derivative(i)))
            .collect::<Result<Vec<_>>>()?;
        jac.push(row);
    }

    let mut counts = Vec::with_capacity(primes.len());
    let mut dims = Vec::with_capacity(primes.len());
    for &p in &primes {
        let total = (p as u128).pow(k as u32) as u64;
        let count: u64 = (0..p)
            .into_par_iter()
            .map(|first| {
                let inner = total / p;
                let mut x = vec![0u64; k];
                let mut c = 0u64;
                for idx in 0..inner {
                    x[0] = first;
                    let mut rem = idx;
                    for xi in x.iter_mut().skip(1) {
                        *xi = rem % p;
                        rem /= p;
                    }
                    let m: Vec<Vec<i128>> = jac
                        .iter()
                        .map(|row| row.iter().map(|g| g.eval_mod(&x, p) as i128).collect())
                        .collect();
                    if rank_mod_p(&m, p) < r {
                        c += 1;
                    }
                }
                c
            })
            .sum();
        counts.push(count);
        dims.push((count as f64).ln() / (p as f64).ln());
    }
    let mean = dims.iter().sum::<f64>() / dims.len() as f64;
    let dim = mean.round().clamp(0.0, k as f64) as usize;
    let consistent = dims.iter().all(|d| d.round() as usize == dim);
    let confidence = if consistent && primes.iter().all(|&p| p >= 50) {
        Confidence::Heuristic
    } else {
        Confidence::Low
    };
    // variables outside the forms are free in V*, adding n-k to its dimension
    let codim = k - dim;
    debug_assert!(codim <= n);
    Ok(RankEstimate {
        value: Some(codim),
        method: RankMethod::FiniteFieldPointCount,
        primes_used: primes,
        point_counts: counts,
        confidence,
    })
}

/// Keeps only the variables in `vars`, renumbered `0..vars.len()`.
fn restrict_to(p: &Polynomial, vars: &[usize]) -> Polynomial {
    let k = vars.len();
    let mut out = Polynomial::zero(k);
    for (m, c) in p.terms() {
        let e = m.exponents();
        if (0..e.len()).any(|i| e[i] > 0 && !vars.contains(&i)) {
            continue;
        }
        out.add_term(Monomial::new(vars.iter().map(|&v| e[v]).collect()), c.clone());
    }
    out
}

/// Explicit decomposition `G = Σ x_v · cofactor_v` certifying an h bound.
#[derive(Clone, Debug)]
pub struct HDecomposition {
    pub products: Vec<(usize, Polynomial)>,
}

impl HDecomposition {
    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub fn expand(&self, n: usize) -> Polynomial {
        self.products.iter().fold(Polynomial::zero(n), |acc, (v, cof)| {
            &acc + &(&Polynomial::var(n, *v) * cof)
        })
    }
}

/// Smaller of two greedy groupings: by each monomial's lex-least variable,
/// and by repeatedly taking the variable that divides the most remaining
/// monomials.
pub fn h_decomposition(form: &Polynomial) -> HDecomposition {
    let n = form.n();
    let group = |assign: &dyn Fn(&Monomial) -> usize| {
        let mut cof: Vec<Polynomial> = vec![Polynomial::zero(n); n];
        for (m, c) in form.terms() {
            let v = assign(m);
            let q = Monomial::var(n, v).quotient_of(m).expect("v divides m");
            cof[v].add_term(q, c.clone());
        }
        cof.into_iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .collect::<Vec<_>>()
    };
    let lex = group(&|m: &Monomial| m.support().next().expect("nonconstant monomial"));

    let mut remaining: Vec<Monomial> = form.terms().map(|(m, _)| m.clone()).collect();
    let mut chosen: Vec<usize> = Vec::new();
    while !remaining.is_empty() {
        let best = (0..n)
            .max_by_key(|&v| (remaining.iter().filter(|m| m.exponents()[v] > 0).count(), std::cmp::Reverse(v)))
            .expect("n > 0");
        chosen.push(best);
        remaining.retain(|m| m.exponents()[best] == 0);
    }
    let cover = group(&|m: &Monomial| {
        *chosen
            .iter()
            .find(|&&v| m.exponents()[v] > 0)
            .expect("cover includes every monomial")
    });
    let products = if cover.len() < lex.len() { cover } else { lex };
    HDecomposition { products }
}

/// Certified upper bound on the h-invariant of a form of degree `ℓ ≥ 2`.
pub fn h_upper_bound(form: &Polynomial, _l: u32) -> u64 {
    if form.is_zero() {
        return 0;
    }
    h_decomposition(form).len() as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Satisfied,
    NotVerifiable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegreeThreshold {
    pub degree: u32,
    pub required: u128,
    /// `2^{1−ℓ}·B̂_ℓ`, `None` for `+∞`.
    pub achieved_lower_bound: Option<f64>,
    pub confidence: Confidence,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularityVerdict {
    pub thresholds: Vec<DegreeThreshold>,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

/// Compares `2^{1−ℓ}·B̂_ℓ` with `ρ_{d,ℓ}(R − r₁) + r₁` for every degree
/// `ℓ ≥ 2`. The criterion is sufficient only, so failing it never means
/// the system is irregular.
pub fn regularity_verdict(s: &PolySystem, estimates: &[(u32, RankEstimate)]) -> Result<RegularityVerdict> {
    let d = s.d();
    let r1 = s.r(1) as u64;
    let big_r = s.big_r() as u64;
    let mut reasons = Vec::new();
    let mut ok = true;

    if r1 > 0 {
        let lin: Vec<Polynomial> = s.group(1).iter().map(|p| p.homogeneous_part(1)).collect();
        if linear_birch_rank(&lin, f64::INFINITY)? == 0 {
            ok = false;
            reasons.push("linear forms are linearly dependent".into());
        }
        if s.group(1).iter().any(|p| !p.homogeneous_part(0).is_zero()) {
            reasons.push("linear equations have constant terms; thresholds use their linear forms".into());
        }
    }
    if d < 2 {
        reasons.push("no equations of degree two or more; nothing to threshold".into());
    }

    let mut thresholds = Vec::new();
    for l in 2..=d {
        if s.r(l) == 0 {
            continue;
        }
        let est = estimates
            .iter()
            .find(|(k, _)| *k == l)
            .map(|(_, e)| e)
            .ok_or_else(|| Error::Validation(format!("no Birch rank estimate supplied for degree {l}")))?;
        let required = rho(d, l, big_r - r1)? + r1 as u128;
        let achieved = est.value.map(|b| b as f64 * 2f64.powi(1 - l as i32));
        let meets = achieved.map_or(true, |a| a >= required as f64);
        if !meets {
            ok = false;
            reasons.push(format!(
                "degree {l}: 2^(1-{l})·B = {} below threshold {required}",
                achieved.unwrap_or(f64::INFINITY)
            ));
        }
        if est.confidence != Confidence::Exact {
            reasons.push(format!("degree {l}: Birch rank is a point-count estimate"));
        }
        thresholds.push(DegreeThreshold {
            degree: l,
            required,
            achieved_lower_bound: achieved,
            confidence: est.confidence,
        });
    }
    Ok(RegularityVerdict {
        thresholds,
        verdict: if ok { Verdict::Satisfied } else { Verdict::NotVerifiable },
        reasons,
    })
}

/// Estimates for every degree present, as consumed by [`regularity_verdict`].
pub fn estimate_all(s: &PolySystem, primes: &[u64], budget: f64) -> Result<Vec<(u32, RankEstimate)>> {
    s.groups()
        .filter(|(l, _)| *l >= 1)
        .map(|(l, g)| {
            let forms: Vec<Polynomial> = g.iter().map(|p| p.homogeneous_part(l)).collect();
            Ok((l, birch_rank_estimate(&forms, primes, budget)?))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmpiricalFit {
    pub xs: Vec<u64>,
    pub counts: Vec<u64>,
    /// `None` when fewer than two positive counts exist.
    pub slope: Option<f64>,
    pub expected: i64,
}

/// Least-squares slope of `log |V ∩ [−X, X]^n|` against `log X`.
pub fn empirical_regularity(s: &PolySystem, xs: &[u64], budget: f64) -> Result<EmpiricalFit> {
    let counts = xs
        .iter()
        .map(|&x| integer_count(s, x, budget))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&x, &c)| ((x as f64).ln(), (c as f64).ln()))
        .collect();
    Ok(EmpiricalFit {
        xs: xs.to_vec(),
        counts,
        slope: least_squares_slope(&pts),
        expected: s.n() as i64 - s.big_d() as i64,
    })
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: usize, t: &[(&[u32], i64)]) -> Polynomial {
        Polynomial::from_int_terms(n, t).unwrap()
    }

    #[test]
    fn rho_values() {
        assert_eq!(rho(2, 2, 1).unwrap(), 1024);
        assert_eq!(rho(3, 2, 2).unwrap(), 6144);
        assert_eq!(rho(5, 3, 0).unwrap(), 0);
        assert!(rho(2, 3, 1).is_err());
        assert!(rho(2, 1, 1).is_err());
        for t in 1..50 {
            assert!(rho(4, 3, t + 1).unwrap() > rho(4, 3, t).unwrap());
        }
    }

    #[test]
    fn diagonal_quadratic_rank() {
        let f = p(3, &[(&[2, 0, 0], 1), (&[0, 2, 0], 1), (&[0, 0, 2], 1)]);
        let e = birch_rank_estimate(&[f.clone()], &[], DEFAULT_RANK_BUDGET).unwrap();
        assert_eq!(e.value, Some(3));
        assert_eq!(e.confidence, Confidence::Exact);
        // point counting over F_101, F_103 finds only the origin
        let pc = point_count_rank(&[f], &[101, 103], DEFAULT_RANK_BUDGET).unwrap();
        assert_eq!(pc.value, Some(3));
        assert_eq!(pc.point_counts, vec![1, 1]);
    }

    #[test]
    fn degenerate_quadratic_rank() {
        // x1*x2 in three variables: singular locus is the x3 axis, codim 2
        let f = p(3, &[(&[1, 1, 0], 1)]);
        let e = birch_rank_estimate(&[f], &[], DEFAULT_RANK_BUDGET).unwrap();
        assert_eq!(e.value, Some(2));
        assert_eq!(e.method, RankMethod::FiniteFieldPointCount);
        assert_eq!(e.point_counts, vec![1, 1, 1]);
    }

    #[test]
    fn empty_is_infinite() {
        let e = birch_rank_estimate(&[], &[], DEFAULT_RANK_BUDGET).unwrap();
        assert_eq!(e.value, None);
    }

    #[test]
    fn linear_rank_examples() {
        let a = p(3, &[(&[1, 0, 0], 1), (&[0, 1, 0], 1)]);
        let b = p(3, &[(&[0, 1, 0], 1), (&[0, 0, 1], 1)]);
        assert_eq!(linear_birch_rank(&[a.clone(), b.clone()], 1e9).unwrap(), 2);
        assert_eq!(linear_birch_rank(&[a.clone()], 1e9).unwrap(), 2);
        assert_eq!(linear_birch_rank(&[a.clone(), a.scale(&crate::polysys::rat(3))], 1e9).unwrap(), 0);
        // x1+x2+x3, x1-x2: x1+x2+x3 - (x1-x2)... min weight is 2 (x1 - x2)
        let c = p(3, &[(&[1, 0, 0], 1), (&[0, 1, 0], 1), (&[0, 0, 1], 1)]);
        let d = p(3, &[(&[1, 0, 0], 1), (&[0, 1, 0], -1)]);
        assert_eq!(linear_birch_rank(&[c, d], 1e9).unwrap(), 2);
    }

    #[test]
    fn h_bounds() {
        assert_eq!(h_upper_bound(&p(3, &[(&[1, 1, 0], 1), (&[1, 0, 1], 1)]), 2), 1);
        assert_eq!(h_upper_bound(&p(4, &[(&[1, 1, 0, 0], 1), (&[0, 0, 1, 1], 1)]), 2), 2);
        assert_eq!(h_upper_bound(&p(2, &[(&[2, 0], 1), (&[0, 2], 1)]), 2), 2);
        // x2*x1 + x2*x3 + x2*x4: lex grouping gives 2, covering by x2 gives 1
        let f = p(4, &[(&[1, 1, 0, 0], 1), (&[0, 1, 1, 0], 1), (&[0, 1, 0, 1], 1)]);
        assert_eq!(h_upper_bound(&f, 2), 1);
        let dec = h_decomposition(&f);
        assert_eq!(dec.expand(4), f);
    }

    #[test]
    fn verdicts() {
        let diag = |n: usize| {
            let terms: Vec<(Vec<u32>, BigRational)> = (0..n)
                .map(|i| {
                    let mut e = vec![0; n];
                    e[i] = 2;
                    (e, crate::polysys::rat(1))
                })
                .collect();
            PolySystem::new(n, vec![Polynomial::from_terms(n, terms).unwrap()]).unwrap()
        };
        for (n, expect) in [(3, Verdict::NotVerifiable), (200, Verdict::NotVerifiable), (2048, Verdict::Satisfied)] {
            let s = diag(n);
            let est = estimate_all(&s, &[], DEFAULT_RANK_BUDGET).unwrap();
            let v = regularity_verdict(&s, &est).unwrap();
            assert_eq!(v.verdict, expect, "n = {n}");
            assert_eq!(v.thresholds[0].required, 1024);
        }
        let dep = PolySystem::new(
            2,
            vec![
                p(2, &[(&[1, 0], 1), (&[0, 1], 1)]),
                p(2, &[(&[1, 0], 2), (&[0, 1], 2), (&[0, 0], 1)]),
            ],
        )
        .unwrap();
        let est = estimate_all(&dep, &[], DEFAULT_RANK_BUDGET).unwrap();
        let v = regularity_verdict(&dep, &est).unwrap();
        assert_eq!(v.verdict, Verdict::NotVerifiable);
        assert!(v.reasons.iter().any(|r| r.contains("dependent")));
    }

    #[test]
    fn empirical_slopes() {
        let s = PolySystem::new(3, vec![p(3, &[(&[1, 0, 0], 1), (&[0, 1, 0], 1), (&[0, 0, 1], -1)])]).unwrap();
        let fit = empirical_regularity(&s, &[20, 40, 80], 1e9).unwrap();
        assert!((fit.slope.unwrap() - 2.0).abs() < 0.15, "{fit:?}");
        assert_eq!(fit.expected, 2);

        let s = PolySystem::new(2, vec![p(2, &[(&[2, 0], 1), (&[0, 2], 1)])]).unwrap();
        let fit = empirical_regularity(&s, &[20, 40, 80], 1e9).unwrap();
        assert!(fit.slope.unwrap().abs() < 0.2);
        assert_eq!(fit.counts, vec![1, 1, 1]);

        let s = PolySystem::new(2, vec![p(2, &[(&[0, 0], 1)])]).unwrap();
        let fit = empirical_regularity(&s, &[5, 10, 20], 1e9).unwrap();
        assert_eq!(fit.slope, None);
    }
}
