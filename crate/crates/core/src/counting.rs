//! Weighted counts of solutions in boxes, and unit solutions modulo `p^t`.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{NeumaierSum, PrimeTable};
use crate::compiled::{compile_all, CompiledPoly};
use crate::error::{Error, Result};
use crate::polysys::PolySystem;
use crate::residue::{self, find_pivots, involved_vars, NuMethod};

/// Default cap on enumerated points.
pub const DEFAULT_COUNT_BUDGET: f64 = 5e9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weight {
    /// `Λ(x_1)⋯Λ(x_n)`.
    Mangoldt,
    /// `log x_1 ⋯ log x_n` on primes.
    PrimeLog,
    /// Plain indicator.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxKind {
    /// `[0, X]^n`.
    Positive,
    /// `[−X, X]^n`; arithmetic weights are applied to `|x_i|`.
    Symmetric,
}

#[derive(Clone, Debug, Serialize)]
pub struct CountResult {
    pub x: u64,
    pub weight: Weight,
    pub weighted_sum: f64,
    /// Solutions with every coordinate in the support of the weight.
    pub raw_solutions: u64,
    pub enumeration_strategy: String,
    pub wall_time: f64,
}

/// Integers of the box carrying nonzero weight, with their weights.
struct Domain {
    lo: i64,
    hi: i64,
    /// `weight[x − lo]`, zero off the support.
    weight: Vec<f64>,
    support: Vec<i64>,
}

impl Domain {
    fn new(x: u64, weight: Weight, kind: BoxKind, table: Option<&PrimeTable>) -> Result<Self> {
        let xi = i64::try_from(x).map_err(|_| Error::Validation(format!("X = {x} is too large")))?;
        let lo = match kind {
            BoxKind::Positive => 0,
            BoxKind::Symmetric => -xi,
        };
        let len = (xi - lo + 1) as u64;
        if len > crate::arith::MAX_TABLE {
            return Err(Error::budget("box side", len as f64, crate::arith::MAX_TABLE as f64));
        }
        let owned;
        let table = match (weight, table) {
            (Weight::None, _) => None,
            (_, Some(t)) if t.limit() >= x => Some(t),
            _ => {
                owned = PrimeTable::new(x)?;
                Some(&owned)
            }
        };
        let mut w = vec![0.0; len as usize];
        for v in lo..=xi {
            let a = v.unsigned_abs();
            w[(v - lo) as usize] = match weight {
                Weight::None => 1.0,
                Weight::Mangoldt => table.expect("table").von_mangoldt(a),
                Weight::PrimeLog => {
                    if table.expect("table").is_prime(a) {
                        (a as f64).ln()
                    } else {
                        0.0
                    }
                }
            };
        }
        let support = (lo..=xi).filter(|&v| w[(v - lo) as usize] != 0.0).collect();
        Ok(Domain { lo, hi: xi, weight: w, support })
    }

    fn weight_of(&self, v: i128) -> f64 {
        if v < self.lo as i128 || v > self.hi as i128 {
            0.0
        } else {
            self.weight[(v - self.lo as i128) as usize]
        }
    }
}

struct Plan {
    polys: Vec<CompiledPoly>,
    /// `(equation, variable, coefficient)` of the solved variable.
    pivot: Option<(usize, usize, i128)>,
    enum_vars: Vec<usize>,
    involved: Vec<usize>,
    free: usize,
    inconsistent: bool,
}

fn plan(s: &PolySystem) -> Result<Plan> {
    let polys = compile_all(s.polys())?;
    let inconsistent = polys.iter().any(|p| p.variables().is_empty() && p.terms.iter().any(|t| t.coeff != 0));
    let involved = involved_vars(&polys);
    let pivot = find_pivots(&polys, None)
        .into_iter()
        .min_by_key(|p| (p.coeff.unsigned_abs(), p.eq, p.var))
        .map(|p| (p.eq, p.var, p.coeff));
    let enum_vars = involved
        .iter()
        .copied()
        .filter(|&v| pivot.map_or(true, |p| p.1 != v))
        .collect();
    Ok(Plan {
        free: s.n() - involved.len(),
        polys,
        pivot,
        enum_vars,
        involved,
        inconsistent,
    })
}

/// Sums the weights of all solutions in the domain box.
fn count_in(s: &PolySystem, dom: &Domain, budget: f64) -> Result<(f64, u64, String)> {
    let n = s.n();
    let pl = plan(s)?;
    if pl.inconsistent {
        return Ok((0.0, 0, "inconsistent".into()));
    }
    let support_sum: f64 = {
        let mut acc = NeumaierSum::default();
        for &v in &dom.support {
            acc.add(dom.weight_of(v as i128));
        }
        acc.value()
    };
    let free_weight = support_sum.powi(pl.free as i32);
    let free_raw = (0..pl.free)
        .try_fold(1u64, |a, _| a.checked_mul(dom.support.len() as u64))
        .ok_or_else(|| Error::Overflow("counting free coordinates".into()))?;
    let k = pl.enum_vars.len();
    let cost = (dom.support.len() as f64).powi(k as i32) * pl.polys.len().max(1) as f64;
    if cost > budget {
        return Err(Error::budget("enumerating the box", cost, budget));
    }
    let strategy = match pl.pivot {
        Some((_, v, _)) => format!(
            "enumerate {} of {} involved variables over the weight support, solve x{} linearly",
            k,
            pl.involved.len(),
            v + 1
        ),
        None => format!("enumerate {} involved variables over the weight support", k),
    };
    if pl.involved.is_empty() {
        return Ok((free_weight, free_raw, strategy));
    }

    let supp = &dom.support;
    let chunk = |first: usize| -> Result<(NeumaierSum, u64)> {
        let mut x = vec![0i64; n];
        let mut sum = NeumaierSum::default();
        let mut raw = 0u64;
        let mut idx = vec![0usize; k];
        if k > 0 {
            idx[0] = first;
        }
        loop {
            let mut w = 1.0;
            for (j, &v) in pl.enum_vars.iter().enumerate() {
                x[v] = supp[idx[j]];
                w *= dom.weight_of(supp[idx[j]] as i128);
            }
            let mut ok = true;
            if let Some((eq, v, a)) = pl.pivot {
                x[v] = 0;
                let g = pl.polys[eq]
                    .eval_i128(&x)
                    .ok_or_else(|| Error::Overflow("evaluating in i128".into()))?;
                if g % a != 0 {
                    ok = false;
                } else {
                    let xv = -g / a;
                    let wv = dom.weight_of(xv);
                    if wv == 0.0 {
                        ok = false;
                    } else {
                        x[v] = xv as i64;
                        w *= wv;
                    }
                }
            }
            if ok {
                for (i, p) in pl.polys.iter().enumerate() {
                    if pl.pivot.map_or(false, |pv| pv.0 == i) {
                        continue;
                    }
                    let val = p.eval_i128(&x).ok_or_else(|| Error::Overflow("evaluating in i128".into()))?;
                    if val != 0 {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                sum.add(w);
                raw += 1;
            }
            // advance all but the first coordinate
            let mut i = 1;
            loop {
                if i >= k {
                    return Ok((sum, raw));
                }
                idx[i] += 1;
                if idx[i] < supp.len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
    };
    let firsts = if k == 0 { 1 } else { supp.len() };
    let parts: Vec<(NeumaierSum, u64)> = (0..firsts).into_par_iter().map(chunk).collect::<Result<_>>()?;
    let mut total = NeumaierSum::default();
    let mut raw = 0u64;
    for (s, r) in &parts {
        total.merge(s);
        raw += r;
    }
    let raw = raw
        .checked_mul(free_raw)
        .ok_or_else(|| Error::Overflow("counting solutions".into()))?;
    Ok((total.value() * free_weight, raw, strategy))
}

/// Weighted count over a box, reusing `table` when it covers `X`.
pub fn weighted_count_with(
    s: &PolySystem,
    x: u64,
    weight: Weight,
    kind: BoxKind,
    table: Option<&PrimeTable>,
    budget: f64,
) -> Result<CountResult> {
    let start = Instant::now();
    let dom = Domain::new(x, weight, kind, table)?;
    let (sum, raw, strategy) = count_in(s, &dom, budget)?;
    Ok(CountResult {
        x,
        weight,
        weighted_sum: sum,
        raw_solutions: raw,
        enumeration_strategy: strategy,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// `M_f(X) = Σ_{x ∈ [0,X]^n, f(x)=0} Λ(x_1)⋯Λ(x_n)`.
pub fn weighted_count(s: &PolySystem, x: u64, budget: f64) -> Result<CountResult> {
    weighted_count_with(s, x, Weight::Mangoldt, BoxKind::Positive, None, budget)
}

/// `M'_f(X)`: the same sum restricted to primes with weights `log p`.
pub fn prime_log_count(s: &PolySystem, x: u64, budget: f64) -> Result<CountResult> {
    weighted_count_with(s, x, Weight::PrimeLog, BoxKind::Positive, None, budget)
}

/// Number of integer solutions in `[−X, X]^n`.
pub fn integer_count(s: &PolySystem, x: u64, budget: f64) -> Result<u64> {
    let dom = Domain::new(x, Weight::None, BoxKind::Symmetric, None)?;
    Ok(count_in(s, &dom, budget)?.1)
}

/// `ν_t(p) = #{x ∈ (𝕌_{p^t})^n : f(x) ≡ 0 (mod p^t)}`.
pub fn nu_t(s: &PolySystem, p: u64, t: u32, method: NuMethod, budget: f64) -> Result<u64> {
    let q = p
        .checked_pow(t)
        .ok_or_else(|| Error::Overflow(format!("{p}^{t}")))?;
    residue::count_unit_solutions(s, q, method, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::Polynomial;

    fn p(n: usize, t: &[(&[u32], i64)]) -> Polynomial {
        Polynomial::from_int_terms(n, t).unwrap()
    }

    fn brute(s: &PolySystem, x: u64, weight: Weight) -> f64 {
        let t = PrimeTable::new(x).unwrap();
        let n = s.n();
        let mut pt = vec![0i64; n];
        let mut total = 0.0;
        loop {
            if s.is_solution(&pt).unwrap() {
                total += pt
                    .iter()
                    .map(|&v| match weight {
                        Weight::Mangoldt => t.von_mangoldt(v as u64),
                        Weight::PrimeLog => {
                            if t.is_prime(v as u64) {
                                (v as f64).ln()
                            } else {
                                0.0
                            }
                        }
                        Weight::None => 1.0,
                    })
                    .product::<f64>();
            }
            let mut i = 0;
            loop {
                if i == n {
                    return total;
                }
                pt[i] += 1;
                if pt[i] as u64 <= x {
                    break;
                }
                pt[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn matches_brute_force() {
        let systems = vec![
            PolySystem::new(3, vec![p(3, &[(&[1, 0, 0], 1), (&[0, 1, 0], 1), (&[0, 0, 1], 1), (&[0, 0, 0], -31)])]).unwrap(),
            PolySystem::new(2, vec![p(2, &[(&[2, 0], 1), (&[0, 1], -1), (&[0, 0], 2)])]).unwrap(),
            PolySystem::new(2, vec![p(2, &[(&[1, 1], 1), (&[0, 0], -15)])]).unwrap(),
            PolySystem::new(3, vec![p(3, &[(&[1, 0, 0], 2), (&[0, 1, 0], -1), (&[0, 0, 1], -1)])]).unwrap(),
        ];
        for s in &systems {
            for w in [Weight::Mangoldt, Weight::PrimeLog, Weight::None] {
                let fast = weighted_count_with(s, 40, w, BoxKind::Positive, None, 1e9).unwrap();
                let slow = brute(s, 40, w);
                assert!((fast.weighted_sum - slow).abs() < 1e-9 * slow.max(1.0), "{s:?} {w:?}");
            }
        }
    }

    #[test]
    fn free_variables_factor_out() {
        // n = 1 with no equation: M_f(X) = ψ(X)
        let s = PolySystem::empty(1);
        let r = weighted_count(&s, 10, 1e9).unwrap();
        let psi10 = 3.0 * 2f64.ln() + 2.0 * 3f64.ln() + 5f64.ln() + 7f64.ln();
        assert!((r.weighted_sum - psi10).abs() < 1e-12);
        assert_eq!(r.raw_solutions, 7);
    }

    #[test]
    fn small_binary_example() {
        let s = PolySystem::new(2, vec![p(2, &[(&[1, 0], 1), (&[0, 1], 1), (&[0, 0], -10)])]).unwrap();
        let r = prime_log_count(&s, 10, 1e9).unwrap();
        let want = 2.0 * 3f64.ln() * 7f64.ln() + 5f64.ln().powi(2);
        assert!((r.weighted_sum - want).abs() < 1e-12);
        assert_eq!(r.raw_solutions, 3);
    }

    #[test]
    fn inconsistent_and_symmetric() {
        let s = PolySystem::new(2, vec![p(2, &[(&[0, 0], 1)])]).unwrap();
        assert_eq!(integer_count(&s, 5, 1e9).unwrap(), 0);
        let circle = PolySystem::new(2, vec![p(2, &[(&[2, 0], 1), (&[0, 2], 1), (&[0, 0], -25)])]).unwrap();
        assert_eq!(integer_count(&circle, 10, 1e9).unwrap(), 12);
        assert_eq!(integer_count(&PolySystem::empty(2), 3, 1e9).unwrap(), 49);
    }

    #[test]
    fn budget_is_enforced() {
        let s = PolySystem::new(3, vec![p(3, &[(&[2, 0, 0], 1), (&[0, 2, 0], 1), (&[0, 0, 2], -1)])]).unwrap();
        match integer_count(&s, 1000, 1e6) {
            Err(Error::Budget { .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nu_t_small() {
        let s = PolySystem::new(3, vec![p(3, &[(&[1, 0, 0], 1), (&[0, 1, 0], 1), (&[0, 0, 1], 1), (&[0, 0, 0], -9)])]).unwrap();
        assert_eq!(nu_t(&s, 2, 1, NuMethod::Auto, 1e9).unwrap(), 1);
        assert_eq!(nu_t(&s, 2, 2, NuMethod::Auto, 1e9).unwrap(), 4);
        // p = 3 divides 9: (p−1)^3 tuples, sums ≡ 0 mod 3 ⇔ all equal
        assert_eq!(nu_t(&s, 3, 1, NuMethod::Auto, 1e9).unwrap(), 2);
    }
}
