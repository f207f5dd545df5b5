//! Local factors: complete exponential sums `S_{a,q}`, the averages `B(q)`,
//! the p-adic densities `μ(p)` and the truncated singular series.

use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{e_frac, euler_phi, units, ComplexSum, PrimeTable};
use crate::compiled::{compile_all, CompiledPoly};
use crate::error::{Error, Result};
use crate::linalg::rank_mod_p;
use crate::polysys::PolySystem;
use crate::residue::{self, NuMethod};

/// Default largest lifting exponent.
pub const DEFAULT_T_MAX: u32 = 4;
/// Consecutive-value tolerance for declaring `μ(p)` stable.
pub const STABILITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
pub struct LocalOptions {
    pub t_max: u32,
    /// Cap on the work spent on each `ν_t(p)`.
    pub budget: f64,
    /// Cap on the work spent on optional cross-checks (the `B(p^j)` route and
    /// lifts beyond a Hensel-certified level).
    pub verify_budget: f64,
    /// Lifts past the stabilization level are computed only for `p` up to
    /// this bound.
    pub verify_p_max: u64,
}

impl Default for LocalOptions {
    fn default() -> Self {
        LocalOptions {
            t_max: DEFAULT_T_MAX,
            budget: 1e9,
            verify_budget: 2e5,
            verify_p_max: 100,
        }
    }
}

/// `S_{a,q} = Σ_{k ∈ (𝕌_q)^n} e(Σ_r a_r f_r(k) / q)`, evaluated exactly
/// before reduction.
pub fn gauss_sum(s: &PolySystem, a: &[i64], q: u64, budget: f64) -> Result<Complex64> {
    let polys = compile_all(s.polys())?;
    if a.len() != polys.len() {
        return Err(Error::Dimension { expected: polys.len(), got: a.len() });
    }
    let n = s.n();
    let cost = (euler_phi(q) as f64).powi(n as i32);
    if cost > budget {
        return Err(Error::budget(format!("complete sum mod {q}"), cost, budget));
    }
    let us = units(q);
    let qi = q as i128;
    let phase_at = |x: &[u64]| -> i128 {
        polys
            .iter()
            .zip(a)
            .map(|(p, &ar)| (p.eval_mod(x, q) as i128 * (ar as i128).rem_euclid(qi)) % qi)
            .sum::<i128>()
    };
    if n == 0 {
        return Ok(e_frac(phase_at(&[]), q));
    }
    let parts: Vec<ComplexSum> = (0..us.len())
        .into_par_iter()
        .map(|first| {
            let mut acc = ComplexSum::default();
            let mut idx = vec![0usize; n];
            idx[0] = first;
            let mut x: Vec<u64> = idx.iter().map(|&i| us[i]).collect();
            loop {
                acc.add(e_frac(phase_at(&x), q));
                let mut i = 1;
                loop {
                    if i >= n {
                        return acc;
                    }
                    idx[i] += 1;
                    if idx[i] < us.len() {
                        x[i] = us[idx[i]];
                        break;
                    }
                    idx[i] = 0;
                    x[i] = us[0];
                    i += 1;
                }
            }
        })
        .collect();
    let mut total = ComplexSum::default();
    for p in &parts {
        total.merge(p);
    }
    Ok(total.value())
}

/// `B(q) = φ(q)^{−n} Σ_{a primitive} S_{a,q}`, through component histograms.
pub fn b_of_q(s: &PolySystem, q: u64, budget: f64) -> Result<Complex64> {
    let sum = residue::primitive_fourier_sum(s, q, budget)?;
    Ok(sum / (euler_phi(q) as f64).powi(s.n() as i32))
}

/// `B(q)` summing `gauss_sum` over every primitive `a`; an independent route
/// for small moduli.
pub fn b_of_q_direct(s: &PolySystem, q: u64, budget: f64) -> Result<Complex64> {
    let r = s.big_r();
    let n = s.n();
    let count = (q as f64).powi(r as i32) * (euler_phi(q) as f64).powi(n as i32);
    if count > budget {
        return Err(Error::budget(format!("direct B({q})"), count, budget));
    }
    let mut acc = ComplexSum::default();
    let mut a = vec![0i64; r];
    loop {
        let g = a.iter().fold(q, |g, &x| g.gcd(&(x as u64)));
        if g == 1 {
            acc.add(gauss_sum(s, &a, q, budget)?);
        }
        let mut i = 0;
        loop {
            if i == r {
                return Ok(acc.value() / (euler_phi(q) as f64).powi(n as i32));
            }
            a[i] += 1;
            if (a[i] as u64) < q {
                break;
            }
            a[i] = 0;
            i += 1;
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalPartial {
    pub t: u32,
    pub nu_t: u64,
    /// `1 + Σ_{j≤t} B(p^j)`, when affordable.
    pub b_route: Option<f64>,
    /// `p^{tR} ν_t(p) / φ(p^t)^n`.
    pub nu_route: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalProfile {
    pub p: u64,
    pub partials: Vec<LocalPartial>,
    pub mu_p: f64,
    pub stabilized_at: Option<u32>,
    pub obstruction: bool,
    /// Every unit solution mod `p` is nonsingular, so the ν-route is
    /// constant in `t`.
    pub hensel_certified: bool,
}

impl LocalProfile {
    /// Largest `|b_route − nu_route| / max(1, nu_route)` over the partials.
    pub fn route_discrepancy(&self) -> Option<f64> {
        self.partials
            .iter()
            .filter_map(|pt| pt.b_route.map(|b| (b - pt.nu_route).abs() / pt.nu_route.abs().max(1.0)))
            .reduce(f64::max)
    }
}

fn nu_route(nu: u64, p: u64, t: u32, n: usize, r: usize) -> f64 {
    let q = (p as f64).powi(t as i32);
    let phi = q - q / p as f64;
    // (q/φ)^n · q^{R−n} · ν, grouped to avoid overflow
    nu as f64 * (q / phi).powi(n as i32) * q.powi(r as i32 - n as i32)
}

/// Jacobian rows `∂f_r/∂x_i` compiled for evaluation mod `p`.
struct Jacobian {
    rows: Vec<Vec<CompiledPoly>>,
}

impl Jacobian {
    fn new(s: &PolySystem) -> Result<Self> {
        let n = s.n();
        let rows = s
            .polys()
            .map(|f| (0..n).map(|i| CompiledPoly::new(&f.derivative(i))).collect())
            .collect::<Result<_>>()?;
        Ok(Jacobian { rows })
    }

    fn full_rank_at(&self, x: &[u64], p: u64) -> bool {
        let m: Vec<Vec<i128>> = self
            .rows
            .iter()
            .map(|row| row.iter().map(|d| d.eval_mod(x, p) as i128).collect())
            .collect();
        rank_mod_p(&m, p) == self.rows.len()
    }
}

/// Whether every unit solution mod `p` is nonsingular. Linear systems are
/// decided from the coefficient matrix alone.
fn all_nonsingular(s: &PolySystem, p: u64, budget: f64) -> Result<Option<bool>> {
    let jac = Jacobian::new(s)?;
    if s.d() <= 1 {
        return Ok(Some(jac.full_rank_at(&vec![0; s.n()], p)));
    }
    match residue::scan_unit_solutions(s, p, budget, &|x| !jac.full_rank_at(x, p)) {
        Ok(scan) => Ok(Some(scan.flagged == 0)),
        Err(Error::Budget { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `μ(p)` by the `ν_t` route with the `B(p^j)` route as a cross-check.
pub fn mu_p(s: &PolySystem, p: u64, opts: &LocalOptions) -> Result<LocalProfile> {
    if p < 2 || !crate::arith::is_prime(p) {
        return Err(Error::Validation(format!("{p} is not prime")));
    }
    if opts.t_max == 0 {
        return Err(Error::Validation("t_max must be at least 1".into()));
    }
    let (n, r) = (s.n(), s.big_r());
    let mut partials: Vec<LocalPartial> = Vec::new();
    let mut b_cum = Some(1.0);
    let mut stabilized_at = None;
    let mut mu = f64::NAN;
    let mut certified = false;
    for t in 1..=opts.t_max {
        let q = match p.checked_pow(t) {
            Some(q) => q,
            None => break,
        };
        let budget = if t == 1 || stabilized_at.is_none() { opts.budget } else { opts.verify_budget };
        let nu = match residue::count_unit_solutions(s, q, NuMethod::Auto, budget) {
            Ok(v) => v,
            Err(Error::Budget { .. }) if t > 1 => break,
            Err(e) => return Err(e),
        };
        let value = nu_route(nu, p, t, n, r);
        b_cum = match b_cum {
            Some(acc) => match b_of_q(s, q, opts.verify_budget) {
                Ok(b) => Some(acc + b.re),
                Err(Error::Budget { .. }) => None,
                Err(e) => return Err(e),
            },
            None => None,
        };
        partials.push(LocalPartial { t, nu_t: nu, b_route: b_cum, nu_route: value });
        if t == 1 {
            if nu == 0 {
                return Ok(LocalProfile {
                    p,
                    partials,
                    mu_p: 0.0,
                    stabilized_at: Some(1),
                    obstruction: true,
                    hensel_certified: false,
                });
            }
            certified = all_nonsingular(s, p, opts.budget)? == Some(true);
            if certified {
                stabilized_at = Some(1);
                mu = value;
            }
        } else if stabilized_at.is_none() {
            let prev = partials[partials.len() - 2].nu_route;
            if (value - prev).abs() < STABILITY_TOL {
                stabilized_at = Some(t);
                mu = value;
            }
        }
        if stabilized_at.is_some() && (b_cum.is_none() || p > opts.verify_p_max) {
            break;
        }
    }
    if stabilized_at.is_none() {
        mu = partials.last().map(|pt| pt.nu_route).unwrap_or(f64::NAN);
    }
    Ok(LocalProfile {
        p,
        partials,
        mu_p: mu,
        stabilized_at,
        obstruction: false,
        hensel_certified: certified,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HenselVerdict {
    /// A nonsingular unit solution exists mod `p`, so `μ(p) > 0`.
    Yes,
    /// No unit solution mod `p`.
    No,
    /// Unit solutions exist mod `p` but all are singular.
    Unknown,
}

#[derive(Clone, Debug, Serialize)]
pub struct HenselCheck {
    pub p: u64,
    pub verdict: HenselVerdict,
    pub witness: Option<Vec<u64>>,
    pub solutions_mod_p: u64,
    pub singular_mod_p: u64,
}

/// Searches `(𝕌_p)^n` for a solution mod `p` with Jacobian of rank `R`.
pub fn hensel_unit_check(s: &PolySystem, p: u64, budget: f64) -> Result<HenselCheck> {
    let jac = Jacobian::new(s)?;
    let scan = residue::scan_unit_solutions(s, p, budget, &|x| !jac.full_rank_at(x, p))?;
    let verdict = if scan.total == 0 {
        HenselVerdict::No
    } else if scan.flagged < scan.total {
        HenselVerdict::Yes
    } else {
        HenselVerdict::Unknown
    };
    Ok(HenselCheck {
        p,
        witness: if verdict == HenselVerdict::Yes { scan.unflagged_witness } else { None },
        verdict,
        solutions_mod_p: scan.total,
        singular_mod_p: scan.flagged,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularData {
    pub p_max: u64,
    pub t_max: u32,
    /// `Π_{p ≤ p_max} μ(p)`.
    pub sigma_truncated: f64,
    /// Heuristic `|𝔖 − 𝔖_trunc|` from a fitted `c/p²` tail.
    pub tail_bound: f64,
    pub tail_constant: f64,
    pub obstructions: Vec<u64>,
    pub factors: Vec<(u64, f64)>,
    pub mu_infty: Option<f64>,
    pub c_f: Option<f64>,
}

impl SingularData {
    pub fn with_mu_infty(mut self, mu_infty: f64) -> Self {
        self.mu_infty = Some(mu_infty);
        self.c_f = Some(self.sigma_truncated * mu_infty);
        self
    }
}

/// Upper estimate of `Σ_{p > x} 1/p²`.
fn prime_square_tail(x: u64) -> f64 {
    let xf = (x.max(2)) as f64;
    1.0 / (xf * xf.ln().max(1.0)) * 1.3
}

/// Euler product of `μ(p)` over `p ≤ p_max` with a fitted tail estimate.
pub fn sigma_truncated(s: &PolySystem, p_max: u64, opts: &LocalOptions) -> Result<SingularData> {
    if p_max < 2 {
        return Err(Error::Validation(format!("p_max must be at least 2, got {p_max}")));
    }
    let table = PrimeTable::new(p_max)?;
    let primes: Vec<u64> = table.primes_up_to(p_max).iter().map(|&p| p as u64).collect();
    let profiles: Vec<LocalProfile> = primes
        .par_iter()
        .map(|&p| mu_p(s, p, opts))
        .collect::<Result<_>>()?;
    let unstable: Vec<u64> = profiles.iter().filter(|pr| pr.stabilized_at.is_none()).map(|pr| pr.p).collect();
    if !unstable.is_empty() {
        return Err(Error::NotStabilized { primes: unstable });
    }
    let obstructions: Vec<u64> = profiles.iter().filter(|pr| pr.obstruction).map(|pr| pr.p).collect();
    // log-sum keeps the product accurate over many factors near 1
    let product = if obstructions.is_empty() {
        profiles.iter().map(|pr| pr.mu_p.ln()).sum::<f64>().exp()
    } else {
        0.0
    };
    let lo = p_max / 10;
    let tail_constant = profiles
        .iter()
        .filter(|pr| pr.p > lo)
        .map(|pr| (pr.mu_p - 1.0).abs() * (pr.p as f64).powi(2))
        .fold(0.0, f64::max);
    let tail_bound = product.abs() * ((tail_constant * prime_square_tail(p_max)).exp() - 1.0);
    Ok(SingularData {
        p_max,
        t_max: opts.t_max,
        sigma_truncated: product,
        tail_bound,
        tail_constant,
        obstructions,
        factors: profiles.iter().map(|pr| (pr.p, pr.mu_p)).collect(),
        mu_infty: None,
        c_f: None,
    })
}

/// `Σ_{q ≤ Q} B(q)`, summed directly over composite moduli.
pub fn sigma_by_q(s: &PolySystem, q_max: u64, budget: f64) -> Result<f64> {
    let terms: Vec<f64> = (1..=q_max)
        .into_par_iter()
        .map(|q| b_of_q(s, q, budget).map(|b| b.re))
        .collect::<Result<_>>()?;
    let mut acc = crate::arith::NeumaierSum::default();
    for t in terms {
        acc.add(t);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::Polynomial;

    fn p(n: usize, t: &[(&[u32], i64)]) -> Polynomial {
        Polynomial::from_int_terms(n, t).unwrap()
    }

    fn ternary(nn: i64) -> PolySystem {
        PolySystem::new(3, vec![p(3, &[(&[1, 0, 0], 1), (&[0, 1, 0], 1), (&[0, 0, 1], 1), (&[0, 0, 0], -nn)])]).unwrap()
    }

    #[test]
    fn gauss_sum_examples() {
        let s = PolySystem::new(1, vec![p(1, &[(&[1], 1)])]).unwrap();
        let g = gauss_sum(&s, &[1], 3, 1e9).unwrap();
        assert!((g - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        let t = ternary(7);
        assert!((gauss_sum(&t, &[0], 7, 1e9).unwrap() - Complex64::new(216.0, 0.0)).norm() < 1e-9);
        let a = gauss_sum(&t, &[3], 10, 1e9).unwrap();
        let b = gauss_sum(&t, &[-3], 10, 1e9).unwrap();
        assert!((a - b.conj()).norm() < 1e-9);
        assert!(a.norm() <= 4f64.powi(3) + 1e-9);
    }

    #[test]
    fn b_examples() {
        let t = ternary(9);
        assert!((b_of_q(&t, 1, 1e9).unwrap().re - 1.0).abs() < 1e-12);
        assert!((b_of_q(&t, 2, 1e9).unwrap().re - 1.0).abs() < 1e-12);
        let b6 = b_of_q(&t, 6, 1e9).unwrap();
        let prod = b_of_q(&t, 2, 1e9).unwrap() * b_of_q(&t, 3, 1e9).unwrap();
        assert!((b6 - prod).norm() < 1e-9);
        assert!(b6.im.abs() < 1e-9);
    }

    #[test]
    fn fourier_and_direct_b_agree() {
        let s = PolySystem::new(
            2,
            vec![p(2, &[(&[2, 0], 1), (&[0, 1], -3), (&[0, 0], 1)]), p(2, &[(&[1, 0], 2), (&[0, 1], 1), (&[0, 0], -2)])],
        )
        .unwrap();
        for q in [2u64, 3, 4, 5, 6, 9, 10] {
            let a = b_of_q(&s, q, 1e9).unwrap();
            let b = b_of_q_direct(&s, q, 1e9).unwrap();
            assert!((a - b).norm() < 1e-9, "q = {q}: {a} vs {b}");
        }
    }

    #[test]
    fn mu_two_for_ternary() {
        let odd = mu_p(&ternary(9), 2, &LocalOptions::default()).unwrap();
        assert!((odd.mu_p - 2.0).abs() < 1e-12);
        for pt in &odd.partials {
            assert!((pt.nu_route - 2.0).abs() < 1e-12);
            assert!((pt.b_route.unwrap() - 2.0).abs() < 1e-9);
        }
        let even = mu_p(&ternary(10), 2, &LocalOptions::default()).unwrap();
        assert!(even.obstruction && even.mu_p == 0.0 && even.partials.last().unwrap().nu_t == 0);
    }

    #[test]
    fn mu_odd_primes() {
        for pr in [3u64, 5, 7] {
            let prof = mu_p(&ternary(11), pr, &LocalOptions::default()).unwrap();
            let want = 1.0 + 1.0 / ((pr - 1) as f64).powi(3);
            assert!((prof.mu_p - want).abs() < 1e-9);
            assert_eq!(prof.stabilized_at, Some(1));
            assert!(prof.route_discrepancy().unwrap() < 1e-9);
        }
    }

    #[test]
    fn hensel_examples() {
        assert_eq!(hensel_unit_check(&ternary(11), 5, 1e9).unwrap().verdict, HenselVerdict::Yes);
        assert_eq!(hensel_unit_check(&ternary(10), 2, 1e9).unwrap().verdict, HenselVerdict::No);
        let sing = PolySystem::new(2, vec![p(2, &[(&[2, 0], 1), (&[0, 1], -3)])]).unwrap();
        assert_eq!(hensel_unit_check(&sing, 3, 1e9).unwrap().verdict, HenselVerdict::No);
        // x1² − 3x2 mod 3 forces x1 ≡ 0, so with a unit-free variable only
        // singular solutions remain
        let sing2 = PolySystem::new(2, vec![p(2, &[(&[2, 0], 1), (&[0, 2], -1)])]).unwrap();
        assert_eq!(hensel_unit_check(&sing2, 2, 1e9).unwrap().verdict, HenselVerdict::Unknown);
    }

    #[test]
    fn sigma_routes_agree() {
        let t = ternary(9);
        let sd = sigma_truncated(&t, 200, &LocalOptions::default()).unwrap();
        let by_q = sigma_by_q(&t, 200, 1e9).unwrap();
        assert!((sd.sigma_truncated - by_q).abs() < 1e-3, "{} vs {by_q}", sd.sigma_truncated);
        let obstructed = sigma_truncated(&ternary(10), 50, &LocalOptions::default()).unwrap();
        assert_eq!(obstructed.obstructions, vec![2]);
        assert_eq!(obstructed.sigma_truncated, 0.0);
        let empty = sigma_truncated(&PolySystem::empty(2), 50, &LocalOptions::default()).unwrap();
        assert!((empty.sigma_truncated - 1.0).abs() < 1e-12);
    }
}
