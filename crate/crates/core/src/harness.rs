//! End-to-end comparison of empirical counts with `C(f)·X^{n−D}`, plus the
//! major-arc bookkeeping and the exponential sum `T(f; α)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{ComplexSum, NeumaierSum, PrimeTable};
use crate::compiled::compile_all;
use crate::counting::{weighted_count_with, BoxKind, Weight};
use crate::error::{Error, Result};
use crate::integral::{real_nonsingular_check, shell_mu_infty, MuInftyEstimate, RealSystem, RealVerdict};
use crate::local::{sigma_truncated, LocalOptions, SingularData};
use crate::polysys::PolySystem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuMode {
    /// `f(Xv)/X^ℓ`, lower-order terms kept.
    Scaled,
    /// Leading forms only.
    Leading,
}

#[derive(Clone, Debug)]
pub struct PredictOptions {
    pub p_max: u64,
    pub local: LocalOptions,
    pub samples: u64,
    pub eps: Vec<f64>,
    pub seed: u64,
    pub mu_mode: MuMode,
    pub count_budget: f64,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions {
            p_max: 1000,
            local: LocalOptions::default(),
            samples: 1 << 22,
            eps: vec![0.02, 0.01, 0.005],
            seed: 0x5eed,
            mu_mode: MuMode::Scaled,
            count_budget: crate::counting::DEFAULT_COUNT_BUDGET,
        }
    }
}

fn real_system(s: &PolySystem, x: u64, mode: MuMode) -> RealSystem {
    match mode {
        MuMode::Scaled => RealSystem::scaled(s, x as f64),
        MuMode::Leading => RealSystem::leading(s),
    }
}

/// `n − D`, the exponent of `X` in the main term.
pub fn main_term_exponent(s: &PolySystem) -> i64 {
    s.n() as i64 - s.big_d() as i64
}

#[derive(Clone, Debug, Serialize)]
pub struct Prediction {
    pub x: u64,
    pub exponent: i64,
    pub sigma: SingularData,
    pub mu_infty: MuInftyEstimate,
    pub c_f: f64,
    pub predicted: f64,
    /// From the tail bound of the product and the μ(∞) interval.
    pub predicted_interval: (f64, f64),
    pub reasons: Vec<String>,
}

fn assemble(x: u64, exponent: i64, sigma: SingularData, mu: MuInftyEstimate) -> Prediction {
    let scale = (x as f64).powi(exponent as i32);
    let c_f = sigma.sigma_truncated * mu.value;
    let mut reasons = Vec::new();
    if !sigma.obstructions.is_empty() {
        reasons.push(format!("local obstruction at p ∈ {:?}: the singular series vanishes", sigma.obstructions));
    }
    if mu.zero_hit {
        reasons.push("no real points in the unit cube: μ(∞) = 0".into());
    }
    let s_lo = (sigma.sigma_truncated - sigma.tail_bound).max(0.0);
    let s_hi = sigma.sigma_truncated + sigma.tail_bound;
    let (m_lo, m_hi) = mu.confidence_interval;
    let sigma = sigma.with_mu_infty(mu.value);
    Prediction {
        x,
        exponent,
        c_f,
        predicted: c_f * scale,
        predicted_interval: (s_lo * m_lo * scale, s_hi * m_hi * scale),
        sigma,
        mu_infty: mu,
        reasons,
    }
}

/// `𝔖_trunc · μ(∞) · X^{n−D}`.
pub fn predict(s: &PolySystem, x: u64, opts: &PredictOptions) -> Result<Prediction> {
    let sigma = sigma_truncated(s, opts.p_max, &opts.local)?;
    let mu = shell_mu_infty(&real_system(s, x, opts.mu_mode), &opts.eps, opts.samples, opts.seed)?;
    Ok(assemble(x, main_term_exponent(s), sigma, mu))
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRow {
    pub x: u64,
    pub m_f: f64,
    pub m_prime_f: f64,
    pub mu_infty: f64,
    pub c_f: f64,
    pub predicted: f64,
    pub ratio_m: Option<f64>,
    pub ratio_m_prime: Option<f64>,
    pub raw_solutions: u64,
    pub count_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub system: String,
    pub n: usize,
    pub big_d: u64,
    pub exponent: i64,
    pub rows: Vec<ComparisonRow>,
    pub sigma_truncated: f64,
    pub tail_bound: f64,
    pub p_max: u64,
    pub mu_interval_last: (f64, f64),
    pub obstructions: Vec<u64>,
    pub real_point: RealVerdict,
    pub seed: u64,
    pub notes: Vec<String>,
}

/// Empirical `M_f`, `M'_f` against the prediction at every `X` of the grid.
pub fn compare(s: &PolySystem, xs: &[u64], opts: &PredictOptions) -> Result<ComparisonReport> {
    let x_max = *xs.iter().max().ok_or_else(|| Error::Validation("empty X grid".into()))?;
    if x_max > crate::arith::MAX_TABLE {
        return Err(Error::budget("counting box side", x_max as f64, crate::arith::MAX_TABLE as f64));
    }
    let sigma = sigma_truncated(s, opts.p_max, &opts.local)?;
    let table = PrimeTable::new(x_max)?;
    let exponent = main_term_exponent(s);
    let mut rows = Vec::with_capacity(xs.len());
    let mut last_interval = (0.0, 0.0);
    let mut notes = Vec::new();
    for &x in xs {
        let m = weighted_count_with(s, x, Weight::Mangoldt, BoxKind::Positive, Some(&table), opts.count_budget)?;
        let mp = weighted_count_with(s, x, Weight::PrimeLog, BoxKind::Positive, Some(&table), opts.count_budget)?;
        let mu = shell_mu_infty(&real_system(s, x, opts.mu_mode), &opts.eps, opts.samples, opts.seed)?;
        last_interval = mu.confidence_interval;
        let pr = assemble(x, exponent, sigma.clone(), mu);
        let ratio = |v: f64| (pr.predicted > 0.0).then(|| v / pr.predicted);
        rows.push(ComparisonRow {
            x,
            m_f: m.weighted_sum,
            m_prime_f: mp.weighted_sum,
            mu_infty: pr.mu_infty.value,
            c_f: pr.c_f,
            predicted: pr.predicted,
            ratio_m: ratio(m.weighted_sum),
            ratio_m_prime: ratio(mp.weighted_sum),
            raw_solutions: m.raw_solutions,
            count_seconds: m.wall_time + mp.wall_time,
        });
    }
    if !sigma.obstructions.is_empty() {
        let all_zero = rows.iter().all(|r| r.m_f == 0.0);
        notes.push(if all_zero {
            "local obstruction: empirical and predicted counts are both zero".to_string()
        } else {
            "local obstruction predicts density zero; the solutions found use the obstructing prime itself as a coordinate".to_string()
        });
    }
    let real = real_nonsingular_check(&real_system(s, x_max, opts.mu_mode), 16, opts.seed);
    Ok(ComparisonReport {
        system: s.polys().map(|p| p.to_string()).collect::<Vec<_>>().join("; "),
        n: s.n(),
        big_d: s.big_d(),
        exponent,
        rows,
        sigma_truncated: sigma.sigma_truncated,
        tail_bound: sigma.tail_bound,
        p_max: sigma.p_max,
        mu_interval_last: last_interval,
        obstructions: sigma.obstructions,
        real_point: real.verdict,
        seed: opts.seed,
        notes,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ArcSpec {
    pub c: f64,
    pub x: u64,
    /// `⌊(log X)^C⌋`.
    pub q_max: u64,
    /// `(ℓ, X^{−ℓ}(log X)^C)` for every degree present.
    pub widths: Vec<(u32, f64)>,
    /// Smallest distance between distinct fractions with denominators `≤ q_max`.
    pub min_gap: f64,
    pub disjoint: bool,
    /// Smallest power of two `X` from which the arcs are disjoint.
    pub disjoint_from: Option<u64>,
}

fn min_farey_gap(q_max: u64) -> f64 {
    if q_max <= 1 {
        return 1.0;
    }
    if q_max > 20_000 {
        // consecutive Farey neighbours a/q, c/d satisfy |a/q − c/d| = 1/(qd)
        return 1.0 / (q_max as f64 * (q_max - 1) as f64);
    }
    // walk the Farey sequence of order q_max
    let (mut a, mut b, mut c, mut d) = (0u64, 1u64, 1u64, q_max);
    let mut gap = f64::INFINITY;
    while c <= q_max {
        gap = gap.min(1.0 / (b * d) as f64);
        let k = (q_max + b) / d;
        let (na, nb) = (c, d);
        c = k * c - a;
        d = k * d - b;
        a = na;
        b = nb;
        if a == 1 && b == 1 {
            break;
        }
    }
    gap
}

fn arc_geometry(s: &PolySystem, x: u64, c: f64) -> (u64, Vec<(u32, f64)>, f64, bool) {
    let lx = (x.max(2) as f64).ln();
    let q_max = lx.powf(c).floor().max(1.0) as u64;
    let widths: Vec<(u32, f64)> = s
        .groups()
        .filter(|(l, g)| *l >= 1 && !g.is_empty())
        .map(|(l, _)| (l, (x as f64).powi(-(l as i32)) * lx.powf(c)))
        .collect();
    let gap = min_farey_gap(q_max);
    let disjoint = widths.iter().all(|&(_, w)| 2.0 * w < gap);
    (q_max, widths, gap, disjoint)
}

/// Major arcs `|α_{ℓ,r} − a_{ℓ,r}/q| ≤ X^{−ℓ}(log X)^C`, `q ≤ (log X)^C`,
/// with a numerical disjointness check.
pub fn arc_spec(s: &PolySystem, x: u64, c: f64) -> ArcSpec {
    let (q_max, widths, min_gap, disjoint) = arc_geometry(s, x, c);
    let disjoint_from = (1..63).map(|k| 1u64 << k).find(|&y| arc_geometry(s, y, c).3);
    ArcSpec {
        c,
        x,
        q_max,
        widths,
        min_gap,
        disjoint,
        disjoint_from,
    }
}

/// Points of `[0, X]^n` with nonzero `Λ`-weight, with the weight.
fn lambda_support(x: u64, table: &PrimeTable) -> Vec<(i64, f64)> {
    (0..=x)
        .filter_map(|v| {
            let w = table.von_mangoldt(v);
            (w != 0.0).then_some((v as i64, w))
        })
        .collect()
}

fn for_each_grid_point(n: usize, support: &[(i64, f64)], f: &mut dyn FnMut(&[i64], f64)) {
    if n == 0 {
        f(&[], 1.0);
        return;
    }
    let mut idx = vec![0usize; n];
    let mut x = vec![0i64; n];
    loop {
        let mut w = 1.0;
        for (j, &i) in idx.iter().enumerate() {
            x[j] = support[i].0;
            w *= support[i].1;
        }
        f(&x, w);
        let mut j = 0;
        loop {
            if j == n {
                return;
            }
            idx[j] += 1;
            if idx[j] < support.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// `T(f; α) = Σ_{x ∈ [0,X]^n} Λ(x_1)⋯Λ(x_n) e(Σ_r α_r f_r(x))` evaluated
/// directly.
pub fn exp_sum_t(s: &PolySystem, alpha: &[f64], x: u64, budget: f64) -> Result<Complex64> {
    let polys = compile_all(s.polys())?;
    if alpha.len() != polys.len() {
        return Err(Error::Dimension { expected: polys.len(), got: alpha.len() });
    }
    let table = PrimeTable::new(x)?;
    let support = lambda_support(x, &table);
    let cost = (support.len() as f64).powi(s.n() as i32) * polys.len().max(1) as f64;
    if cost > budget {
        return Err(Error::budget("evaluating T(f; α)", cost, budget));
    }
    let mut acc = ComplexSum::default();
    let mut err = None;
    for_each_grid_point(s.n(), &support, &mut |pt, w| {
        let mut phase = 0.0;
        for (p, a) in polys.iter().zip(alpha) {
            match p.eval_i128(pt) {
                Some(v) => phase += (a * v as f64).rem_euclid(1.0),
                None => err = Some(Error::Overflow("f(x) in i128".into())),
            }
        }
        acc.add(crate::arith::e_real(phase) * w);
    });
    match err {
        Some(e) => Err(e),
        None => Ok(acc.value()),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TorusCheck {
    pub x: u64,
    pub m: u64,
    /// Mean of `T(f; j/M)` over `j ∈ (ℤ/M)^R`.
    pub grid_average: f64,
    pub grid_average_imag: f64,
    pub m_f: f64,
    /// `Σ Λ(x)` over points with `f(x) ≡ 0 (mod M)` but `f(x) ≠ 0`: the
    /// exact gap between the grid average and `M_f`.
    pub aliasing_mass: f64,
}

impl TorusCheck {
    pub fn within_bound(&self, tol: f64) -> bool {
        (self.grid_average - self.m_f).abs() <= self.aliasing_mass + tol
    }
}

/// Averages `T` over the `M^R` grid of the torus; by orthogonality the mean
/// counts the weighted solutions of `f ≡ 0 (mod M)`.
pub fn torus_average(s: &PolySystem, x: u64, m: u64, budget: f64) -> Result<TorusCheck> {
    let r = s.big_r();
    let grid = (m as f64).powi(r as i32);
    let table = PrimeTable::new(x)?;
    let support = lambda_support(x, &table);
    let cost = grid * (support.len() as f64).powi(s.n() as i32);
    if cost > budget {
        return Err(Error::budget("torus grid average", cost, budget));
    }
    let points: Vec<Vec<f64>> = (0..grid as u64)
        .map(|mut j| {
            (0..r)
                .map(|_| {
                    let d = j % m;
                    j /= m;
                    d as f64 / m as f64
                })
                .collect()
        })
        .collect();
    let values: Vec<Complex64> = points
        .par_iter()
        .map(|a| exp_sum_t(s, a, x, f64::INFINITY))
        .collect::<Result<_>>()?;
    let mut acc = ComplexSum::default();
    for v in &values {
        acc.add(*v);
    }
    let mean = acc.value() / grid;

    let polys = compile_all(s.polys())?;
    let mut alias = NeumaierSum::default();
    let mut exact = NeumaierSum::default();
    for_each_grid_point(s.n(), &support, &mut |pt, w| {
        let vals: Vec<i128> = polys.iter().map(|p| p.eval_i128(pt).unwrap_or(1)).collect();
        if vals.iter().all(|&v| v == 0) {
            exact.add(w);
        } else if vals.iter().all(|&v| v.rem_euclid(m as i128) == 0) {
            alias.add(w);
        }
    });
    let m_f = weighted_count_with(s, x, Weight::Mangoldt, BoxKind::Positive, Some(&table), budget)?.weighted_sum;
    debug_assert!((m_f - exact.value()).abs() <= 1e-9 * m_f.max(1.0));
    Ok(TorusCheck {
        x,
        m,
        grid_average: mean.re,
        grid_average_imag: mean.im,
        m_f,
        aliasing_mass: alias.value(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::Polynomial;

    fn p(n: usize, t: &[(&[u32], i64)]) -> Polynomial {
        Polynomial::from_int_terms(n, t).unwrap()
    }

    fn quick() -> PredictOptions {
        PredictOptions {
            p_max: 200,
            samples: 1 << 18,
            ..PredictOptions::default()
        }
    }

    #[test]
    fn empty_system_predicts_x() {
        let s = PolySystem::empty(1);
        let pr = predict(&s, 100_000, &quick()).unwrap();
        assert!((pr.predicted - 1e5).abs() < 1e-6);
        let psi = PrimeTable::new(100_000).unwrap().psi(100_000);
        assert!((psi / pr.predicted - 1.0).abs() < 0.02);
    }

    #[test]
    fn even_ternary_is_obstructed() {
        let s = PolySystem::new(3, vec![p(3, &[(&[1, 0, 0], 1), (&[0, 1, 0], 1), (&[0, 0, 1], 1), (&[0, 0, 0], -1000)])]).unwrap();
        let pr = predict(&s, 1000, &quick()).unwrap();
        assert_eq!(pr.predicted, 0.0);
        assert!(!pr.reasons.is_empty());
    }

    #[test]
    fn report_arithmetic() {
        let s = PolySystem::new(3, vec![p(3, &[(&[1, 0, 0], 1), (&[0, 1, 0], 1), (&[0, 0, 1], 1), (&[0, 0, 0], -1001)])]).unwrap();
        let rep = compare(&s, &[1001], &quick()).unwrap();
        let row = &rep.rows[0];
        let again = row.c_f * 1001f64.powi(2);
        assert!((row.predicted - again).abs() <= 1e-12 * again);
        assert!((row.c_f - rep.sigma_truncated * row.mu_infty).abs() < 1e-12);
        assert!(row.ratio_m.unwrap() > 0.8 && row.ratio_m.unwrap() < 1.2);
    }

    #[test]
    fn t_sum_basics() {
        let s = PolySystem::new(2, vec![p(2, &[(&[1, 0], 1), (&[0, 1], 1), (&[0, 0], -30)])]).unwrap();
        let psi = PrimeTable::new(40).unwrap().psi(40);
        let t0 = exp_sum_t(&s, &[0.0], 40, 1e9).unwrap();
        assert!((t0.re - psi * psi).abs() < 1e-9 && t0.im.abs() < 1e-9);
        let a = exp_sum_t(&s, &[0.137], 40, 1e9).unwrap();
        let b = exp_sum_t(&s, &[-0.137], 40, 1e9).unwrap();
        assert!((a - b.conj()).norm() < 1e-9);
    }

    #[test]
    fn torus_matches_count_up_to_aliasing() {
        let s = PolySystem::new(2, vec![p(2, &[(&[1, 0], 1), (&[0, 1], 1), (&[0, 0], -60)]), p(2, &[(&[1, 1], 1), (&[0, 0], -371)])]).unwrap();
        let tc = torus_average(&s, 60, 16, 1e10).unwrap();
        assert!(tc.within_bound(1e-6), "{tc:?}");
        assert!((tc.grid_average - tc.m_f - tc.aliasing_mass).abs() < 1e-6);
    }

    #[test]
    fn arcs() {
        let s = PolySystem::new(3, vec![p(3, &[(&[1, 0, 0], 1), (&[0, 1, 0], 1), (&[0, 0, 1], 1), (&[0, 0, 0], -1001)])]).unwrap();
        let a = arc_spec(&s, 10_000, 1.0);
        assert_eq!(a.q_max, 9);
        assert!(a.disjoint);
        assert!((min_farey_gap(5) - 1.0 / 20.0).abs() < 1e-15);
        assert!(a.disjoint_from.unwrap() <= 10_000);
    }
}
