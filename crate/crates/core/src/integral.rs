//! The archimedean factor: the oscillatory integral `I(τ)`, its truncation
//! `J(L)`, the level-set (shell) estimator of `μ(∞)`, and a search for
//! nonsingular real points in the open unit cube.

use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::invariants::least_squares_slope;
use crate::polysys::{PolySystem, Polynomial};

/// Number of independent random shifts in every QMC estimate.
pub const SHIFTS: usize = 16;
const BLOCK: usize = 4096;

/// A polynomial with real coefficients, flattened for evaluation.
#[derive(Clone, Debug)]
pub struct RealPoly {
    pub terms: Vec<(f64, Vec<(usize, u32)>)>,
}

impl RealPoly {
    pub fn from_poly(p: &Polynomial) -> Self {
        Self::from_poly_scaled(p, 1.0, 0)
    }

    /// `p(X v) / X^ℓ`.
    fn from_poly_scaled(p: &Polynomial, x: f64, l: u32) -> Self {
        let terms = p
            .terms()
            .map(|(m, c)| {
                let k = m.degree() as i32 - l as i32;
                let f = m
                    .exponents()
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| (i, e))
                    .collect();
                (c.to_f64().unwrap_or(f64::NAN) * x.powi(k), f)
            })
            .collect();
        RealPoly { terms }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, f)| f.iter().fold(*c, |acc, &(i, e)| acc * v[i].powi(e as i32)))
            .sum()
    }

    fn grad(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        for (c, f) in &self.terms {
            for (k, &(i, e)) in f.iter().enumerate() {
                let mut t = *c * e as f64 * v[i].powi(e as i32 - 1);
                for (k2, &(j, e2)) in f.iter().enumerate() {
                    if k2 != k {
                        t *= v[j].powi(e2 as i32);
                    }
                }
                out[i] += t;
            }
        }
    }
}

/// Real system `F` on `[0,1]^n` whose level-set density is `μ(∞)`.
#[derive(Clone, Debug)]
pub struct RealSystem {
    pub n: usize,
    pub polys: Vec<RealPoly>,
}

impl RealSystem {
    pub fn from_polys(n: usize, polys: &[Polynomial]) -> Self {
        RealSystem {
            n,
            polys: polys.iter().map(RealPoly::from_poly).collect(),
        }
    }

    /// The highest-degree parts `F_{ℓ,r}` only.
    pub fn leading(s: &PolySystem) -> Self {
        Self::from_polys(s.n(), &s.leading_forms())
    }

    /// `f_{ℓ,r}(X v) / X^ℓ`: keeps the lower-order terms (such as the target
    /// `N` of a Goldbach equation) at their natural scale.
    pub fn scaled(s: &PolySystem, x: f64) -> Self {
        RealSystem {
            n: s.n(),
            polys: s
                .polys_with_degree()
                .map(|(l, p)| RealPoly::from_poly_scaled(p, x, l))
                .collect(),
        }
    }

    pub fn r(&self) -> usize {
        self.polys.len()
    }

    fn values(&self, v: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.polys) {
            *o = p.eval(v);
        }
    }
}

/// Additive recurrence with the generalized golden ratio, shifted.
#[derive(Clone, Debug)]
pub struct Kronecker {
    alpha: Vec<f64>,
}

impl Kronecker {
    pub fn new(dim: usize) -> Self {
        // φ_d: the positive root of x^{d+1} = x + 1
        let mut phi = 2.0f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
        }
        let alpha = (1..=dim).map(|i| (1.0 / phi.powi(i as i32)).fract()).collect();
        Kronecker { alpha }
    }

    pub fn point(&self, k: u64, shift: &[f64], out: &mut [f64]) {
        for ((o, a), s) in out.iter_mut().zip(&self.alpha).zip(shift) {
            *o = (s + (k as f64) * a).fract();
        }
    }
}

fn shifts(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..SHIFTS).map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect()).collect()
}

/// Two-sided 97.5% Student quantile for `SHIFTS − 1` degrees of freedom.
const T_975_15: f64 = 2.131;

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (m, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0);
    (m, (var / k).sqrt())
}

/// Runs `f` over `per_shift` points of every shifted sequence, summing the
/// returned vectors block by block in index order.
fn qmc_sums<F>(dim: usize, per_shift: u64, seed: u64, width: usize, f: F) -> Vec<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let seq = Kronecker::new(dim.max(1));
    let sh = shifts(dim.max(1), seed);
    sh.iter()
        .map(|shift| {
            let blocks = per_shift.div_ceil(BLOCK as u64);
            let parts: Vec<Vec<f64>> = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut acc = vec![0.0; width];
                    let mut v = vec![0.0; dim.max(1)];
                    let lo = b * BLOCK as u64;
                    let hi = (lo + BLOCK as u64).min(per_shift);
                    for k in lo..hi {
                        seq.point(k, shift, &mut v);
                        f(&v[..dim], &mut acc);
                    }
                    acc
                })
                .collect();
            let mut total = vec![0.0; width];
            for p in parts {
                for (t, x) in total.iter_mut().zip(p) {
                    *t += x;
                }
            }
            total
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct OscillatoryValue {
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
}

impl OscillatoryValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// `I(τ) = ∫_{[0,1]^n} e(Σ_r τ_r F_r(v)) dv` by shifted QMC.
pub fn oscillatory_i(f: &RealSystem, tau: &[f64], samples: u64, seed: u64) -> Result<OscillatoryValue> {
    if tau.len() != f.r() {
        return Err(Error::Dimension { expected: f.r(), got: tau.len() });
    }
    if tau.iter().all(|&t| t == 0.0) {
        return Ok(OscillatoryValue { re: 1.0, im: 0.0, stderr: 0.0 });
    }
    if f.n == 0 {
        let phase: f64 = f.polys.iter().zip(tau).map(|(p, t)| t * p.eval(&[])).sum();
        let z = crate::arith::e_real(phase);
        return Ok(OscillatoryValue { re: z.re, im: z.im, stderr: 0.0 });
    }
    let per = (samples / SHIFTS as u64).max(1);
    let r = f.r();
    let sums = qmc_sums(f.n, per, seed, 2, |v, acc| {
        let mut vals = vec![0.0; r];
        f.values(v, &mut vals);
        let ph: f64 = vals.iter().zip(tau).map(|(a, b)| a * b).sum();
        let z = crate::arith::e_real(ph);
        acc[0] += z.re;
        acc[1] += z.im;
    });
    let res: Vec<f64> = sums.iter().map(|s| s[0] / per as f64).collect();
    let ims: Vec<f64> = sums.iter().map(|s| s[1] / per as f64).collect();
    let (mr, er) = mean_and_stderr(&res);
    let (mi, ei) = mean_and_stderr(&ims);
    Ok(OscillatoryValue { re: mr, im: mi, stderr: er.hypot(ei) })
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` (`m ≥ 1`).
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    (1..=m)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite Gauss–Legendre rule on `[−L, L]`.
fn composite_rule(l: f64, panel: f64, order: usize) -> Vec<(f64, f64)> {
    let panels = ((2.0 * l / panel).ceil() as usize).max(1);
    let h = 2.0 * l / panels as f64;
    let gl = gauss_legendre(order);
    let mut out = Vec::with_capacity(panels * order);
    for k in 0..panels {
        let a = -l + k as f64 * h;
        for &(x, w) in &gl {
            out.push((a + (x + 1.0) * h / 2.0, w * h / 2.0));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegralMethod {
    Shell,
    Oscillatory,
}

#[derive(Clone, Debug, Serialize)]
pub struct MuInftyEstimate {
    pub value: f64,
    pub method: IntegralMethod,
    pub eps_schedule: Vec<f64>,
    /// Level-set densities at each `ε` (shell method).
    pub densities: Vec<f64>,
    pub l: Option<f64>,
    pub samples: u64,
    pub seed: u64,
    pub stderr: f64,
    pub confidence_interval: (f64, f64),
    pub zero_hit: bool,
}

/// Default cap on `samples × τ-nodes` for `J(L)`.
pub const DEFAULT_J_BUDGET: f64 = 4e9;

/// `J(L) = ∫_{|τ|_∞ ≤ L} I(τ) dτ` by composite Gauss–Legendre in `τ` over
/// an inner shifted-QMC estimate of `I`.
pub fn j_of_l(f: &RealSystem, l: f64, samples: u64, seed: u64, budget: f64) -> Result<MuInftyEstimate> {
    let r = f.r();
    if r > 2 {
        return Err(Error::Validation(format!(
            "J(L) integrates over τ ∈ ℝ^{r}; only R ≤ 2 is supported, use the shell method"
        )));
    }
    if !(l >= 0.0) {
        return Err(Error::Validation(format!("L must be non-negative, got {l}")));
    }
    let base = MuInftyEstimate {
        value: 0.0,
        method: IntegralMethod::Oscillatory,
        eps_schedule: Vec::new(),
        densities: Vec::new(),
        l: Some(l),
        samples,
        seed,
        stderr: 0.0,
        confidence_interval: (0.0, 0.0),
        zero_hit: false,
    };
    if r == 0 {
        return Ok(MuInftyEstimate { value: 1.0, confidence_interval: (1.0, 1.0), ..base });
    }
    if l == 0.0 {
        return Ok(base);
    }
    let rule1 = composite_rule(l, 0.25, 8);
    let nodes: Vec<(Vec<f64>, f64)> = if r == 1 {
        rule1.iter().map(|&(t, w)| (vec![t], w)).collect()
    } else {
        rule1
            .iter()
            .flat_map(|&(t1, w1)| rule1.iter().map(move |&(t2, w2)| (vec![t1, t2], w1 * w2)))
            .collect()
    };
    let cost = samples as f64 * nodes.len() as f64;
    if cost > budget {
        return Err(Error::budget("J(L) quadrature", cost, budget));
    }
    let per = (samples / SHIFTS as u64).max(1);
    // J is real: I(−τ) is the conjugate of I(τ)
    let sums = qmc_sums(f.n, per, seed, 1, |v, acc| {
        let mut vals = vec![0.0; r];
        f.values(v, &mut vals);
        let mut s = 0.0;
        for (tau, w) in &nodes {
            let ph: f64 = vals.iter().zip(tau).map(|(a, b)| a * b).sum();
            s += w * (std::f64::consts::TAU * ph).cos();
        }
        acc[0] += s;
    });
    let vals: Vec<f64> = sums.iter().map(|s| s[0] / per as f64).collect();
    let (m, se) = mean_and_stderr(&vals);
    Ok(MuInftyEstimate {
        value: m,
        stderr: se,
        confidence_interval: (m - T_975_15 * se, m + T_975_15 * se),
        ..base
    })
}

/// Level-set density `vol{v : |F_r(v)| ≤ ε ∀r} / (2ε)^R`, extrapolated
/// linearly to `ε → 0`.
pub fn shell_mu_infty(f: &RealSystem, eps: &[f64], samples: u64, seed: u64) -> Result<MuInftyEstimate> {
    if eps.len() < 3 {
        return Err(Error::Validation(format!("the ε schedule needs at least 3 values, got {}", eps.len())));
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) || eps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Validation("the ε schedule must be positive and strictly decreasing".into()));
    }
    if samples < 100_000 {
        return Err(Error::Validation(format!("the shell estimator needs at least 1e5 samples, got {samples}")));
    }
    let r = f.r();
    let per = samples / SHIFTS as u64;
    let k = eps.len();
    let sums = qmc_sums(f.n, per, seed, k, |v, acc| {
        let worst = f.polys.iter().map(|p| p.eval(v).abs()).fold(0.0, f64::max);
        for (a, &e) in acc.iter_mut().zip(eps) {
            if worst <= e {
                *a += 1.0;
            }
        }
    });
    let density = |hits: f64, e: f64| hits / per as f64 / (2.0 * e).powi(r as i32);
    let per_shift: Vec<f64> = sums
        .iter()
        .map(|s| {
            let pts: Vec<(f64, f64)> = eps.iter().zip(s).map(|(&e, &h)| (e, density(h, e))).collect();
            intercept(&pts)
        })
        .collect();
    let densities: Vec<f64> = (0..k)
        .map(|i| {
            let total: f64 = sums.iter().map(|s| s[i]).sum();
            total / (per * SHIFTS as u64) as f64 / (2.0 * eps[i]).powi(r as i32)
        })
        .collect();
    let all_zero = sums.iter().all(|s| s.iter().all(|&h| h == 0.0));
    let (m, se) = if all_zero { (0.0, 0.0) } else { mean_and_stderr(&per_shift) };
    // the density of a level set is non-negative; clamp the extrapolation
    let value = m.max(0.0);
    Ok(MuInftyEstimate {
        value,
        method: IntegralMethod::Shell,
        eps_schedule: eps.to_vec(),
        densities,
        l: None,
        samples: per * SHIFTS as u64,
        seed,
        stderr: se,
        confidence_interval: ((m - T_975_15 * se).max(0.0).min(value), (m + T_975_15 * se).max(value)),
        zero_hit: all_zero,
    })
}

fn intercept(pts: &[(f64, f64)]) -> f64 {
    let slope = least_squares_slope(pts).unwrap_or(0.0);
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    my - slope * mx
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealVerdict {
    Yes,
    Unknown,
}

#[derive(Clone, Debug, Serialize)]
pub struct RealPointCheck {
    pub verdict: RealVerdict,
    pub point: Option<Vec<f64>>,
    pub residual: f64,
    pub min_singular_ratio: f64,
    pub starts: usize,
}

/// Searches `(0,1)^n` for a real zero of `F` with Jacobian of full rank `R`,
/// by damped Gauss–Newton from seeded random starts.
pub fn real_nonsingular_check(f: &RealSystem, starts: usize, seed: u64) -> RealPointCheck {
    let n = f.n;
    let r = f.r();
    let mut best = RealPointCheck {
        verdict: RealVerdict::Unknown,
        point: None,
        residual: f64::INFINITY,
        min_singular_ratio: 0.0,
        starts,
    };
    if r == 0 {
        best.verdict = RealVerdict::Yes;
        best.point = Some(vec![0.5; n]);
        best.residual = 0.0;
        best.min_singular_ratio = 1.0;
        return best;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = 1e-9;
    for _ in 0..starts {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
        let mut vals = vec![0.0; r];
        for _ in 0..200 {
            f.values(&v, &mut vals);
            let res: f64 = vals.iter().map(|x| x * x).sum::<f64>().sqrt();
            if res < 1e-13 {
                break;
            }
            let jac = jacobian(f, &v);
            // minimum-norm step: Δ = −Jᵀ (J Jᵀ)^{-1} F
            let Some(y) = solve_gram(&jac, &vals) else { break };
            let mut step = vec![0.0; n];
            for (row, yr) in jac.iter().zip(&y) {
                for (s, j) in step.iter_mut().zip(row) {
                    *s -= j * yr;
                }
            }
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..30 {
                let cand: Vec<f64> = v.iter().zip(&step).map(|(a, b)| (a + t * b).clamp(margin, 1.0 - margin)).collect();
                let mut cv = vec![0.0; r];
                f.values(&cand, &mut cv);
                let cres: f64 = cv.iter().map(|x| x * x).sum::<f64>().sqrt();
                if cres < res {
                    v = cand;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        f.values(&v, &mut vals);
        let res: f64 = vals.iter().map(|x| x * x).sum::<f64>().sqrt();
        let interior = v.iter().all(|&x| x > 1e-6 && x < 1.0 - 1e-6);
        let ratio = conditioning(&jacobian(f, &v));
        if res < 1e-10 && interior && ratio > 1e-8 {
            return RealPointCheck {
                verdict: RealVerdict::Yes,
                point: Some(v),
                residual: res,
                min_singular_ratio: ratio,
                starts,
            };
        }
        if res < best.residual {
            best.residual = res;
            best.point = Some(v);
            best.min_singular_ratio = ratio;
        }
    }
    best
}

fn jacobian(f: &RealSystem, v: &[f64]) -> Vec<Vec<f64>> {
    f.polys
        .iter()
        .map(|p| {
            let mut g = vec![0.0; f.n];
            p.grad(v, &mut g);
            g
        })
        .collect()
}

/// Solves `(J Jᵀ) y = b` by Gaussian elimination with partial pivoting.
fn solve_gram(j: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let r = j.len();
    let mut a: Vec<Vec<f64>> = (0..r)
        .map(|i| {
            let mut row: Vec<f64> = (0..r).map(|k| j[i].iter().zip(&j[k]).map(|(x, y)| x * y).sum()).collect();
            row.push(b[i]);
            row
        })
        .collect();
    for c in 0..r {
        let p = (c..r).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        for i in 0..r {
            if i != c {
                let f = a[i][c] / a[c][c];
                for k in c..=r {
                    a[i][k] -= f * a[c][k];
                }
            }
        }
    }
    Some((0..r).map(|i| a[i][r] / a[i][i]).collect())
}

/// Ratio of the smallest to the largest pivot of the Gram matrix `J Jᵀ`,
/// square-rooted: a cheap proxy for `σ_min / σ_max`.
fn conditioning(j: &[Vec<f64>]) -> f64 {
    let r = j.len();
    let mut a: Vec<Vec<f64>> = (0..r)
        .map(|i| (0..r).map(|k| j[i].iter().zip(&j[k]).map(|(x, y)| x * y).sum()).collect())
        .collect();
    let mut pivots = Vec::with_capacity(r);
    for c in 0..r {
        let Some(p) = (c..r).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())) else {
            return 0.0;
        };
        a.swap(c, p);
        let d = a[c][c];
        if d.abs() < 1e-300 {
            return 0.0;
        }
        pivots.push(d.abs());
        for i in c + 1..r {
            let f = a[i][c] / d;
            for k in c..r {
                a[i][k] -= f * a[c][k];
            }
        }
    }
    let max = pivots.iter().cloned().fold(0.0, f64::max);
    let min = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        (min / max).sqrt()
    }
}
