//! Counting and Fourier-transforming unit solutions of a system modulo `q`.
//!
//! Two independent engines:
//!
//! * direct enumeration of `(𝕌_q)^n`, optionally solving one variable from an
//!   equation in which it occurs only linearly with a unit coefficient;
//! * a separable engine: variables are split into components that never
//!   share a monomial, each component contributes a histogram of its values
//!   in `(ℤ/q)^R`, and the histograms are combined by cyclic convolution (for
//!   counting) or by their discrete Fourier transforms (for `B(q)`).

use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::arith::{euler_phi, units, ComplexSum};
use crate::compiled::CompiledPoly;
use crate::error::{Error, Result};
use crate::linalg::{mul_mod, pow_mod};
use crate::polysys::{PolySystem, Polynomial};

/// Largest residue grid `q^R` the separable engine will allocate.
pub const MAX_GRID: u64 = 1 << 26;

/// Grids up to this size are histogrammed into per-thread dense buffers.
const DENSE_HISTOGRAM: usize = 1 << 20;

/// Totals product below which FFT convolution rounds exactly.
const FFT_EXACT_LIMIT: f64 = 8e13;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NuMethod {
    /// Pick the cheaper engine.
    Auto,
    /// Direct enumeration (with a linear pivot when one exists).
    Enumerate,
    /// Component histograms and convolution.
    Convolve,
}

/// A variable that can be solved for: it occurs in equation `eq` only in the
/// monomial `x_var` with coefficient `coeff`.
#[derive(Clone, Copy, Debug)]
pub struct Pivot {
    pub eq: usize,
    pub var: usize,
    pub coeff: i128,
}

/// Finds solvable variables of the compiled system; `unit_mod` restricts to
/// coefficients invertible modulo that number.
pub fn find_pivots(polys: &[CompiledPoly], unit_mod: Option<u64>) -> Vec<Pivot> {
    let mut out = Vec::new();
    for (eq, p) in polys.iter().enumerate() {
        for var in p.variables() {
            let mut coeff = None;
            let mut clean = true;
            for t in &p.terms {
                if t.factors.iter().any(|f| f.0 == var) {
                    if t.factors.len() == 1 && t.factors[0].1 == 1 && coeff.is_none() {
                        coeff = Some(t.coeff);
                    } else {
                        clean = false;
                    }
                }
            }
            if let (true, Some(c)) = (clean, coeff) {
                let ok = match unit_mod {
                    Some(m) => (c.rem_euclid(m as i128) as u64).gcd(&m) == 1,
                    None => c != 0,
                };
                if ok {
                    out.push(Pivot { eq, var, coeff: c });
                }
            }
        }
    }
    out
}

/// Variables occurring anywhere in the system, ascending.
pub fn involved_vars(polys: &[CompiledPoly]) -> Vec<usize> {
    let mut v: Vec<usize> = polys.iter().flat_map(|p| p.variables()).collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn checked_pow(b: u64, e: usize, what: &str) -> Result<u64> {
    (0..e).try_fold(1u64, |acc, _| acc.checked_mul(b))
        .ok_or_else(|| Error::Overflow(format!("{what}: {b}^{e}")))
}

/// Modular inverse of a unit `a` modulo `m` (any `m ≥ 1`).
pub fn inv_mod_any(a: u64, m: u64) -> Option<u64> {
    let e = num_integer::Integer::extended_gcd(&(a as i128), &(m as i128));
    (e.gcd == 1).then(|| e.x.rem_euclid(m as i128) as u64)
}

/// Calls `f` for every point of `(𝕌_q)^k` whose first coordinate is
/// `units[first]`, reusing one buffer.
fn for_each_tail(units: &[u64], k: usize, first: usize, f: &mut dyn FnMut(&[u64])) {
    if k == 1 {
        f(&[units[first]]);
        return;
    }
    let mut idx = vec![0usize; k];
    let mut x: Vec<u64> = vec![units[0]; k];
    if k == 0 {
        f(&x);
        return;
    }
    idx[0] = first;
    x[0] = units[first];
    loop {
        f(&x);
        let mut i = 1;
        loop {
            if i >= k {
                return;
            }
            idx[i] += 1;
            if idx[i] < units.len() {
                x[i] = units[idx[i]];
                break;
            }
            idx[i] = 0;
            x[i] = units[0];
            i += 1;
        }
    }
}

/// Cost (point evaluations) of enumerating unit solutions mod `q`.
pub fn enumeration_cost(polys: &[CompiledPoly], q: u64) -> f64 {
    let phi = euler_phi(q) as f64;
    let k = involved_vars(polys).len();
    let pivoted = !find_pivots(polys, Some(q)).is_empty();
    let dims = if pivoted { k.saturating_sub(1) } else { k };
    phi.powi(dims as i32) * polys.len().max(1) as f64
}

/// Outcome of scanning the unit solutions mod `q`.
#[derive(Clone, Debug, Default)]
pub struct SolutionScan {
    /// All unit solutions (free coordinates included).
    pub total: u64,
    /// Solutions accepted by the classifier (free coordinates included).
    pub flagged: u64,
    pub flagged_witness: Option<Vec<u64>>,
    pub unflagged_witness: Option<Vec<u64>>,
}

/// Direct count of `x ∈ (𝕌_q)^n` with every polynomial `≡ 0 (mod q)`.
pub fn count_by_enumeration(s: &PolySystem, q: u64, budget: f64) -> Result<u64> {
    Ok(scan_unit_solutions(s, q, budget, &|_| false)?.total)
}

/// Enumerates the unit solutions mod `q`, sorting them with `classify`.
/// Coordinates that occur in no equation are fixed to `1` when the
/// classifier is called and contribute a factor `φ(q)` each to the counts.
pub fn scan_unit_solutions(
    s: &PolySystem,
    q: u64,
    budget: f64,
    classify: &(dyn Fn(&[u64]) -> bool + Sync),
) -> Result<SolutionScan> {
    let polys = crate::compiled::compile_all(s.polys())?;
    let n = s.n();
    let cost = enumeration_cost(&polys, q);
    if cost > budget {
        return Err(Error::budget(format!("enumerating unit solutions mod {q}"), cost, budget));
    }
    let us = units(q);
    let phi = us.len() as u64;
    let vars = involved_vars(&polys);
    let free = n - vars.len();
    let free_factor = checked_pow(phi, free, "counting free coordinates")?;
    for p in &polys {
        if p.variables().is_empty() && p.eval_mod(&vec![0; n], q) != 0 {
            return Ok(SolutionScan::default());
        }
    }
    let filler = 1 % q;
    let pivot = find_pivots(&polys, Some(q)).into_iter().next();
    let enum_vars: Vec<usize> = vars
        .iter()
        .copied()
        .filter(|&v| pivot.map_or(true, |p| p.var != v))
        .collect();
    let k = enum_vars.len();
    let qi = q as i128;
    let pivot_data = pivot.map(|p| {
        let inv = inv_mod_any(p.coeff.rem_euclid(qi) as u64, q).expect("pivot coefficient is a unit");
        (p, inv)
    });

    let scan_first = |out: &mut SolutionScan, x: &mut [u64], first: usize| {
        let mut body = |vals: &[u64]| {
            for (j, &v) in enum_vars.iter().enumerate() {
                x[v] = vals[j];
            }
            if let Some((p, inv)) = pivot_data {
                x[p.var] = 0;
                let g = polys[p.eq].eval_mod(x, q);
                // coeff·x_v + g ≡ 0
                let xv = mul_mod((q - g) % q, inv, q);
                if xv.gcd(&q) != 1 && q > 1 {
                    return;
                }
                x[p.var] = xv;
            }
            if polys.iter().all(|f| f.eval_mod(x, q) == 0) {
                out.total += 1;
                if classify(x) {
                    out.flagged += 1;
                    if out.flagged_witness.is_none() {
                        out.flagged_witness = Some(x.to_vec());
                    }
                } else if out.unflagged_witness.is_none() {
                    out.unflagged_witness = Some(x.to_vec());
                }
            }
        };
        if k == 0 {
            body(&[]);
        } else {
            for_each_tail(&us, k, first, &mut body);
        }
    };
    let firsts = if k == 0 { 1 } else { us.len() };
    let merge = |mut acc: SolutionScan, part: SolutionScan| {
        acc.total += part.total;
        acc.flagged += part.flagged;
        if acc.flagged_witness.is_none() {
            acc.flagged_witness = part.flagged_witness;
        }
        if acc.unflagged_witness.is_none() {
            acc.unflagged_witness = part.unflagged_witness;
        }
        acc
    };
    // splits are merged in index order, so witnesses are the first found
    let mut acc = (0..firsts)
        .into_par_iter()
        .fold(
            || (SolutionScan::default(), vec![filler; n]),
            |(mut out, mut x), first| {
                scan_first(&mut out, &mut x, first);
                (out, x)
            },
        )
        .map(|(out, _)| out)
        .reduce(SolutionScan::default, merge);
    let overflow = || Error::Overflow("counting unit solutions".into());
    acc.total = acc.total.checked_mul(free_factor).ok_or_else(overflow)?;
    acc.flagged = acc.flagged.checked_mul(free_factor).ok_or_else(overflow)?;
    Ok(acc)
}

/// The system split into variable-disjoint components.
#[derive(Clone, Debug)]
pub struct Separated {
    pub n: usize,
    pub big_r: usize,
    /// Constant term of each equation.
    pub consts: Vec<i128>,
    /// Variables of each component.
    pub components: Vec<Vec<usize>>,
    /// `parts[c][r]`: the monomials of equation `r` living on component `c`.
    pub parts: Vec<Vec<CompiledPoly>>,
    /// Variables that occur nowhere.
    pub free: usize,
}

impl Separated {
    pub fn new(s: &PolySystem) -> Result<Self> {
        let n = s.n();
        let polys: Vec<&Polynomial> = s.polys().collect();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let nx = p[y];
                p[y] = r;
                y = nx;
            }
            r
        }
        let mut used = vec![false; n];
        for p in &polys {
            for (m, _) in p.terms() {
                let sup: Vec<usize> = m.support().collect();
                for &v in &sup {
                    used[v] = true;
                }
                for w in sup.windows(2) {
                    let a = find(&mut parent, w[0]);
                    let b = find(&mut parent, w[1]);
                    parent[a] = b;
                }
            }
        }
        let mut roots: Vec<usize> = Vec::new();
        let mut components: Vec<Vec<usize>> = Vec::new();
        for v in 0..n {
            if !used[v] {
                continue;
            }
            let r = find(&mut parent, v);
            match roots.iter().position(|&x| x == r) {
                Some(i) => components[i].push(v),
                None => {
                    roots.push(r);
                    components.push(vec![v]);
                }
            }
        }
        let mut consts = Vec::with_capacity(polys.len());
        let mut parts: Vec<Vec<CompiledPoly>> = vec![Vec::with_capacity(polys.len()); components.len()];
        for p in &polys {
            let mut c0 = Polynomial::zero(n);
            let mut per: Vec<Polynomial> = vec![Polynomial::zero(n); components.len()];
            for (m, c) in p.terms() {
                match m.support().next() {
                    None => c0.add_term(m.clone(), c.clone()),
                    Some(v) => {
                        let ci = components.iter().position(|comp| comp.contains(&v)).expect("used variable");
                        per[ci].add_term(m.clone(), c.clone());
                    }
                }
            }
            consts.push(CompiledPoly::new(&c0)?.eval_i128(&vec![0; n]).unwrap_or(0));
            for (ci, q) in per.iter().enumerate() {
                parts[ci].push(CompiledPoly::new(q)?);
            }
        }
        let free = used.iter().filter(|u| !**u).count();
        Ok(Separated {
            n,
            big_r: polys.len(),
            consts,
            components,
            parts,
            free,
        })
    }

    pub fn grid_size(&self, q: u64) -> Option<u64> {
        checked_pow(q, self.big_r, "grid").ok()
    }

    /// Point evaluations needed to build every component histogram.
    pub fn histogram_cost(&self, q: u64) -> f64 {
        let phi = euler_phi(q) as f64;
        self.components
            .iter()
            .map(|c| phi.powi(c.len() as i32) * self.big_r.max(1) as f64)
            .sum()
    }

    /// Histogram of the values of component `c` on `(𝕌_q)^{|c|}`, indexed by
    /// `Σ_r v_r q^r`.
    pub fn histogram(&self, c: usize, q: u64) -> Vec<u64> {
        let size = q.pow(self.big_r as u32) as usize;
        let vars = &self.components[c];
        let us = units(q);
        let parts = &self.parts[c];
        let n = self.n;
        let index = |x: &[u64]| {
            let mut idx = 0usize;
            let mut mult = 1usize;
            for p in parts {
                idx += p.eval_mod(x, q) as usize * mult;
                mult *= q as usize;
            }
            idx
        };
        if vars.len() == 1 && size <= DENSE_HISTOGRAM {
            let v = vars[0];
            let mut h = vec![0u64; size];
            let mut x = vec![0u64; n];
            for &u in &us {
                x[v] = u;
                h[index(&x)] += 1;
            }
            return h;
        }
        let visit = |first: usize, x: &mut [u64], sink: &mut dyn FnMut(usize)| {
            for_each_tail(&us, vars.len(), first, &mut |vals| {
                for (j, &v) in vars.iter().enumerate() {
                    x[v] = vals[j];
                }
                sink(index(x));
            });
        };
        if size <= DENSE_HISTOGRAM {
            return (0..us.len())
                .into_par_iter()
                .fold(
                    || (vec![0u64; size], vec![0u64; n]),
                    |(mut h, mut x), first| {
                        visit(first, &mut x, &mut |i| h[i] += 1);
                        (h, x)
                    },
                )
                .map(|(h, _)| h)
                .reduce(
                    || vec![0u64; size],
                    |mut a, b| {
                        for (x, y) in a.iter_mut().zip(&b) {
                            *x += y;
                        }
                        a
                    },
                );
        }
        let partial: Vec<Vec<(usize, u64)>> = (0..us.len())
            .into_par_iter()
            .map(|first| {
                let mut local: std::collections::HashMap<usize, u64> = std::collections::HashMap::new();
                let mut x = vec![0u64; n];
                visit(first, &mut x, &mut |i| *local.entry(i).or_insert(0) += 1);
                let mut v: Vec<(usize, u64)> = local.into_iter().collect();
                v.sort_unstable();
                v
            })
            .collect();
        let mut h = vec![0u64; size];
        for chunk in partial {
            for (i, c) in chunk {
                h[i] += c;
            }
        }
        h
    }

    /// Index of `−consts (mod q)`.
    fn target(&self, q: u64) -> usize {
        let mut idx = 0usize;
        let mut mult = 1usize;
        for &c in &self.consts {
            idx += (-c).rem_euclid(q as i128) as usize * mult;
            mult *= q as usize;
        }
        idx
    }
}

/// Digits of a grid index.
fn digits(mut i: usize, q: usize, r: usize) -> Vec<usize> {
    let mut d = Vec::with_capacity(r);
    for _ in 0..r {
        d.push(i % q);
        i /= q;
    }
    d
}

fn add_index(a: &[usize], b: &[usize], q: usize) -> usize {
    let mut idx = 0;
    let mut mult = 1;
    for (x, y) in a.iter().zip(b) {
        idx += ((x + y) % q) * mult;
        mult *= q;
    }
    idx
}

/// Cyclic convolution on `(ℤ/q)^r`, exact.
fn convolve(a: &[u64], b: &[u64], q: usize, r: usize) -> Result<Vec<u64>> {
    let size = a.len();
    let nz_a: Vec<usize> = (0..size).filter(|&i| a[i] != 0).collect();
    let nz_b: Vec<usize> = (0..size).filter(|&i| b[i] != 0).collect();
    let ta: u64 = a.iter().sum();
    let tb: u64 = b.iter().sum();
    let direct_cost = nz_a.len() as f64 * nz_b.len() as f64;
    let fft_cost = 3.0 * size as f64 * (size as f64).log2().max(1.0) * 4.0;
    if direct_cost <= fft_cost || (ta as f64) * (tb as f64) >= FFT_EXACT_LIMIT {
        let da: Vec<Vec<usize>> = nz_a.iter().map(|&i| digits(i, q, r)).collect();
        let db: Vec<Vec<usize>> = nz_b.iter().map(|&i| digits(i, q, r)).collect();
        let mut out = vec![0u128; size];
        for (ia, xa) in nz_a.iter().zip(&da) {
            for (ib, xb) in nz_b.iter().zip(&db) {
                out[add_index(xa, xb, q)] += a[*ia] as u128 * b[*ib] as u128;
            }
        }
        return out
            .into_iter()
            .map(|v| u64::try_from(v).map_err(|_| Error::Overflow("convolving histograms".into())))
            .collect();
    }
    let dims = vec![q; r];
    let mut fa: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
    let mut fb: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
    fft_nd(&mut fa, &dims, false);
    fft_nd(&mut fb, &dims, false);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    fft_nd(&mut fa, &dims, true);
    let scale = size as f64;
    Ok(fa.iter().map(|z| (z.re / scale).round().max(0.0) as u64).collect())
}

thread_local! {
    static PLANNER: std::cell::RefCell<FftPlanner<f64>> = std::cell::RefCell::new(FftPlanner::new());
}

/// In-place multidimensional FFT over a row-major grid whose axis 0 varies
/// fastest. `inverse` computes `Σ_v h(v) e(+a·v/q)` (unnormalized).
pub fn fft_nd(data: &mut [Complex64], dims: &[usize], inverse: bool) {
    let total: usize = dims.iter().product();
    let mut stride = 1;
    for &len in dims {
        let fft = PLANNER.with(|pl| {
            let mut pl = pl.borrow_mut();
            if inverse {
                pl.plan_fft_inverse(len)
            } else {
                pl.plan_fft_forward(len)
            }
        });
        let block = stride * len;
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                for k in 0..len {
                    buf[k] = data[outer + inner + k * stride];
                }
                fft.process(&mut buf);
                for k in 0..len {
                    data[outer + inner + k * stride] = buf[k];
                }
            }
        }
        stride = block;
    }
}

/// Counts unit solutions through component histograms.
pub fn count_by_convolution(s: &PolySystem, q: u64, budget: f64) -> Result<u64> {
    let sep = Separated::new(s)?;
    let size = sep
        .grid_size(q)
        .filter(|&g| g <= MAX_GRID)
        .ok_or_else(|| Error::budget(format!("residue grid mod {q}"), (q as f64).powi(sep.big_r as i32), MAX_GRID as f64))?;
    let cost = sep.histogram_cost(q) + sep.components.len() as f64 * size as f64 * (size as f64).log2().max(1.0);
    if cost > budget {
        return Err(Error::budget(format!("convolving unit solutions mod {q}"), cost, budget));
    }
    let phi = euler_phi(q);
    let free_factor = checked_pow(phi, sep.free, "counting free coordinates")?;
    let target = sep.target(q);
    if sep.components.is_empty() {
        return Ok(if target == 0 { free_factor } else { 0 });
    }
    let hists: Vec<Vec<u64>> = (0..sep.components.len()).map(|c| sep.histogram(c, q)).collect();
    let (qq, r) = (q as usize, sep.big_r);
    let last = hists.len() - 1;
    let mut acc = hists[0].clone();
    if last == 0 {
        return acc[target]
            .checked_mul(free_factor)
            .ok_or_else(|| Error::Overflow("counting unit solutions".into()));
    }
    for h in &hists[1..last] {
        acc = convolve(&acc, h, qq, r)?;
    }
    // Σ_v acc(v) · last(target − v)
    let tdig = digits(target, qq, r);
    let mut total: u128 = 0;
    for (i, &a) in acc.iter().enumerate() {
        if a == 0 {
            continue;
        }
        // index of target − digits(i)
        let (mut rest, mut j, mut mult) = (i, 0usize, 1usize);
        for t in &tdig {
            let x = rest % qq;
            rest /= qq;
            j += (t + qq - x) % qq * mult;
            mult *= qq;
        }
        total += a as u128 * hists[last][j] as u128;
    }
    let total = u64::try_from(total).map_err(|_| Error::Overflow("counting unit solutions".into()))?;
    total
        .checked_mul(free_factor)
        .ok_or_else(|| Error::Overflow("counting unit solutions".into()))
}

/// `#{x ∈ (𝕌_q)^n : f(x) ≡ 0 (mod q)}` by the requested engine.
pub fn count_unit_solutions(s: &PolySystem, q: u64, method: NuMethod, budget: f64) -> Result<u64> {
    match method {
        NuMethod::Enumerate => count_by_enumeration(s, q, budget),
        NuMethod::Convolve => count_by_convolution(s, q, budget),
        NuMethod::Auto => {
            let polys = crate::compiled::compile_all(s.polys())?;
            let enum_cost = enumeration_cost(&polys, q);
            let sep = Separated::new(s)?;
            let conv_cost = match sep.grid_size(q) {
                Some(g) if g <= MAX_GRID => {
                    sep.histogram_cost(q)
                        + sep.components.len() as f64 * g as f64 * (g as f64).log2().max(1.0)
                }
                _ => f64::INFINITY,
            };
            if conv_cost < enum_cost {
                count_by_convolution(s, q, budget)
            } else {
                count_by_enumeration(s, q, budget)
            }
        }
    }
}

/// `Σ_{a primitive mod q} Π_c Ĥ_c(a) · e(a·const/q)`, with the free
/// coordinates contributing `φ(q)` each. Primitive means
/// `gcd(a_1, …, a_R, q) = 1`.
pub fn primitive_fourier_sum(s: &PolySystem, q: u64, budget: f64) -> Result<Complex64> {
    let sep = Separated::new(s)?;
    let r = sep.big_r;
    let phi = euler_phi(q) as f64;
    if q == 1 {
        return Ok(Complex64::new(phi.powi(s.n() as i32), 0.0));
    }
    if r == 0 {
        // only a = () exists, and it is not primitive for q > 1
        return Ok(Complex64::new(0.0, 0.0));
    }
    let size = sep
        .grid_size(q)
        .filter(|&g| g <= MAX_GRID)
        .ok_or_else(|| Error::budget(format!("Fourier grid mod {q}"), (q as f64).powi(r as i32), MAX_GRID as f64))?
        as usize;
    let cost = sep.histogram_cost(q) + (sep.components.len() + 1) as f64 * size as f64 * (size as f64).log2().max(1.0);
    if cost > budget {
        return Err(Error::budget(format!("exponential sums mod {q}"), cost, budget));
    }
    let qq = q as usize;
    let dims = vec![qq; r];
    let mut prod = vec![Complex64::new(phi.powi(sep.free as i32), 0.0); size];
    for c in 0..sep.components.len() {
        let h = sep.histogram(c, q);
        let nnz = h.iter().filter(|&&v| v != 0).count();
        let transform: Vec<Complex64> = if (nnz as f64) * (size as f64) < 4.0 * size as f64 * (size as f64).log2().max(1.0) {
            exact_dft(&h, qq, r)
        } else {
            let mut buf: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
            fft_nd(&mut buf, &dims, true);
            buf
        };
        for (p, t) in prod.iter_mut().zip(&transform) {
            *p *= t;
        }
    }
    let consts: Vec<i128> = sep.consts.clone();
    let mut sum = ComplexSum::default();
    let qi = q as i128;
    let reduced: Vec<i128> = consts.iter().map(|c| c.rem_euclid(qi)).collect();
    for (i, p) in prod.iter().enumerate() {
        let (mut rest, mut g, mut phase) = (i, q, 0i128);
        for c in &reduced {
            let x = (rest % qq) as u64;
            rest /= qq;
            g = g.gcd(&x);
            phase = (phase + x as i128 * c) % qi;
        }
        if g != 1 {
            continue;
        }
        sum.add(p * crate::arith::e_frac(phase, q));
    }
    Ok(sum.value())
}

/// `Σ_v h(v) e(a·v/q)` for every `a`, from an exact root table.
fn exact_dft(h: &[u64], q: usize, r: usize) -> Vec<Complex64> {
    let roots = crate::arith::root_table(q as u64);
    let nz: Vec<(Vec<usize>, f64)> = h
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0)
        .map(|(i, &v)| (digits(i, q, r), v as f64))
        .collect();
    (0..h.len())
        .into_par_iter()
        .map(|i| {
            let a = digits(i, q, r);
            let mut s = ComplexSum::default();
            for (v, w) in &nz {
                let k: usize = a.iter().zip(v).map(|(x, y)| x * y % q).sum::<usize>() % q;
                s.add(roots[k] * *w);
            }
            s.value()
        })
        .collect()
}

/// Modular power helper re-exported for callers that lift solutions.
pub fn pow_mod_u64(b: u64, e: u64, m: u64) -> u64 {
    pow_mod(b, e, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: usize, t: &[(&[u32], i64)]) -> Polynomial {
        Polynomial::from_int_terms(n, t).unwrap()
    }

    fn ternary(nn: i64) -> PolySystem {
        PolySystem::new(3, vec![p(3, &[(&[1, 0, 0], 1), (&[0, 1, 0], 1), (&[0, 0, 1], 1), (&[0, 0, 0], -nn)])]).unwrap()
    }

    #[test]
    fn ternary_small_counts() {
        assert_eq!(count_by_enumeration(&ternary(9), 2, 1e9).unwrap(), 1);
        assert_eq!(count_by_enumeration(&ternary(10), 2, 1e9).unwrap(), 0);
        let s = PolySystem::new(2, vec![p(2, &[(&[1, 0], 1), (&[0, 1], 1), (&[0, 0], -4)])]).unwrap();
        assert_eq!(count_by_enumeration(&s, 3, 1e9).unwrap(), 1);
        assert_eq!(count_by_convolution(&s, 3, 1e9).unwrap(), 1);
    }

    #[test]
    fn engines_agree() {
        let systems = vec![
            ternary(11),
            PolySystem::new(
                3,
                vec![
                    p(3, &[(&[2, 0, 0], 1), (&[0, 1, 1], -2), (&[0, 0, 0], 3)]),
                    p(3, &[(&[1, 0, 0], 1), (&[0, 0, 1], 1), (&[0, 0, 0], -1)]),
                ],
            )
            .unwrap(),
            PolySystem::new(2, vec![p(2, &[(&[2, 0], 1), (&[0, 2], 1), (&[0, 0], -5)])]).unwrap(),
            PolySystem::empty(2),
        ];
        for s in &systems {
            for q in [1u64, 2, 3, 4, 5, 8, 9, 12, 25, 27] {
                let a = count_by_enumeration(s, q, 1e9).unwrap();
                let b = count_by_convolution(s, q, 1e9).unwrap();
                assert_eq!(a, b, "q = {q}");
            }
        }
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let q = 37usize;
        let a: Vec<u64> = (0..q * q).map(|i| (i * 7 % 11) as u64).collect();
        let b: Vec<u64> = (0..q * q).map(|i| (i * 3 % 5) as u64).collect();
        let direct = {
            let mut out = vec![0u64; q * q];
            for i in 0..q * q {
                for j in 0..q * q {
                    out[add_index(&digits(i, q, 2), &digits(j, q, 2), q)] += a[i] * b[j];
                }
            }
            out
        };
        assert_eq!(convolve(&a, &b, q, 2).unwrap(), direct);
    }
}
