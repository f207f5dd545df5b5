//! Number-theoretic kernels: sieves, the von Mangoldt function, Euler's
//! totient, unit groups and roots of unity.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest table the sieve will build (entries).
pub const MAX_TABLE: u64 = 200_000_000;

/// Smallest-prime-factor table with cached von Mangoldt values up to `limit`.
#[derive(Clone, Debug)]
pub struct PrimeTable {
    limit: u64,
    spf: Vec<u32>,
    primes: Vec<u32>,
    lambda: Vec<f64>,
}

impl PrimeTable {
    /// Linear sieve up to and including `limit`.
    pub fn new(limit: u64) -> Result<Self> {
        if limit > MAX_TABLE {
            return Err(Error::budget(
                "prime table",
                limit as f64,
                MAX_TABLE as f64,
            ));
        }
        let lim = limit as usize;
        let mut spf = vec![0u32; lim + 1];
        let mut primes: Vec<u32> = Vec::new();
        for i in 2..=lim {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                let ip = i * p as usize;
                if p > si || ip > lim {
                    break;
                }
                spf[ip] = p;
            }
        }
        let mut lambda = vec![0.0; lim + 1];
        for &p in &primes {
            let lp = (p as f64).ln();
            let mut pk = p as u64;
            while pk <= limit {
                lambda[pk as usize] = lp;
                pk *= p as u64;
            }
        }
        Ok(PrimeTable {
            limit,
            spf,
            primes,
            lambda,
        })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    /// Primes `≤ x` (requires `x ≤ limit`).
    pub fn primes_up_to(&self, x: u64) -> &[u32] {
        let k = self.primes.partition_point(|&p| (p as u64) <= x);
        &self.primes[..k]
    }

    pub fn is_prime(&self, x: u64) -> bool {
        x >= 2 && x <= self.limit && self.spf[x as usize] as u64 == x
    }

    pub fn smallest_prime_factor(&self, x: u64) -> Option<u64> {
        (x >= 2 && x <= self.limit).then(|| self.spf[x as usize] as u64)
    }

    /// `Λ(x)`; zero for `x ∈ {0, 1}`. Falls back to trial division above the table.
    pub fn von_mangoldt(&self, x: u64) -> f64 {
        if x <= self.limit {
            self.lambda[x as usize]
        } else {
            von_mangoldt(x)
        }
    }

    /// Λ table slice `Λ(0..=limit)`.
    pub fn lambda_table(&self) -> &[f64] {
        &self.lambda
    }

    /// `ψ(x) = Σ_{m ≤ x} Λ(m)` with compensated summation.
    pub fn psi(&self, x: u64) -> f64 {
        let top = x.min(self.limit) as usize;
        let mut s = NeumaierSum::default();
        for &v in &self.lambda[..=top] {
            s.add(v);
        }
        for m in (self.limit + 1)..=x {
            s.add(von_mangoldt(m));
        }
        s.value()
    }

    pub fn factorize(&self, mut x: u64) -> Vec<(u64, u32)> {
        if x > self.limit {
            return factorize(x);
        }
        let mut out: Vec<(u64, u32)> = Vec::new();
        while x > 1 {
            let p = self.spf[x as usize] as u64;
            let mut e = 0;
            while x % p == 0 {
                x /= p;
                e += 1;
            }
            out.push((p, e));
        }
        out
    }
}

/// Trial-division factorization.
pub fn factorize(mut x: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= x {
        if x % p == 0 {
            let mut e = 0;
            while x % p == 0 {
                x /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if x > 1 {
        out.push((x, 1));
    }
    out
}

pub fn is_prime(x: u64) -> bool {
    x >= 2 && factorize(x).first() == Some(&(x, 1))
}

/// `Λ(x)` by trial division; `Λ(0) = Λ(1) = 0`.
pub fn von_mangoldt(x: u64) -> f64 {
    if x < 2 {
        return 0.0;
    }
    let f = factorize(x);
    if f.len() == 1 {
        (f[0].0 as f64).ln()
    } else {
        0.0
    }
}

/// Primes in `[lo, hi]` by a segmented sieve of Eratosthenes.
pub fn segmented_primes(lo: u64, hi: u64) -> Vec<u64> {
    if hi < 2 || hi < lo {
        return Vec::new();
    }
    let lo = lo.max(2);
    let root = (hi as f64).sqrt() as u64 + 1;
    let base = simple_sieve(root);
    let mut out = Vec::new();
    const SEG: u64 = 1 << 16;
    let mut start = lo;
    while start <= hi {
        let end = (start + SEG - 1).min(hi);
        let mut mark = vec![true; (end - start + 1) as usize];
        for &p in &base {
            if p * p > end {
                break;
            }
            let first = (start.div_ceil(p) * p).max(p * p);
            let mut m = first;
            while m <= end {
                mark[(m - start) as usize] = false;
                m += p;
            }
        }
        out.extend(
            mark.iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| start + i as u64),
        );
        start = end + 1;
    }
    out
}

fn simple_sieve(n: u64) -> Vec<u64> {
    let n = n as usize;
    let mut comp = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !comp[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                comp[j] = true;
                j += i;
            }
        }
    }
    out
}

/// `ψ(x)` through the segmented sieve: every prime power `≤ x` contributes `log p`.
pub fn psi_segmented(x: u64) -> f64 {
    let mut s = NeumaierSum::default();
    for p in segmented_primes(2, x) {
        let lp = (p as f64).ln();
        let mut pk = p;
        loop {
            s.add(lp);
            match pk.checked_mul(p) {
                Some(v) if v <= x => pk = v,
                _ => break,
            }
        }
    }
    s.value()
}

/// Euler's totient; `φ(1) = 1`.
pub fn euler_phi(q: u64) -> u64 {
    assert!(q >= 1, "euler_phi needs q >= 1");
    factorize(q)
        .into_iter()
        .fold(1, |acc, (p, e)| acc * (p - 1) * p.pow(e - 1))
}

/// Ascending residues coprime to `q`; `{0}` when `q = 1`.
pub fn units(q: u64) -> Vec<u64> {
    assert!(q >= 1, "units needs q >= 1");
    if q == 1 {
        return vec![0];
    }
    let primes: Vec<u64> = factorize(q).into_iter().map(|(p, _)| p).collect();
    (1..q).filter(|&a| primes.iter().all(|&p| a % p != 0)).collect()
}

/// `e(m/q) = exp(2πi m/q)`, with `m` reduced mod `q` before the trig call.
pub fn e_frac(m: i128, q: u64) -> Complex64 {
    assert!(q >= 1, "e_frac needs q >= 1");
    let qi = q as i128;
    let mut r = m.rem_euclid(qi);
    if 2 * r > qi {
        r -= qi;
    }
    e_real(r as f64 / q as f64)
}

/// `e(x) = exp(2πi x)` for real `x`, reducing to `[-1/2, 1/2]` first.
pub fn e_real(x: f64) -> Complex64 {
    let f = x - x.round();
    let (s, c) = (std::f64::consts::TAU * f).sin_cos();
    Complex64::new(c, s)
}

/// Table of `e(k/q)` for `k = 0..q`.
pub fn root_table(q: u64) -> Vec<Complex64> {
    (0..q).map(|k| e_frac(k as i128, q)).collect()
}

/// Neumaier's compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of complex numbers.
#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexSum {
    re: NeumaierSum,
    im: NeumaierSum,
}

impl ComplexSum {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn merge(&mut self, other: &ComplexSum) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_examples() {
        let t = PrimeTable::new(100).unwrap();
        assert_eq!(t.von_mangoldt(8), 2f64.ln());
        assert_eq!(t.von_mangoldt(1), 0.0);
        assert_eq!(t.von_mangoldt(0), 0.0);
        assert_eq!(t.von_mangoldt(12), 0.0);
        assert_eq!(von_mangoldt(81), 3f64.ln());
        assert_eq!(t.von_mangoldt(1000), 0.0);
        assert_eq!(t.von_mangoldt(1024), 2f64.ln());
    }

    #[test]
    fn primality_matches_trial_division() {
        let t = PrimeTable::new(5000).unwrap();
        for x in 0..=5000 {
            assert_eq!(t.is_prime(x), is_prime(x), "x = {x}");
        }
        assert_eq!(
            segmented_primes(0, 5000),
            t.primes().iter().map(|&p| p as u64).collect::<Vec<_>>()
        );
        assert_eq!(segmented_primes(4990, 5010), vec![4993, 4999, 5003, 5009]);
    }

    #[test]
    fn psi_routes_agree() {
        let t = PrimeTable::new(20_000).unwrap();
        assert!((t.psi(10) - 7.832_014_180_0).abs() < 1e-9);
        assert!((t.psi(20_000) - psi_segmented(20_000)).abs() < 1e-8);
        // beyond the table falls back to trial division
        let small = PrimeTable::new(50).unwrap();
        assert!((small.psi(120) - t.psi(120)).abs() < 1e-10);
    }

    #[test]
    fn totient_and_units() {
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(9), 6);
        for t in 1..20 {
            assert_eq!(euler_phi(1 << t), 1 << (t - 1));
        }
        assert_eq!(units(6), vec![1, 5]);
        assert_eq!(units(1), vec![0]);
        for q in 1..200 {
            assert_eq!(units(q).len() as u64, euler_phi(q));
        }
    }

    #[test]
    fn roots_of_unity() {
        assert_eq!(e_frac(0, 5), Complex64::new(1.0, 0.0));
        assert!((e_frac(1, 2) - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!((e_frac(1, 3) + e_frac(2, 3) + 1.0).norm() < 1e-12);
        assert!((e_frac(-7, 5) - e_frac(3, 5)).norm() < 1e-15);
        for q in 1..50 {
            for m in -60..60 {
                assert!((e_frac(m, q).norm() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn orthogonality() {
        for q in 1..=100u64 {
            for m in 0..(2 * q as i128) {
                let s: Complex64 = (0..q).map(|a| e_frac(m * a as i128, q)).sum();
                let expect = if m % q as i128 == 0 { q as f64 } else { 0.0 };
                assert!((s - expect).norm() < 1e-9, "q={q} m={m}");
            }
        }
    }

    #[test]
    fn chebyshev_sanity() {
        let t = PrimeTable::new(100_000).unwrap();
        for x in [10_000u64, 50_000, 100_000] {
            let r = t.psi(x) / x as f64;
            assert!((0.9..=1.1).contains(&r), "psi({x})/{x} = {r}");
        }
    }

    #[test]
    fn compensated_sum_is_accurate() {
        let mut s = NeumaierSum::default();
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.value(), 1.0);
    }
}
