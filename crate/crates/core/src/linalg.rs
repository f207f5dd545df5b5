//! Small exact linear algebra: rational row reduction, fraction-free rank and
//! rank modulo a prime.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Result of [`rref`].
#[derive(Clone, Debug)]
pub struct Rref {
    /// The reduced matrix (same shape as the input).
    pub matrix: Vec<Vec<BigRational>>,
    /// Pivot column of each nonzero row, in row order.
    pub pivots: Vec<usize>,
    /// The row operations applied, as `T` with `T · input = matrix`.
    pub transform: Vec<Vec<BigRational>>,
}

impl Rref {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

/// Reduced row echelon form over the rationals, scanning columns left to
/// right.
pub fn rref(a: &[Vec<BigRational>]) -> Rref {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut m: Vec<Vec<BigRational>> = a.to_vec();
    let mut t: Vec<Vec<BigRational>> = (0..rows)
        .map(|i| {
            (0..rows)
                .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
                .collect()
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        t.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for x in t[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i == r || m[i][c].is_zero() {
                continue;
            }
            let f = m[i][c].clone();
            for j in 0..cols {
                let delta = &f * &m[r][j];
                m[i][j] -= delta;
            }
            for j in 0..rows {
                let delta = &f * &t[r][j];
                t[i][j] -= delta;
            }
        }
        pivots.push(c);
        r += 1;
    }
    Rref {
        matrix: m,
        pivots,
        transform: t,
    }
}

/// Rank of an integer matrix by fraction-free (Bareiss) elimination.
pub fn rank_bigint(a: &[Vec<BigInt>]) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut m = a.to_vec();
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        for i in r + 1..rows {
            for j in c + 1..cols {
                let v = (&m[r][c] * &m[i][j] - &m[i][c] * &m[r][j]) / &prev;
                m[i][j] = v;
            }
            m[i][c] = BigInt::zero();
        }
        prev = m[r][c].clone();
        r += 1;
    }
    r
}

/// Rank of a small `i128` matrix, falling back to big integers on overflow.
pub fn rank_i128(a: &[Vec<i128>]) -> usize {
    if let Some(r) = bareiss_i128(a) {
        return r;
    }
    let big: Vec<Vec<BigInt>> = a
        .iter()
        .map(|row| row.iter().map(|&v| BigInt::from(v)).collect())
        .collect();
    rank_bigint(&big)
}

fn bareiss_i128(a: &[Vec<i128>]) -> Option<usize> {
    let rows = a.len();
    if rows == 0 {
        return Some(0);
    }
    let cols = a[0].len();
    let mut m = a.to_vec();
    let mut prev: i128 = 1;
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(r, p);
        for i in r + 1..rows {
            for j in c + 1..cols {
                let v = m[r][c]
                    .checked_mul(m[i][j])?
                    .checked_sub(m[i][c].checked_mul(m[r][j])?)?;
                m[i][j] = v / prev;
            }
            m[i][c] = 0;
        }
        prev = m[r][c];
        r += 1;
    }
    Some(r)
}

/// Rank of an integer matrix reduced modulo the prime `p`.
pub fn rank_mod_p(a: &[Vec<i128>], p: u64) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let pp = p as i128;
    let mut m: Vec<Vec<u64>> = a
        .iter()
        .map(|row| row.iter().map(|&v| v.rem_euclid(pp) as u64).collect())
        .collect();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(piv) = (r..rows).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(r, piv);
        let inv = inv_mod(m[r][c], p);
        for j in c..cols {
            m[r][j] = mul_mod(m[r][j], inv, p);
        }
        for i in r + 1..rows {
            let f = m[i][c];
            if f == 0 {
                continue;
            }
            for j in c..cols {
                let sub = mul_mod(f, m[r][j], p);
                m[i][j] = (m[i][j] + p - sub) % p;
            }
        }
        r += 1;
    }
    r
}

#[inline]
pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    if m <= u32::MAX as u64 && a < m && b < m {
        return a * b % m;
    }
    ((a as u128 * b as u128) % m as u128) as u64
}

pub(crate) fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    b %= m;
    if e == 1 {
        return b;
    }
    let mut acc = 1 % m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    acc
}

/// Inverse modulo a prime via Fermat.
pub(crate) fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}
