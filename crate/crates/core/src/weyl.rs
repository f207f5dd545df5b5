//! Weyl differencing at desk scale: the multilinear operator `Γ_{ℓ,G}`, the
//! rank-deficiency variety `M_ℓ`, lattice-point counts on it, and the exact
//! squaring identity behind the differencing step.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{e_frac, ComplexSum};
use crate::compiled::CompiledPoly;
use crate::error::{Error, Result};
use crate::invariants::least_squares_slope;
use crate::linalg::rank_i128;
use crate::polysys::Polynomial;

/// Largest tuple box `z_count` enumerates.
pub const Z_COUNT_GUARD: f64 = 1e8;

/// `Γ_{ℓ,G}(x_1, …, x_ℓ) = Σ_{t ∈ {0,1}^ℓ} (−1)^{t_1+…+t_ℓ} G(t_1x_1 + … + t_ℓx_ℓ)`.
pub fn gamma_operator(g: &Polynomial, points: &[Vec<i64>]) -> Result<BigRational> {
    let pts: Vec<Vec<BigRational>> = points
        .iter()
        .map(|p| p.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect())
        .collect();
    gamma_operator_rational(g, &pts)
}

pub fn gamma_operator_rational(g: &Polynomial, points: &[Vec<BigRational>]) -> Result<BigRational> {
    let n = g.n();
    if let Some(bad) = points.iter().find(|p| p.len() != n) {
        return Err(Error::Dimension { expected: n, got: bad.len() });
    }
    let l = points.len();
    if l >= 31 {
        return Err(Error::Validation(format!("Γ of order {l} has too many terms")));
    }
    let mut acc = BigRational::zero();
    for mask in 0u32..(1 << l) {
        let mut y = vec![BigRational::zero(); n];
        for (i, p) in points.iter().enumerate() {
            if mask >> i & 1 == 1 {
                for (yj, pj) in y.iter_mut().zip(p) {
                    *yj += pj;
                }
            }
        }
        let v = g.evaluate_rational(&y)?;
        if mask.count_ones() % 2 == 0 {
            acc += v;
        } else {
            acc -= v;
        }
    }
    Ok(acc)
}

/// `Γ_{ℓ,G}` as a polynomial in `nℓ` variables; argument `i` occupies the
/// variables `i·n .. (i+1)·n`.
pub fn gamma_polynomial(g: &Polynomial, l: usize) -> Result<Polynomial> {
    let n = g.n();
    if l == 0 || l >= 31 {
        return Err(Error::Validation(format!("Γ order {l} out of range")));
    }
    let big_n = n * l;
    let mut out = Polynomial::zero(big_n);
    for mask in 0u32..(1 << l) {
        let images: Vec<Polynomial> = (0..n)
            .map(|j| {
                let mut p = Polynomial::zero(big_n);
                for i in 0..l {
                    if mask >> i & 1 == 1 {
                        p = &p + &Polynomial::var(big_n, i * n + j);
                    }
                }
                p
            })
            .collect();
        let term = g.compose(&images, big_n)?;
        out = if mask.count_ones() % 2 == 0 { &out + &term } else { &out - &term };
    }
    Ok(out)
}

/// Largest absolute coefficient `|U|`.
pub fn coefficient_height(p: &Polynomial) -> BigRational {
    p.terms().map(|(_, c)| c.abs()).max().unwrap_or_else(BigRational::zero)
}

/// `(|Γ_{ℓ,U}|, 2^ℓ ℓ^ℓ |U|)` for a form `U` of degree `ℓ`.
pub fn gamma_coefficient_bound(u: &Polynomial) -> Result<(BigRational, BigRational)> {
    let l = u
        .degree()
        .ok_or_else(|| Error::Validation("Γ coefficient bound of the zero form".into()))?;
    if !u.is_homogeneous() {
        return Err(Error::Validation(format!("{u} is not a form")));
    }
    let gp = gamma_polynomial(u, l as usize)?;
    let factor = BigInt::from(2u32).pow(l) * BigInt::from(l).pow(l);
    Ok((coefficient_height(&gp), coefficient_height(u) * BigRational::from_integer(factor)))
}

fn check_forms(forms: &[Polynomial]) -> Result<Option<(usize, u32)>> {
    let Some(first) = forms.first() else {
        return Ok(None);
    };
    let n = first.n();
    let l = first
        .degree()
        .ok_or_else(|| Error::Validation("zero form".into()))?;
    for f in forms {
        if f.n() != n {
            return Err(Error::Dimension { expected: n, got: f.n() });
        }
        if !f.is_homogeneous() || f.degree() != Some(l) {
            return Err(Error::Validation(format!("{f} is not a form of degree {l}")));
        }
    }
    if l < 2 {
        return Err(Error::Validation("M_ℓ needs forms of degree ℓ ≥ 2".into()));
    }
    Ok(Some((n, l)))
}

/// `[Γ_{ℓ,U_r}(x_1, …, x_{ℓ−1}, e_i)]_{r,i}`.
pub fn m_matrix(forms: &[Polynomial], tuple: &[Vec<i64>]) -> Result<Vec<Vec<BigRational>>> {
    let Some((n, l)) = check_forms(forms)? else {
        return Ok(Vec::new());
    };
    if tuple.len() != l as usize - 1 {
        return Err(Error::Dimension { expected: l as usize - 1, got: tuple.len() });
    }
    forms
        .iter()
        .map(|u| {
            (0..n)
                .map(|i| {
                    let mut pts = tuple.to_vec();
                    let mut e = vec![0i64; n];
                    e[i] = 1;
                    pts.push(e);
                    gamma_operator(u, &pts)
                })
                .collect()
        })
        .collect()
}

/// Entries of the `M_ℓ` matrix compiled as polynomials in the tuple.
struct MTable {
    entries: Vec<Vec<CompiledPoly>>,
}

impl MTable {
    fn new(forms: &[Polynomial], n: usize, l: usize) -> Result<Self> {
        let tn = n * (l - 1);
        let entries = forms
            .iter()
            .map(|u| {
                let gp = gamma_polynomial(u, l)?;
                (0..n)
                    .map(|i| {
                        let images: Vec<Polynomial> = (0..n * l)
                            .map(|v| {
                                if v < tn {
                                    Polynomial::var(tn, v)
                                } else if v - tn == i {
                                    Polynomial::constant(tn, BigRational::one())
                                } else {
                                    Polynomial::zero(tn)
                                }
                            })
                            .collect();
                        let p = gp.compose(&images, tn)?;
                        CompiledPoly::new(&p)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MTable { entries })
    }

    fn deficient(&self, x: &[i64]) -> Result<bool> {
        let m: Vec<Vec<i128>> = self
            .entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|p| p.eval_i128(x).ok_or_else(|| Error::Overflow("Γ entry".into())))
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(rank_i128(&m) < self.entries.len())
    }
}

/// Number of integer `(ℓ−1)`-tuples in `[−R₀, R₀]^{n(ℓ−1)}` lying on `M_ℓ`.
pub fn z_count(forms: &[Polynomial], r0: u64) -> Result<u64> {
    let Some((n, l)) = check_forms(forms)? else {
        return Ok(0);
    };
    if forms.iter().any(|f| !f.has_integer_coefficients()) {
        return Err(Error::Validation("z_count needs integer forms".into()));
    }
    let tn = n * (l as usize - 1);
    let side = 2 * r0 + 1;
    let cost = (side as f64).powi(tn as i32);
    if cost > Z_COUNT_GUARD {
        return Err(Error::budget(format!("z_R0 count at R0 = {r0}"), cost, Z_COUNT_GUARD));
    }
    let table = MTable::new(forms, n, l as usize)?;
    let r = r0 as i64;
    let per_first = |first: i64| -> Result<u64> {
        let mut x = vec![-r; tn];
        x[0] = first;
        let mut c = 0u64;
        loop {
            if table.deficient(&x)? {
                c += 1;
            }
            let mut i = 1;
            loop {
                if i >= tn {
                    return Ok(c);
                }
                x[i] += 1;
                if x[i] <= r {
                    break;
                }
                x[i] = -r;
                i += 1;
            }
        }
    };
    let parts: Vec<u64> = (-r..=r).into_par_iter().map(per_first).collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

#[derive(Clone, Debug, Serialize)]
pub struct GFit {
    pub degree: u32,
    pub r: usize,
    pub radii: Vec<u64>,
    pub counts: Vec<u64>,
    /// Slope of `log z` against `log(2R₀+1)`.
    pub slope: Option<f64>,
    /// `None` stands for `+∞`.
    pub fitted_g: Option<f64>,
    /// `None` stands for `+∞`.
    pub gamma: Option<f64>,
    pub gamma_prime: Option<f64>,
    pub note: String,
}

/// Fits `g_ℓ` from `z_{R₀}(M_ℓ)` at the given radii.
pub fn g_estimate(forms: &[Polynomial], radii: &[u64]) -> Result<GFit> {
    if radii.len() < 3 {
        return Err(Error::Validation(format!("g fit needs at least 3 radii, got {}", radii.len())));
    }
    let Some((n, l)) = check_forms(forms)? else {
        return Ok(GFit {
            degree: 0,
            r: 0,
            radii: radii.to_vec(),
            counts: vec![0; radii.len()],
            slope: None,
            fitted_g: None,
            gamma: Some(0.0),
            gamma_prime: None,
            note: "no forms of this degree: γ = 0".into(),
        });
    };
    let r = forms.len();
    let counts: Vec<u64> = radii.iter().map(|&r0| z_count(forms, r0)).collect::<Result<_>>()?;
    let factor = 2f64.powi(l as i32 - 1);
    let mk = |slope, g: Option<f64>, note: String| {
        let (gamma, gamma_prime) = match g {
            None => (Some(0.0), Some(0.0)),
            Some(g) if g <= 1e-9 => (None, None),
            Some(g) => (Some(factor * (l - 1) as f64 * r as f64 / g), Some(factor / g)),
        };
        GFit {
            degree: l,
            r,
            radii: radii.to_vec(),
            counts: counts.clone(),
            slope,
            fitted_g: g,
            gamma,
            gamma_prime,
            note,
        }
    };
    if counts.iter().all(|&c| c == 0) {
        return Ok(mk(None, None, "no lattice points on M_ℓ at any radius: g = +∞".into()));
    }
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&r0, &c)| (((2 * r0 + 1) as f64).ln(), (c as f64).ln()))
        .collect();
    let slope = least_squares_slope(&pts)
        .ok_or_else(|| Error::Validation("degenerate g fit: radii do not vary".into()))?;
    let g = n as f64 * (l - 1) as f64 - slope;
    let note = if g <= 1e-9 {
        "fitted g is zero within roundoff; a finite fit cannot separate g = 0 from a tiny g, so γ is reported as +∞".into()
    } else {
        format!("finite-radius fit over {} radii", radii.len())
    };
    Ok(mk(Some(slope), Some(g), note))
}

#[derive(Clone, Debug, Serialize)]
pub struct DifferencingCheck {
    pub p: u64,
    /// `|S'|²` from the direct sum.
    pub direct: f64,
    /// The differenced double sum.
    pub differenced: f64,
    pub residual: f64,
}

/// Integer polynomial `L·G` with `L` the common denominator.
fn integral_multiple(g: &Polynomial) -> Result<(CompiledPoly, i128)> {
    let l = g
        .denominator_lcm()
        .to_i128()
        .ok_or_else(|| Error::Overflow("denominator of G".into()))?;
    let scaled = g.scale(&BigRational::from_integer(BigInt::from(l)));
    Ok((CompiledPoly::new(&scaled)?, l))
}

/// Verifies `|S'|² = Σ_{h ∈ [−P,P]^n} Σ_{x, x+h ∈ [0,P]^n} e(G(x+h) − G(x))`
/// for `S' = Σ_{x ∈ [0,P]^n} e(G(x))` and rational `G`; the right side
/// evaluates the symbolically differenced polynomial.
pub fn differencing_identity_check(g: &Polynomial, p: u64) -> Result<DifferencingCheck> {
    let n = g.n();
    if n == 0 || n > 2 {
        return Err(Error::Validation(format!("differencing check needs n ∈ {{1, 2}}, got {n}")));
    }
    if p > 200 {
        return Err(Error::Validation(format!("differencing check needs P ≤ 200, got {p}")));
    }
    let pi = p as i64;
    // direct side
    let (gc, lg) = integral_multiple(g)?;
    let box_pts: Vec<Vec<i64>> = match n {
        1 => (0..=pi).map(|a| vec![a]).collect(),
        _ => (0..=pi).flat_map(|a| (0..=pi).map(move |b| vec![a, b])).collect(),
    };
    let mut s = ComplexSum::default();
    for x in &box_pts {
        let v = gc.eval_i128(x).ok_or_else(|| Error::Overflow("G(x)".into()))?;
        s.add(frac_phase(v, lg)?);
    }
    let direct = s.value().norm_sqr();

    // differenced side: D(x, h) = G(x + h) − G(x) in 2n variables
    let images: Vec<Polynomial> = (0..n)
        .map(|j| &Polynomial::var(2 * n, j) + &Polynomial::var(2 * n, n + j))
        .collect();
    let lifted: Vec<Polynomial> = (0..n).map(|j| Polynomial::var(2 * n, j)).collect();
    let dpoly = &g.compose(&images, 2 * n)? - &g.compose(&lifted, 2 * n)?;
    let (dc, ld) = integral_multiple(&dpoly)?;
    let shifts: Vec<Vec<i64>> = match n {
        1 => (-pi..=pi).map(|a| vec![a]).collect(),
        _ => (-pi..=pi).flat_map(|a| (-pi..=pi).map(move |b| vec![a, b])).collect(),
    };
    let partial: Vec<ComplexSum> = shifts
        .par_iter()
        .map(|h| {
            let mut acc = ComplexSum::default();
            let ranges: Vec<(i64, i64)> = h.iter().map(|&hj| (0.max(-hj), pi.min(pi - hj))).collect();
            let mut pt = vec![0i64; 2 * n];
            pt[n..].copy_from_slice(h);
            let mut run = |x: &[i64]| -> Result<()> {
                pt[..n].copy_from_slice(x);
                let v = dc.eval_i128(&pt).ok_or_else(|| Error::Overflow("ΔG".into()))?;
                acc.add(frac_phase(v, ld)?);
                Ok(())
            };
            match n {
                1 => {
                    for a in ranges[0].0..=ranges[0].1 {
                        run(&[a])?;
                    }
                }
                _ => {
                    for a in ranges[0].0..=ranges[0].1 {
                        for b in ranges[1].0..=ranges[1].1 {
                            run(&[a, b])?;
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = ComplexSum::default();
    for part in &partial {
        total.merge(part);
    }
    let d = total.value();
    Ok(DifferencingCheck {
        p,
        direct,
        differenced: d.re,
        residual: (d.re - direct).abs().max(d.im.abs()),
    })
}

/// `e(v / L)` with exact reduction of the numerator.
fn frac_phase(v: i128, l: i128) -> Result<num_complex::Complex64> {
    let q = u64::try_from(l).map_err(|_| Error::Overflow("phase denominator".into()))?;
    Ok(e_frac(v, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::rat;

    fn p(n: usize, t: &[(&[u32], i64)]) -> Polynomial {
        Polynomial::from_int_terms(n, t).unwrap()
    }

    fn r(v: i64) -> BigRational {
        rat(v)
    }

    #[test]
    fn gamma_of_square() {
        let g = p(1, &[(&[2], 1)]);
        for (a, b) in [(3, 5), (-2, 7), (0, 4)] {
            assert_eq!(gamma_operator(&g, &[vec![a], vec![b]]).unwrap(), r(2 * a * b));
        }
    }

    #[test]
    fn gamma_kills_low_degree_and_zero_points() {
        let g = p(2, &[(&[1, 1], 3), (&[1, 0], -2), (&[0, 0], 5)]);
        let pts = vec![vec![1, 2], vec![3, -1], vec![2, 2]];
        assert_eq!(gamma_operator(&g, &pts).unwrap(), r(0));
        let pts0 = vec![vec![4, 1], vec![0, 0]];
        assert_eq!(gamma_operator(&g, &pts0).unwrap(), r(0));
        assert!(gamma_operator(&g, &[vec![1, 2, 3]]).is_err());
    }

    #[test]
    fn m_matrix_example() {
        let f = p(2, &[(&[1, 1], 1)]);
        let m = m_matrix(&[f.clone()], &[vec![1, 0]]).unwrap();
        assert_eq!(m, vec![vec![r(0), r(1)]]);
        let z = m_matrix(&[f], &[vec![0, 0]]).unwrap();
        assert!(z[0].iter().all(|v| v.is_zero()));
    }

    #[test]
    fn z_counts() {
        let diag = p(3, &[(&[2, 0, 0], 1), (&[0, 2, 0], 1), (&[0, 0, 2], 1)]);
        for r0 in [0, 2, 4] {
            assert_eq!(z_count(&[diag.clone()], r0).unwrap(), 1);
        }
        let rank1 = p(2, &[(&[2, 0], 1)]);
        assert_eq!(z_count(&[rank1.clone()], 5).unwrap(), 11);
        assert_eq!(z_count(&[], 5).unwrap(), 0);
        // x1·x2 in n = 2: the bilinear form is nondegenerate
        assert_eq!(z_count(&[p(2, &[(&[1, 1], 1)])], 3).unwrap(), 1);
    }

    #[test]
    fn z_count_guard() {
        let cubic = p(4, &[(&[3, 0, 0, 0], 1), (&[0, 3, 0, 0], 1), (&[0, 0, 3, 0], 1), (&[0, 0, 0, 3], 1)]);
        assert!(matches!(z_count(&[cubic], 20), Err(Error::Budget { .. })));
    }

    #[test]
    fn g_fits() {
        let diag = p(3, &[(&[2, 0, 0], 1), (&[0, 2, 0], 1), (&[0, 0, 2], 1)]);
        let fit = g_estimate(&[diag], &[4, 8, 16]).unwrap();
        assert!((fit.fitted_g.unwrap() - 3.0).abs() < 1e-12);
        assert!((fit.gamma.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((fit.gamma_prime.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let rank1 = p(2, &[(&[2, 0], 1)]);
        let fit = g_estimate(&[rank1], &[4, 8, 16]).unwrap();
        assert!((fit.fitted_g.unwrap() - 1.0).abs() < 1e-12);
        let none = g_estimate(&[], &[1, 2, 3]).unwrap();
        assert_eq!(none.gamma, Some(0.0));
        assert!(g_estimate(&[p(2, &[(&[2, 0], 1)])], &[1, 2]).is_err());
    }

    #[test]
    fn differencing_identity() {
        let g = Polynomial::from_terms(1, [(vec![2], BigRational::new(3.into(), 10.into()))]).unwrap();
        let c = differencing_identity_check(&g, 50).unwrap();
        assert!(c.residual < 1e-7, "{c:?}");
        let zero = Polynomial::zero(1);
        let c = differencing_identity_check(&zero, 30).unwrap();
        assert!((c.direct - 31.0 * 31.0).abs() < 1e-9 && c.residual < 1e-9);
        let lin = Polynomial::from_terms(2, [(vec![1, 0], BigRational::new(1.into(), 7.into())), (vec![0, 1], BigRational::new(2.into(), 9.into()))]).unwrap();
        assert!(differencing_identity_check(&lin, 20).unwrap().residual < 1e-7);
    }

    #[test]
    fn coefficient_bound() {
        let u = p(3, &[(&[2, 1, 0], 3), (&[0, 0, 3], -2), (&[1, 1, 1], 1)]);
        let (lhs, rhs) = gamma_coefficient_bound(&u).unwrap();
        assert!(lhs <= rhs);
        assert!(lhs > r(0));
    }
}
