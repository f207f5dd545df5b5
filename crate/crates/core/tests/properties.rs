//! Property suites for the algebraic and numerical invariants.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;

use primesys::arith::{e_frac, euler_phi, psi_segmented, PrimeTable};
use primesys::counting::{weighted_count_with, BoxKind, Weight};
use primesys::harness::{arc_spec, predict, PredictOptions};
use primesys::integral::{oscillatory_i, shell_mu_infty, RealSystem};
use primesys::invariants::{linear_birch_rank, rho};
use primesys::local::{b_of_q, gauss_sum, hensel_unit_check, mu_p, HenselVerdict, LocalOptions};
use primesys::normalize::{reduce_to_normal_form, verify_normal_form};
use primesys::polysys::{parse_system, serialize_system, Monomial, MonomialOrder, PolySystem, Polynomial};
use primesys::weyl::gamma_operator_rational;
use primesys::Error;

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn monomial(n: usize, max_deg: u32) -> impl Strategy<Value = Monomial> {
    prop::collection::vec(0..=max_deg, n).prop_map(Monomial::new)
}

/// Nonzero integer polynomial in `n` variables with terms of degree ≤ `deg`.
fn poly(n: usize, deg: u32, coeff: i64) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0..=deg, n), -coeff..=coeff), 1..6).prop_filter_map(
        "zero or over-degree polynomial",
        move |terms| {
            let mut p = Polynomial::zero(n);
            for (e, c) in terms {
                if e.iter().sum::<u32>() <= deg {
                    p.add_term(Monomial::new(e), rat(c));
                }
            }
            (!p.is_zero()).then_some(p)
        },
    )
}

fn homogeneous(n: usize, deg: u32, coeff: i64) -> impl Strategy<Value = Polynomial> {
    poly(n, deg, coeff).prop_filter_map("no top-degree part", move |p| {
        let h = p.homogeneous_part(deg);
        (!h.is_zero()).then_some(h)
    })
}

fn system(max_n: usize, max_deg: u32) -> impl Strategy<Value = PolySystem> {
    system_with(max_n, max_deg, 3)
}

/// Systems of non-constant equations, at most `max_r` of them.
fn system_with(max_n: usize, max_deg: u32, max_r: usize) -> impl Strategy<Value = PolySystem> {
    (1..=max_n).prop_flat_map(move |n| {
        let eq = poly(n, max_deg, 5).prop_filter("constant equation", |p| p.degree() != Some(0));
        prop::collection::vec(eq, 1..=max_r).prop_map(move |ps| PolySystem::new(n, ps).unwrap())
    })
}

fn point(n: usize, r: i64) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-r..=r, n)
}

fn rational_point(n: usize) -> impl Strategy<Value = Vec<BigRational>> {
    prop::collection::vec((-9i64..=9, 1i64..=5), n)
        .prop_map(|v| v.into_iter().map(|(a, b)| BigRational::new(a.into(), b.into())).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn order_is_total_multiplicative_and_degree_first(
        a in monomial(3, 4), b in monomial(3, 4), c in monomial(3, 4),
        perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
    ) {
        let ord = MonomialOrder::with_priority(perm).unwrap();
        let ab = ord.cmp(&a, &b).unwrap();
        prop_assert_eq!(ab, ord.cmp(&b, &a).unwrap().reverse());
        prop_assert_eq!(ab == Ordering::Equal, a == b);
        prop_assert_eq!(ord.cmp(&a.mul(&c), &b.mul(&c)).unwrap(), ab);
        if a.degree() != b.degree() {
            prop_assert_eq!(ab, a.degree().cmp(&b.degree()));
        }
        if ab == Ordering::Less && ord.cmp(&b, &c).unwrap() == Ordering::Less {
            prop_assert_eq!(ord.cmp(&a, &c).unwrap(), Ordering::Less);
        }
    }

    #[test]
    fn evaluation_is_a_ring_homomorphism(p in poly(3, 3, 9), q in poly(3, 3, 9), x in point(3, 7)) {
        let (px, qx) = (p.evaluate(&x).unwrap(), q.evaluate(&x).unwrap());
        prop_assert_eq!((&p + &q).evaluate(&x).unwrap(), &px + &qx);
        prop_assert_eq!((&p - &q).evaluate(&x).unwrap(), &px - &qx);
        prop_assert_eq!((&p * &q).evaluate(&x).unwrap(), &px * &qx);
        prop_assert_eq!((-&p).evaluate(&x).unwrap(), -px);
    }

    #[test]
    fn homogeneous_parts_partition(p in poly(3, 4, 9)) {
        let mut sum = Polynomial::zero(3);
        for j in 0..=4 {
            sum = &sum + &p.homogeneous_part(j);
        }
        prop_assert_eq!(sum, p);
    }

    #[test]
    fn json_round_trip(s in system(4, 3)) {
        let text = serialize_system(&s);
        prop_assert_eq!(parse_system(&text).unwrap(), s);
    }

    #[test]
    fn normal_form_is_idempotent(s in system(3, 2)) {
        let ord = MonomialOrder::grlex(s.n());
        let nf = match reduce_to_normal_form(&s, &ord) {
            Ok(nf) => nf,
            Err(Error::RankDeficient { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert!(verify_normal_form(&nf).all_hold());
        let again = reduce_to_normal_form(&nf.base(), &ord).unwrap();
        prop_assert!(verify_normal_form(&again).all_hold());
        let lead = |f: &primesys::normalize::NormalForm| -> Vec<(u32, Monomial, BigInt)> {
            f.entries.iter().map(|e| (e.degree, e.leading.clone(), e.c.clone())).collect()
        };
        prop_assert_eq!(lead(&again), lead(&nf));
        let (a, b) = (again.base(), nf.base());
        prop_assert_eq!(a.polys().collect::<Vec<_>>(), b.polys().collect::<Vec<_>>());
    }

    #[test]
    fn rho_increases(d in 2u32..=5, l in 2u32..=4, t in 1u64..40) {
        prop_assume!(l <= d);
        prop_assert!(rho(d, l, t + 1).unwrap() > rho(d, l, t).unwrap());
    }

    #[test]
    fn restriction_moves_linear_birch_rank_within_bounds(
        forms in prop::collection::vec(homogeneous(4, 1, 3), 1..=3),
        j in 0usize..4,
    ) {
        let full = linear_birch_rank(&forms, 1e9).unwrap();
        let zero = Polynomial::zero(4);
        let restricted: Vec<Polynomial> = forms.iter().map(|f| f.substitute(j, &zero).unwrap()).collect();
        let sub = linear_birch_rank(&restricted, 1e9).unwrap();
        prop_assert!(sub <= full);
        prop_assert!(sub + forms.len() + 1 >= full);
    }

    #[test]
    fn gamma_is_additive_in_the_form(
        g in homogeneous(2, 3, 5), h in homogeneous(2, 3, 5),
        pts in prop::collection::vec(rational_point(2), 3),
    ) {
        let lhs = gamma_operator_rational(&(&g + &h), &pts).unwrap();
        let rhs = gamma_operator_rational(&g, &pts).unwrap() + gamma_operator_rational(&h, &pts).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn gamma_is_symmetric_and_kills_low_degree(
        g in homogeneous(3, 3, 5), low in poly(3, 2, 5),
        pts in prop::collection::vec(rational_point(3), 3),
        perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
    ) {
        let permuted: Vec<Vec<BigRational>> = perm.iter().map(|&i| pts[i].clone()).collect();
        prop_assert_eq!(gamma_operator_rational(&g, &pts).unwrap(), gamma_operator_rational(&g, &permuted).unwrap());
        prop_assert!(gamma_operator_rational(&low, &pts).unwrap().is_zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn exponential_sums_obey_the_trivial_bound(
        s in system(2, 2), q in 1u64..=12, seed in any::<u64>(),
    ) {
        let a: Vec<i64> = (0..s.big_r()).map(|r| ((seed >> (8 * r)) % 97) as i64).collect();
        let v = gauss_sum(&s, &a, q, 1e7).unwrap();
        prop_assert!(v.norm() <= (euler_phi(q) as f64).powi(s.n() as i32) * (1.0 + 1e-12));
    }

    #[test]
    fn local_factor_is_multiplicative(s in system_with(2, 2, 2), q in 1u64..=36, q2 in 1u64..=36) {
        prop_assume!(num_integer::gcd(q, q2) == 1 && q * q2 <= 36 * 36);
        let b = b_of_q(&s, q, 1e9).unwrap() * b_of_q(&s, q2, 1e9).unwrap();
        let joint = b_of_q(&s, q * q2, 1e9).unwrap();
        prop_assert!((joint - b).norm() < 1e-9 * b.norm().max(1.0), "{} vs {}", joint, b);
    }

    #[test]
    fn hensel_points_give_positive_density(s in system(3, 2), pi in 0usize..4) {
        let p = [2u64, 3, 5, 7][pi];
        let check = hensel_unit_check(&s, p, 1e7).unwrap();
        if check.verdict == HenselVerdict::Yes {
            let opts = LocalOptions { t_max: 3, ..LocalOptions::default() };
            prop_assert!(mu_p(&s, p, &opts).unwrap().mu_p > 0.0);
        }
    }

    #[test]
    fn prime_counts_are_bounded_by_prime_power_counts_and_grow(s in system(3, 2), x in 2u64..60) {
        let table = PrimeTable::new(x + 10).unwrap();
        let m = |w: Weight, x: u64| weighted_count_with(&s, x, w, BoxKind::Positive, Some(&table), 1e8).unwrap();
        let (full, primes, next) = (m(Weight::Mangoldt, x), m(Weight::PrimeLog, x), m(Weight::Mangoldt, x + 10));
        prop_assert!(primes.weighted_sum >= 0.0);
        prop_assert!(primes.weighted_sum <= full.weighted_sum + 1e-9);
        prop_assert!(next.weighted_sum >= full.weighted_sum - 1e-9);
        if full.raw_solutions == 0 {
            prop_assert_eq!(full.weighted_sum, 0.0);
        }
    }

    #[test]
    fn pivoted_counts_match_the_full_grid(s in system(3, 2), x in 1u64..14) {
        let table = PrimeTable::new(x).unwrap();
        let got = weighted_count_with(&s, x, Weight::Mangoldt, BoxKind::Positive, Some(&table), 1e8).unwrap();
        // brute force over the whole box
        let n = s.n();
        let mut want = 0.0;
        let mut raw = 0u64;
        let mut pt = vec![0i64; n];
        loop {
            let w: f64 = pt.iter().map(|&v| table.von_mangoldt(v as u64)).product();
            if w > 0.0 && s.is_solution(&pt).unwrap() {
                want += w;
                raw += 1;
            }
            let mut i = 0;
            while i < n && pt[i] == x as i64 {
                pt[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
            pt[i] += 1;
        }
        prop_assert!((got.weighted_sum - want).abs() <= 1e-9 * want.max(1.0));
        prop_assert_eq!(got.raw_solutions, raw);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn oscillatory_integral_is_bounded(s in system(2, 2), tau in -3.0f64..3.0, seed in any::<u64>()) {
        let f = RealSystem::leading(&s);
        let taus = vec![tau; s.big_r()];
        let v = oscillatory_i(&f, &taus, 1 << 12, seed).unwrap();
        prop_assert!(v.value().norm() <= 1.0 + 3.0 * v.stderr + 1e-12);
        let zero = oscillatory_i(&f, &vec![0.0; s.big_r()], 1 << 10, seed).unwrap();
        prop_assert_eq!((zero.re, zero.im), (1.0, 0.0));
    }

    #[test]
    fn shell_estimate_ignores_schedule_scale(k in 0.5f64..1.5, seed in any::<u64>()) {
        let s = parse_system(r#"{"n":3,"polys":[{"degree":1,"terms":[
            {"exp":[1,0,0],"c":"1"},{"exp":[0,1,0],"c":"1"},{"exp":[0,0,1],"c":"1"},{"exp":[0,0,0],"c":"-1"}]}]}"#).unwrap();
        let f = RealSystem::scaled(&s, 1.0);
        let base = shell_mu_infty(&f, &[0.02, 0.01, 0.005], 1 << 18, seed).unwrap();
        let eps: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|e| e * k).collect();
        let scaled = shell_mu_infty(&f, &eps, 1 << 18, seed).unwrap();
        // 16 shifts: the standardized gap is t-distributed with 15 degrees of freedom
        let bar = 7.0 * (base.stderr.powi(2) + scaled.stderr.powi(2)).sqrt();
        prop_assert!(base.value >= 0.0 && scaled.value >= 0.0);
        prop_assert!((base.value - scaled.value).abs() <= bar.max(0.01), "{} vs {} (bar {})", base.value, scaled.value, bar);
        prop_assert!(base.confidence_interval.0 <= base.value && base.value <= base.confidence_interval.1);
    }

    #[test]
    fn predicted_is_c_f_times_the_power_of_x(x in 50u64..5000) {
        let s = parse_system(r#"{"n":3,"polys":[{"degree":1,"terms":[
            {"exp":[1,0,0],"c":"1"},{"exp":[0,1,0],"c":"1"},{"exp":[0,0,1],"c":"-1"}]}]}"#).unwrap();
        let opts = PredictOptions { p_max: 50, samples: 1 << 17, ..PredictOptions::default() };
        let pr = predict(&s, x, &opts).unwrap();
        let expect = pr.sigma.sigma_truncated * pr.mu_infty.value * (x as f64).powi(2);
        prop_assert_eq!(pr.c_f, pr.sigma.sigma_truncated * pr.mu_infty.value);
        prop_assert!((pr.predicted - expect).abs() <= 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn disjoint_arcs_do_not_overlap(e in 20u32..60, c in 0.5f64..2.0) {
        let s = parse_system(r#"{"n":2,"polys":[{"degree":2,"terms":[{"exp":[2,0],"c":"1"},{"exp":[0,2],"c":"-1"}]}]}"#).unwrap();
        let x = 1u64 << e;
        let spec = arc_spec(&s, x, c);
        prop_assume!(spec.disjoint && spec.q_max <= 400);
        let width = spec.widths.iter().map(|w| w.1).fold(0.0, f64::max);
        let mut fracs: Vec<f64> = Vec::new();
        for q in 1..=spec.q_max {
            for a in 0..q {
                if num_integer::gcd(a, q) == 1 {
                    fracs.push(a as f64 / q as f64);
                }
            }
        }
        fracs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in fracs.windows(2) {
            prop_assert!(w[1] - w[0] > 2.0 * width);
        }
    }
}

#[test]
fn additive_characters_are_orthogonal() {
    for q in 1..=100u64 {
        for m in -3 * q as i128..=3 * q as i128 {
            let s: num_complex::Complex64 = (0..q as i128).map(|a| e_frac(m * a, q)).sum();
            let want = if m % q as i128 == 0 { q as f64 } else { 0.0 };
            assert!((s.re - want).abs() < 1e-9 && s.im.abs() < 1e-9, "q={q} m={m} {s}");
        }
    }
}

#[test]
fn chebyshev_psi_is_near_x() {
    for x in [10_000u64, 31_623, 100_000, 316_228, 1_000_000] {
        let r = psi_segmented(x) / x as f64;
        assert!((0.9..=1.1).contains(&r), "ψ({x})/{x} = {r}");
    }
}

