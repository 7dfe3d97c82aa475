use multicharge::numtheory::*;
use num_bigint::BigInt;
use proptest::prelude::*;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn brute_farey(n: u64) -> Vec<Rational> {
    let mut v: Vec<Rational> = Vec::new();
    for q in 1..=n {
        for p in 0..=q {
            if gcd(p, q) == 1 {
                v.push(Rational::new(p, q).unwrap());
            }
        }
    }
    v.sort();
    v
}

fn totient(m: u64) -> u64 {
    (1..=m).filter(|&k| gcd(k, m) == 1).count() as u64
}

#[test]
fn farey_matches_enumeration_and_length_formula() {
    for n in 1..=40 {
        let f = farey_sequence(n).unwrap();
        assert_eq!(f.elements(), brute_farey(n).as_slice(), "order {n}");
        let expected = 1 + (1..=n).map(totient).sum::<u64>();
        assert_eq!(f.len() as u64, expected);
    }
}

#[test]
fn farey_neighbour_identity_and_mediant_bound() {
    for n in 1..=50u64 {
        for w in farey_pairs(n).windows(2) {
            let ((p, q), (pp, qq)) = (w[0], w[1]);
            assert_eq!(pp * q - p * qq, 1);
            assert!(q + qq > n);
        }
    }
}

#[test]
fn nearest_farey_matches_scan() {
    for n in 1..=12u64 {
        let seq = brute_farey(n);
        for tq in 1..=30i64 {
            for tp in 0..=tq {
                let t = Rational::new(tp, tq).unwrap();
                let best = seq
                    .iter()
                    .min_by(|a, b| {
                        let da = (&t - a).abs();
                        let db = (&t - b).abs();
                        da.cmp(&db).then(a.denom().cmp(b.denom()))
                    })
                    .unwrap();
                assert_eq!(&nearest_farey(&t, n).unwrap(), best, "target {t} order {n}");
            }
        }
    }
}

#[test]
fn nearest_farey_large_order_near_zero() {
    let t = Rational::new(1, 1_000_001).unwrap();
    assert_eq!(nearest_farey(&t, 1_000_000).unwrap(), Rational::new(1, 1_000_000).unwrap());
    assert_eq!(nearest_farey(&t, 10).unwrap(), Rational::zero());
}

#[test]
fn coverage_randomized_grid() {
    let mut checked = 0;
    for n in 1..=200u64 {
        for (y_num, y_den) in [(1i64, 1i64), (3, 2), (-7, 4)] {
            let y = Rational::new(y_num, y_den).unwrap();
            // eps with floor(|y|/eps) = n: |y|/eps = n + f for a few f in [0, 1).
            for f in [Rational::zero(), Rational::new(1, 3).unwrap(), Rational::new(99, 100).unwrap()] {
                let eps = &y.abs() / &(Rational::integer(n) + f);
                let rep = verify_coverage(n, &eps, &y).unwrap();
                assert!(rep.is_clean(), "order {n}");
                assert!(rep.min_overlap > Rational::zero());
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 1800);
}

fn brute_best(x: &Rational, max_den: u64) -> Rational {
    let mut best: Option<Rational> = None;
    for q in 1..=max_den {
        let qb = Rational::integer(q);
        let p = (x * &qb).floor();
        for cand in [p.clone(), p + BigInt::from(1)] {
            let r = Rational::new(cand, q).unwrap();
            best = Some(match best {
                None => r,
                Some(b) => {
                    let (db, dr) = ((&b - x).abs(), (&r - x).abs());
                    if dr < db || (dr == db && r.denom() < b.denom()) { r } else { b }
                }
            });
        }
    }
    best.unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bezout_identity_and_minimality(u in 1u64..1_000_000, v in 1u64..1_000_000) {
        let g = gcd(u, v);
        let (u, v) = (u / g, v / g);
        let (a, b) = bezout(u, v).unwrap();
        prop_assert_eq!(u as i128 * a as i128 + v as i128 * b as i128, 1);
        if v > 1 {
            prop_assert!(a.unsigned_abs() < v);
            prop_assert!(b.unsigned_abs() < u.max(1) || u == 1);
        }
    }

    #[test]
    fn bezout_rejects_common_factors(u in 1u64..10_000, v in 1u64..10_000, k in 2u64..50) {
        prop_assert!(bezout(u * k, v * k).is_err());
    }

    #[test]
    fn float_to_rational_is_best_approximation(x in -3.0f64..3.0, max_den in 1u64..60) {
        let got = float_to_rational(x, max_den).unwrap();
        let exact = Rational::from_f64(x).unwrap();
        let want = brute_best(&exact, max_den);
        prop_assert_eq!((&got - &exact).abs(), (&want - &exact).abs());
        prop_assert!(got.denom() <= &BigInt::from(max_den));
    }

    #[test]
    fn decimal_strings_parse_exactly(int in -10_000i64..10_000, frac in 0u32..1_000_000) {
        let s = format!("{int}.{frac:06}");
        let r: Rational = s.parse().unwrap();
        let sign = if s.starts_with('-') { -1 } else { 1 };
        let want = Rational::integer(int) + Rational::new(sign * frac as i64, 1_000_000).unwrap();
        prop_assert_eq!(r, want);
    }

    #[test]
    fn interval_membership_bounds_the_combination(
        cp in 0u64..20, cq in 1u64..20, eps_m in 1u64..1000, x_off in -999i64..999
    ) {
        prop_assume!(cp <= cq && gcd(cp, cq) == 1);
        let center = Rational::new(cp, cq).unwrap();
        let eps = Rational::new(eps_m, 1000).unwrap();
        let y = Rational::one();
        let iv = farey_interval(&center, &eps, &y).unwrap();
        let ratio = &center + &(&iv.half_width * &Rational::new(x_off, 1000).unwrap());
        if iv.contains(&ratio) {
            // x = ratio * y; |x v - y u| < eps.
            let v = Rational::integer(center.denom().clone());
            let u = Rational::integer(center.numer().clone());
            let comb = (&(&ratio * &v) - &u).abs();
            prop_assert!(comb < eps);
        }
    }

    #[test]
    fn robust_select_never_returns_a_wrong_pair(
        num in -3_000_000i64..3_000_000, den in 1i64..1_000_000,
        yn in -40i64..40, yd in 1i64..10,
        eps_m in 1i64..1000, delta_m in 0i64..1000, off in -1000i64..=1000
    ) {
        prop_assume!(yn != 0);
        let ratio = Rational::new(num, den).unwrap();
        let y = Rational::new(yn, yd).unwrap();
        let eps = Rational::new(eps_m, 1000).unwrap();
        let delta = Rational::new(delta_m, 1_000_000).unwrap();
        let measured = &ratio + &(&delta * &Rational::new(off, 1000).unwrap());
        match robust_select(&measured, &delta, &eps, &y).unwrap() {
            RobustSelection::Selected { dn1, dn2, .. } => {
                let x = &ratio * &y;
                let comb = (&(&x * &Rational::integer(dn1)) + &(&y * &Rational::integer(dn2))).abs();
                prop_assert!(comb < eps, "|x dn1 + y dn2| = {} for ({}, {})", comb, dn1, dn2);
            }
            RobustSelection::RespecifyRequired { .. } => {}
        }
    }
}

#[test]
fn coverage_fast_and_exact_paths_agree() {
    // A huge-denominator epsilon forces the exact path; its reduced twin
    // takes the integer path. Both must report the same minimum overlap.
    let y = Rational::one();
    for n in [1u64, 7, 30] {
        let eps_small = Rational::new(2, 2 * n as i64 + 1).unwrap();
        let big = BigInt::from(1u64 << 50);
        let eps_big = &eps_small
            + &Rational::new(BigInt::from(1), &big * &big).unwrap();
        let a = verify_coverage(n, &eps_small, &y).unwrap();
        let b = verify_coverage(n, &eps_big, &y).unwrap();
        assert!(a.is_clean() && b.is_clean());
        assert!(b.min_overlap > a.min_overlap);
        assert!((b.min_overlap.to_f64() - a.min_overlap.to_f64()).abs() < 1e-20);
    }
}
