use multicharge::bathtrade::*;
use multicharge::gge::{eigenstate_charges, ChargeSet, InverseTemperatures};
use multicharge::qcore::HermitianOperator;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn accept_example() -> BathSpec {
    BathSpec::new(vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], 1.0, 1.5).unwrap()
}

fn random_bath(rng: &mut ChaCha8Rng) -> BathSpec {
    loop {
        let levels = (0..3).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let spec = BathSpec::new(levels, rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)).unwrap();
        if validate_bath(&spec).accepted() {
            return spec;
        }
    }
}

fn random_occupation(rng: &mut ChaCha8Rng, copies: u64) -> Vec<u64> {
    let mut n = vec![0u64; 3];
    for _ in 0..copies {
        n[rng.random_range(0..3)] += 1;
    }
    n
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10
}

#[test]
fn analytic_step_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut fixtures = vec![(accept_example(), OccupationPair::new(vec![1, 1, 1], vec![0, 2, 1]).unwrap())];
    // Mostly small copy numbers, with a handful at the n = 6 ceiling.
    for i in 0..59 {
        let copies = match i % 10 {
            0 => 6,
            1 | 2 => 5,
            3 | 4 | 5 => 4,
            _ => 1 + (i % 3) as u64,
        };
        let spec = random_bath(&mut rng);
        let pair = OccupationPair::new(random_occupation(&mut rng, copies), random_occupation(&mut rng, copies)).unwrap();
        fixtures.push((spec, pair));
    }
    for (k, (spec, pair)) in fixtures.iter().enumerate() {
        let o = trade_step(spec, pair).unwrap();
        let d = dense_oracle_trade(spec, pair).unwrap();
        let sizes = pair.class_sizes().unwrap();
        assert_eq!(d.multiplicity as u128, sizes.0.min(sizes.1), "fixture {k}");
        assert!(close(o.delta_q(), d.delta_q), "fixture {k}: dq {} vs {}", o.delta_q(), d.delta_q);
        assert!(close(o.d_a(), d.d_a), "fixture {k}: dA {} vs {}", o.d_a(), d.d_a);
        assert!(close(o.d_b(), d.d_b), "fixture {k}: dB {} vs {}", o.d_b(), d.d_b);
        assert!(close(o.d_f(), d.d_f), "fixture {k}: dF {} vs {}", o.d_f(), d.d_f);
        assert!(d.d_s.abs() <= 1e-10);
    }
}

#[test]
fn dense_oracle_refuses_oversized_baths() {
    let pair = OccupationPair::new(vec![8, 1, 1], vec![7, 2, 1]).unwrap();
    assert!(dense_oracle_trade(&accept_example(), &pair).is_err());
}

#[test]
fn ten_copy_step_matches_population_sum() {
    // Too large for the dense oracle; sum over the 3^10 basis states directly.
    let spec = accept_example();
    let pair = OccupationPair::new(vec![8, 1, 1], vec![7, 2, 1]).unwrap();
    let o = trade_step(&spec, &pair).unwrap();
    let q = spec.populations();
    let (mut wn, mut wnp, mut cn, mut cnp) = (0.0, 0.0, 0usize, 0usize);
    for mut idx in 0..3usize.pow(10) {
        let mut occ = [0u64; 3];
        let mut w = 1.0;
        for _ in 0..10 {
            occ[idx % 3] += 1;
            w *= q[idx % 3];
            idx /= 3;
        }
        if occ == [8, 1, 1] {
            wn = w;
            cn += 1;
        }
        if occ == [7, 2, 1] {
            wnp = w;
            cnp += 1;
        }
    }
    assert_eq!((cn, cnp), (90, 360));
    assert!((o.delta_q() - (wn - wnp)).abs() <= 1e-15);
    assert!((o.d_a() - (wn - wnp)).abs() <= 1e-15);
}

#[test]
fn accept_example_plans_reach_target_cheaply() {
    for charge in [TradeCharge::A, TradeCharge::B] {
        let goal = TradeGoal { charge, amount: 1.0, direction: Direction::Any };
        let plan = plan_trade(&accept_example(), goal, 1e-3).unwrap();
        let moved = match charge {
            TradeCharge::A => plan.total_da,
            TradeCharge::B => plan.total_db,
        };
        assert!(moved.abs() >= 1.0, "{charge:?}: moved {moved}");
        assert!(plan.total_df > 0.0 && plan.total_df <= 1e-3, "{charge:?}: cost {}", plan.total_df);
        for s in &plan.steps {
            assert!(s.outcome.satisfies_cost_bound(1.5));
            assert!(s.outcome.dq_unit * 1.5 > 0.0);
        }
    }
}

#[test]
fn accept_example_a_target_needs_dn1_2048() {
    let goal = TradeGoal { charge: TradeCharge::A, amount: 1.0, direction: Direction::Any };
    let plan = plan_trade(&accept_example(), goal, 1e-3).unwrap();
    let step = &plan.steps[0];
    assert_eq!((step.outcome.dn1, step.outcome.dn2), (2048, -1365));
}

#[test]
fn directions_are_honoured() {
    let spec = accept_example();
    for charge in [TradeCharge::A, TradeCharge::B] {
        for (direction, sign) in [(Direction::Increase, 1.0), (Direction::Decrease, -1.0)] {
            let goal = TradeGoal { charge, amount: 0.5, direction };
            let plan = plan_trade(&spec, goal, 1e-2).unwrap();
            let moved = match charge {
                TradeCharge::A => plan.total_da,
                TradeCharge::B => plan.total_db,
            };
            assert!(moved * sign >= 0.5, "{charge:?} {direction:?}: {moved}");
            assert!(plan.total_df > 0.0 && plan.total_df <= 1e-2);
            let y = 1.5;
            assert!(plan.steps.iter().all(|s| s.outcome.satisfies_cost_bound(y)));
        }
    }
}

#[test]
fn role_swap_when_y_vanishes() {
    // Level 2 shares level 0's population, so the protocol runs on levels 0 and 1 swapped.
    let spec = BathSpec::new(vec![(0.0, 0.0), (1.0, 0.5), (1.0, -1.0)], 1.0, 1.0).unwrap();
    let (x, y) = xy(&spec);
    assert!(x != 0.0 && y == 0.0);
    let goal = TradeGoal { charge: TradeCharge::A, amount: 1.0, direction: Direction::Any };
    let plan = plan_trade(&spec, goal, 1e-3).unwrap();
    assert!(plan.total_da.abs() >= 1.0 && plan.total_df <= 1e-3);
    let step = &plan.steps[0];
    let direct = trade_step(&spec, &step.pair).unwrap();
    assert_eq!((direct.dn1, direct.dn2), (step.outcome.dn1, step.outcome.dn2));
    assert!((direct.gap - step.outcome.gap).abs() < 1e-9);
}

#[test]
fn noncommuting_bath_from_eigenstates() {
    let charges = ChargeSet::unnamed(vec![HermitianOperator::spin1_x(), HermitianOperator::spin1_z()]).unwrap();
    let betas = InverseTemperatures::new(vec![0.7, 0.4]).unwrap();
    let states = eigenstate_charges(&charges, &betas).unwrap();
    let spec = BathSpec::from_eigenstates(&states, 0.7, 0.4).unwrap();
    // Eigenstates of a spin-1 component sit on a line through the origin, so
    // averages are affine; this bath is rejected rather than silently used.
    assert!(!validate_bath(&spec).not_affine);
    let pops = spec.populations();
    for (p, s) in pops.iter().zip(&states) {
        assert!((p - s.population).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dq_shrinks_with_spectator_copies(dn1 in 1i64..40, dn2 in -40i64..40, n0 in 0u64..50, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_bath(&mut rng);
        let q0 = spec.populations()[0];
        let a = trade_step(&spec, &OccupationPair::minimal(3, dn1, dn2, n0).unwrap()).unwrap();
        let b = trade_step(&spec, &OccupationPair::minimal(3, dn1, dn2, n0 + 1).unwrap()).unwrap();
        prop_assert!((b.ln_weight - a.ln_weight - q0.ln()).abs() < 1e-9);
        prop_assert!(b.ln_abs_delta_q() < a.ln_abs_delta_q() || a.dq_unit == 0.0);
        prop_assert!((a.dq_unit - b.dq_unit).abs() == 0.0);
    }

    #[test]
    fn cost_bound_for_chosen_m(dn1 in 1u64..100_000, seed in any::<u64>(), flip in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_bath(&mut rng);
        let (x, y) = xy(&spec);
        prop_assume!(y != 0.0);
        let m = choose_m(x, y, dn1, flip).unwrap();
        let o = trade_step(&spec, &OccupationPair::minimal(3, dn1 as i64, -m, 0).unwrap()).unwrap();
        prop_assert!(o.gap == 0.0 || o.satisfies_cost_bound(y));
        prop_assert!((o.gap - (x * dn1 as f64 - y * m as f64)).abs() <= 1e-9 * (x.abs() * dn1 as f64 + 1.0));
    }

    #[test]
    fn free_entropy_is_beta_weighted_charge(dn1 in -30i64..30, dn2 in -30i64..30, n0 in 0u64..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_bath(&mut rng);
        let (ba, bb) = spec.betas();
        let o = trade_step(&spec, &OccupationPair::minimal(3, dn1, dn2, n0).unwrap()).unwrap();
        let lhs = o.d_f();
        let rhs = ba * o.d_a() + bb * o.d_b();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (lhs.abs() + rhs.abs()) + 1e-300);
        prop_assert!(lhs >= 0.0);
    }

    #[test]
    fn ratio_grows_with_dn1(k in 1u32..12) {
        let spec = accept_example();
        let (x, y) = xy(&spec);
        let step = |dn1: u64| {
            let m = choose_m(x, y, dn1, false).unwrap();
            trade_step(&spec, &OccupationPair::minimal(3, dn1 as i64, -m, 0).unwrap()).unwrap()
        };
        let dn1 = 1u64 << k;
        prop_assert!(step(dn1).ratio_a() >= dn1 as f64 / y);
    }
}
