use multicharge::battery::*;
use multicharge::error::Error;
use multicharge::gge::{free_entropy, gibbs_state, ChargeSet, InverseTemperatures};
use multicharge::qcore::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Joint levels of a qubit (x) qutrit with small integer charges.
fn qubit_qutrit_levels() -> Vec<(f64, f64)> {
    let sys = [(0.0, 0.0), (1.0, -1.0)];
    let bath = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
    sys.iter().flat_map(|s| bath.iter().map(move |b| (s.0 + b.0, s.1 + b.1))).collect()
}

/// Ladder wide enough for a Gaussian of `width` rungs plus the guard band.
fn gaussian_weight(width: f64, guard: usize) -> WeightState {
    let half = (11.0 * width).ceil() as usize + guard + 2;
    let ladder = Ladder::new(2 * half + 1, 1.0, -(half as f64)).unwrap();
    WeightState::gaussian(ladder, half as f64, width).unwrap()
}

fn lift_for(u: &UnitaryOperator, levels: &[(f64, f64)], wa: &WeightState, wb: &WeightState) -> LiftedUnitary {
    lift_unitary(u, levels, *wa.ladder(), *wb.ladder()).unwrap()
}

fn product_state(rng: &mut ChaCha8Rng) -> DensityMatrix {
    let s = DensityMatrix::random(2, rng);
    let b = DensityMatrix::random(3, rng);
    tensor(&[&s, &b]).unwrap()
}

#[test]
fn random_lift_conserves_strictly() {
    let levels = qubit_qutrit_levels();
    let ladder = Ladder::new(64, 1.0, 0.0).unwrap();
    for seed in 0..20 {
        let u = UnitaryOperator::haar(6, &mut ChaCha8Rng::seed_from_u64(seed));
        let l = lift_unitary(&u, &levels, ladder, ladder).unwrap();
        let (da, db) = l.conservation_defects();
        assert!(da <= 1e-10 && db <= 1e-10, "seed {seed}: {da:e} {db:e}");
        let (ta, tb) = l.translation_defects().unwrap();
        assert!(ta <= 1e-10 && tb <= 1e-10, "seed {seed}: {ta:e} {tb:e}");
        assert!(l.base_unitary().unwrap().unitarity_defect() < 1e-12);
    }
}

#[test]
fn dense_commutators_on_interior_columns() {
    // Qubit (x) qubit, shifts of at most one rung, ladders of 12.
    let levels = vec![(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)];
    let n = 12;
    let ladder = Ladder::new(n, 1.0, 0.0).unwrap();
    let u = UnitaryOperator::haar(4, &mut ChaCha8Rng::seed_from_u64(11));
    let l = lift_unitary(&u, &levels, ladder, ladder).unwrap();
    assert_eq!(l.max_shifts(), (1, 1));
    let m = l.dense_matrix().unwrap();
    let dim = 4 * n * n;
    assert!(max_abs(&(&m * m.adjoint() - CMatrix::identity(dim, dim))) < 1e-12);

    let digits = |k: usize| (k / (n * n), (k / n) % n, k % n);
    let a_tot = |k: usize| levels[digits(k).0].0 + ladder.value(digits(k).1);
    let b_tot = |k: usize| levels[digits(k).0].1 + ladder.value(digits(k).2);
    let (ga, gb) = l.guards();
    let interior = |k: usize| {
        let (_, ka, kb) = digits(k);
        ka >= ga && ka < n - ga && kb >= gb && kb < n - gb
    };
    let mut inside = (0.0f64, 0.0f64);
    let mut edge = 0.0f64;
    for col in 0..dim {
        for row in 0..dim {
            let ca = m[(row, col)] * (a_tot(row) - a_tot(col));
            let cb = m[(row, col)] * (b_tot(row) - b_tot(col));
            if interior(col) {
                inside.0 += ca.norm_sqr();
                inside.1 += cb.norm_sqr();
            } else {
                edge += ca.norm_sqr() + cb.norm_sqr();
            }
        }
    }
    assert!(inside.0.sqrt() <= 1e-10 && inside.1.sqrt() <= 1e-10);
    // Wrapping at the seam breaks conservation, which is why weights keep clear of it.
    assert!(edge.sqrt() > 1.0);

    let shift_a = tensor(&[
        &UnitaryOperator::identity(4),
        &UnitaryOperator::new(ShiftOperator::new(&ladder, 1).matrix()).unwrap(),
        &UnitaryOperator::identity(n),
    ])
    .unwrap();
    let g = shift_a.matrix();
    assert!(max_abs(&(&m * g - g * &m)) < 1e-12);
}

#[test]
fn u1_shifts_follow_couplings() {
    let h = UnitaryOperator::new(CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
    ) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
    .unwrap();
    let ladder = Ladder::new(16, 1.0, 0.0).unwrap();
    let sys = [(0.0, 0.0), (1.0, 0.0)];
    let bath = [(0.0, 0.0), (2.0, 1.0)];
    let l = build_u1(&h, &sys, &bath, ladder, ladder).unwrap();
    assert_eq!(l.blocks().len(), 8);
    for b in l.blocks() {
        let (si, sj) = (b.row / 2, b.col / 2);
        assert_eq!(b.row % 2, b.col % 2, "identity on the bath");
        let expected = if si == sj { 0 } else if sj == 1 { 1 } else { -1 };
        assert_eq!((b.shift_a, b.shift_b), (expected, 0));
    }

    let diag = build_u1(&UnitaryOperator::identity(2), &sys, &bath, ladder, ladder).unwrap();
    assert_eq!(diag.max_shifts(), (0, 0));
}

#[test]
fn u1_with_momentum_weights_keeps_entropy() {
    let ladder = Ladder::new(24, 1.0, 0.0).unwrap();
    let h = UnitaryOperator::haar(2, &mut ChaCha8Rng::seed_from_u64(5));
    let sys = [(0.0, 0.0), (1.0, 2.0)];
    let bath = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
    let l = build_u1(&h, &sys, &bath, ladder, ladder).unwrap();
    let rho = product_state(&mut ChaCha8Rng::seed_from_u64(6));
    let wa = WeightState::momentum(ladder, 3);
    let wb = WeightState::momentum(ladder, 7);
    let check = entropy_nondecrease_check(&l, &rho, &wa, &wb).unwrap();
    assert!(check.d_s.abs() <= 1e-8, "{}", check.d_s);
    assert!(check.mixture_defect <= 1e-8);
}

#[test]
fn u2_matches_lifted_swap() {
    // System qubit (x) two bath occupation states n, n'.
    let sys = [(0.0, 0.0), (1.0, 1.0)];
    let bath = [(0.0, 0.0), (-1.0, 2.0)];
    let levels: Vec<(f64, f64)> = sys.iter().flat_map(|s| bath.iter().map(move |b| (s.0 + b.0, s.1 + b.1))).collect();
    let (upper, lower) = (2, 1); // |n, 1> and |n', 0>
    let ladder = Ladder::new(32, 1.0, 0.0).unwrap();
    let u2 = build_u2(&levels, upper, lower, ladder, ladder).unwrap();
    let swap = UnitaryOperator::permutation(&[0, 2, 1, 3]).unwrap();
    let lifted = lift_unitary(&swap, &levels, ladder, ladder).unwrap();
    assert_eq!(u2.blocks(), lifted.blocks());
    let eps = u2.blocks().iter().find(|b| b.row == lower && b.col == upper).unwrap();
    assert_eq!((eps.shift_a, eps.shift_b), (2, -1));

    // Equal system and bath gaps cancel.
    let flat = [(0.0, 0.0), (1.0, 0.5), (1.0, 0.5), (2.0, 1.0)];
    let half = Ladder::new(32, 0.5, 0.0).unwrap();
    let u = build_u2(&flat, 2, 1, ladder, half).unwrap();
    assert_eq!(u.max_shifts(), (0, 0));
    let coarse = Ladder::new(32, 0.3, 0.0).unwrap();
    assert!(matches!(build_u2(&levels, upper, lower, coarse, ladder), Err(Error::Commensurability { .. })));
}

#[test]
fn u2_extraction_step_work_from_ladder() {
    let sys = [(0.0, 0.0), (1.0, 1.0)];
    let bath = [(0.0, 0.0), (-1.0, 2.0)];
    let levels: Vec<(f64, f64)> = sys.iter().flat_map(|s| bath.iter().map(move |b| (s.0 + b.0, s.1 + b.1))).collect();
    let wa = gaussian_weight(32.0, 8);
    let wb = gaussian_weight(32.0, 8);
    let u2 = build_u2(&levels, 2, 1, *wa.ladder(), *wb.ladder()).unwrap();
    let rho_s = DensityMatrix::new(CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(0.35, 0.0), C64::new(0.3, 0.1), C64::new(0.3, -0.1), C64::new(0.65, 0.0)],
    ))
    .unwrap();
    let rho_b = DensityMatrix::from_populations(&[0.8, 0.2]).unwrap();
    let rho = tensor(&[&rho_s, &rho_b]).unwrap();
    let run = u2.evolve(&rho, &wa, &wb).unwrap();

    let implicit = apply_unitary(&rho, &u2.base_unitary().unwrap()).unwrap();
    let charge = |r: &DensityMatrix, k: usize| -> f64 {
        r.populations().iter().zip(&levels).map(|(p, l)| p * if k == 0 { l.0 } else { l.1 }).sum()
    };
    let dw_a = -(charge(&implicit, 0) - charge(&rho, 0));
    let dw_b = -(charge(&implicit, 1) - charge(&rho, 1));
    assert!(dw_a.abs() > 0.1, "step moves charge: {dw_a}");
    assert!((run.d_a_w - dw_a).abs() <= 1e-3, "{} vs {}", run.d_a_w, dw_a);
    assert!((run.d_b_w - dw_b).abs() <= 1e-3, "{} vs {}", run.d_b_w, dw_b);
    assert!((run.d_a_sb + run.d_a_w).abs() <= 1e-10);
    assert!((run.d_b_sb + run.d_b_w).abs() <= 1e-10);
    let overlap = u2.reduced_sb(&rho, &wa, &wb).unwrap();
    assert!(max_abs(&(overlap.matrix() - run.rho_sb.matrix())) <= 1e-10);
}

#[test]
fn gap_shrinks_with_width() {
    let levels = qubit_qutrit_levels();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let u = UnitaryOperator::haar(6, &mut rng);
        let rho = DensityMatrix::random(6, &mut rng);
        let mut gaps = Vec::new();
        for width in [8.0, 16.0, 32.0] {
            let wa = gaussian_weight(width, 16);
            let wb = gaussian_weight(width, 16);
            let l = lift_for(&u, &levels, &wa, &wb);
            gaps.push(implicit_explicit_gap(&rho, &wa, &wb, &l).unwrap());
        }
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2] && gaps[2] > 0.0, "seed {seed}: {gaps:?}");
    }
}

#[test]
fn gap_vanishes_without_shifts_or_for_flat_weights() {
    let levels = qubit_qutrit_levels();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rho = DensityMatrix::random(6, &mut rng);
    let wa = gaussian_weight(4.0, 16);
    let wb = gaussian_weight(4.0, 16);
    let phases: Vec<C64> = (0..6).map(|k| C64::from_polar(1.0, 0.7 * k as f64)).collect();
    let diag = UnitaryOperator::new(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(phases))).unwrap();
    let l = lift_for(&diag, &levels, &wa, &wb);
    assert!(implicit_explicit_gap(&rho, &wa, &wb, &l).unwrap() <= 1e-12);

    let u = UnitaryOperator::haar(6, &mut rng);
    let ladder = Ladder::new(32, 1.0, 0.0).unwrap();
    let flat = WeightState::momentum(ladder, 0);
    let l = lift_unitary(&u, &levels, ladder, ladder).unwrap();
    assert!(implicit_explicit_gap(&rho, &flat, &flat, &l).unwrap() <= 1e-10);
}

#[test]
fn guard_band_violation_is_an_error() {
    let levels = qubit_qutrit_levels();
    let u = UnitaryOperator::haar(6, &mut ChaCha8Rng::seed_from_u64(1));
    let ladder = Ladder::new(40, 1.0, 0.0).unwrap();
    let near_edge = WeightState::gaussian(ladder, 6.0, 1.0).unwrap();
    let centred = WeightState::gaussian(ladder, 20.0, 1.0).unwrap();
    let l = lift_unitary(&u, &levels, ladder, ladder).unwrap();
    let rho = DensityMatrix::maximally_mixed(6);
    assert!(matches!(implicit_explicit_gap(&rho, &near_edge, &centred, &l), Err(Error::GuardBand { .. })));
    assert!(implicit_explicit_gap(&rho, &centred, &centred, &l).is_ok());
}

#[test]
fn momentum_distribution_and_first_laws_preserved() {
    let levels = qubit_qutrit_levels();
    for seed in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let u = UnitaryOperator::haar(6, &mut rng);
        let rho = product_state(&mut rng);
        let wa = gaussian_weight(6.0, 16);
        let wb = gaussian_weight(3.0, 16);
        let l = lift_for(&u, &levels, &wa, &wb);
        let run = l.evolve(&rho, &wa, &wb).unwrap();
        let drift = |before: Vec<f64>, after: &[f64]| before.iter().zip(after).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(drift(wa.momentum_distribution(), &run.momentum_a) <= 1e-8);
        assert!(drift(wb.momentum_distribution(), &run.momentum_b) <= 1e-8);
        assert!((run.d_a_sb + run.d_a_w).abs() <= 1e-10);
        assert!((run.d_b_sb + run.d_b_w).abs() <= 1e-10);
    }
}

#[test]
fn entropy_never_decreases_over_200_seeds() {
    let levels = qubit_qutrit_levels();
    let wa = gaussian_weight(4.0, 16);
    let wb = gaussian_weight(2.5, 16);
    let mut worst = f64::INFINITY;
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = UnitaryOperator::haar(6, &mut rng);
        let rho = product_state(&mut rng);
        let l = lift_for(&u, &levels, &wa, &wb);
        let check = entropy_nondecrease_check(&l, &rho, &wa, &wb).unwrap();
        assert!(check.mixture_defect <= 1e-8, "seed {seed}: {:e}", check.mixture_defect);
        worst = worst.min(check.d_s);
    }
    assert!(worst >= -1e-10, "{worst:e}");
}

#[test]
fn identity_leaves_entropy_alone() {
    let levels = qubit_qutrit_levels();
    let wa = gaussian_weight(2.0, 0);
    let l = lift_for(&UnitaryOperator::identity(6), &levels, &wa, &wa);
    let rho = DensityMatrix::random(6, &mut ChaCha8Rng::seed_from_u64(4));
    let check = entropy_nondecrease_check(&l, &rho, &wa, &wa).unwrap();
    assert!(check.d_s.abs() <= 1e-12);
}

#[test]
fn second_law_with_explicit_batteries() {
    let sys = [(0.0, 0.0), (1.0, -1.0)];
    let bath = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
    let levels = qubit_qutrit_levels();
    let betas = InverseTemperatures::new(vec![0.8, 0.5]).unwrap();
    let as_rows = |ls: &[(f64, f64)]| ls.iter().map(|l| vec![l.0, l.1]).collect::<Vec<_>>();
    let bath_charges = ChargeSet::from_levels(&as_rows(&bath)).unwrap();
    let sys_charges = ChargeSet::from_levels(&as_rows(&sys)).unwrap();
    let tau = gibbs_state(&bath_charges, &betas).unwrap();
    let space = ProductSpace::new(vec![2, 3]).unwrap();
    let wa = gaussian_weight(4.0, 16);
    let wb = gaussian_weight(4.0, 16);
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let rho_s = DensityMatrix::random(2, &mut rng);
        let rho = tensor(&[&rho_s, tau.state()]).unwrap();
        let u = UnitaryOperator::haar(6, &mut rng);
        let l = lift_for(&u, &levels, &wa, &wb);
        let run = l.evolve(&rho, &wa, &wb).unwrap();
        let rho_s_after = partial_trace(&run.rho_sb, &space, &[0]).unwrap();
        let d_f_s = free_entropy(&rho_s_after, &sys_charges, &betas).unwrap() - free_entropy(&rho_s, &sys_charges, &betas).unwrap();
        let beta_w = 0.8 * run.d_a_w + 0.5 * run.d_b_w;
        assert!(beta_w <= -d_f_s + 1e-10, "seed {seed}: {beta_w} > {}", -d_f_s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn overlap_is_hermitian_and_bounded(center in 10.0f64..30.0, width in 0.5f64..4.0, d in -8i64..8) {
        let w = WeightState::gaussian(Ladder::new(40, 1.0, 0.0).unwrap(), center, width).unwrap();
        let x = w.overlap(d);
        prop_assert!((x - w.overlap(-d).conj()).norm() < 1e-12);
        prop_assert!(x.norm() <= 1.0 + 1e-12);
        prop_assert!((w.overlap(0).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifts_compose(n in 3usize..20, a in -30i64..30, b in -30i64..30) {
        let l = Ladder::new(n, 1.0, 0.0).unwrap();
        let amps: Vec<C64> = (0..n).map(|k| C64::new(k as f64, -(k as f64))).collect();
        let two = ShiftOperator::new(&l, b).apply(&ShiftOperator::new(&l, a).apply(&amps));
        prop_assert_eq!(two, ShiftOperator::new(&l, a + b).apply(&amps));
    }

    #[test]
    fn shift_preserves_momentum_distribution(s in -10i64..10, center in 25.0f64..35.0) {
        let l = Ladder::new(60, 1.0, 0.0).unwrap();
        let w = WeightState::gaussian(l, center, 1.0).unwrap();
        let moved = ShiftOperator::new(&l, s).apply_checked(&w, 10).unwrap();
        let before = w.momentum_distribution();
        for (a, b) in before.iter().zip(momentum_distribution(&moved)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
