//! Trading one conserved quantity for another inside a generalized bath.
//!
//! A bath species has d >= 3 levels with charge values (a_i, b_i) and
//! populations q_i proportional to exp(-beta_A a_i - beta_B b_i). Many copies
//! are described by occupation vectors n; swapping the populations of two
//! basis states |n> and |n'> moves charge at a free-entropy cost that can be
//! made arbitrarily small relative to the charge moved.
//!
//! Everything that multiplies prod_i q_i^{n_i} is kept in log space: the
//! interesting regime has thousands of copies and weights near e^{-3000}.

use crate::error::{Error, Result};
use crate::gge::EigenstateCharges;
use crate::numtheory::Rational;
use crate::qcore::{
    apply_unitary, expectation, tensor, von_neumann_entropy, DensityMatrix, HermitianOperator,
    UnitaryOperator, MAX_DIM,
};

/// Tolerance for the affine and equal-population checks on float input.
pub const BATH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactBath {
    pub levels: Vec<(Rational, Rational)>,
    pub beta_a: Rational,
    pub beta_b: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    levels: Vec<(f64, f64)>,
    beta_a: f64,
    beta_b: f64,
    log_q: Vec<f64>,
    exact: Option<ExactBath>,
}

impl BathSpec {
    pub fn new(levels: Vec<(f64, f64)>, beta_a: f64, beta_b: f64) -> Result<Self> {
        if levels.len() < 3 {
            return Err(Error::Argument(format!("a bath species needs d >= 3 levels, got {}", levels.len())));
        }
        let finite = levels.iter().all(|(a, b)| a.is_finite() && b.is_finite());
        if !finite || !beta_a.is_finite() || !beta_b.is_finite() {
            return Err(Error::Argument("bath charges and betas must be finite".into()));
        }
        let energies: Vec<f64> = levels.iter().map(|(a, b)| beta_a * a + beta_b * b).collect();
        let low = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let log_z = energies.iter().map(|e| (-(e - low)).exp()).sum::<f64>().ln() - low;
        let log_q = energies.iter().map(|e| -e - log_z).collect();
        Ok(BathSpec { levels, beta_a, beta_b, log_q, exact: None })
    }

    /// Keeps the exact values so the validation checks run in rational arithmetic.
    pub fn from_rationals(levels: Vec<(Rational, Rational)>, beta_a: Rational, beta_b: Rational) -> Result<Self> {
        let float_levels = levels.iter().map(|(a, b)| (a.to_f64(), b.to_f64())).collect();
        let mut spec = Self::new(float_levels, beta_a.to_f64(), beta_b.to_f64())?;
        spec.exact = Some(ExactBath { levels, beta_a, beta_b });
        Ok(spec)
    }

    /// A bath whose levels are eigenstates of beta_A A + beta_B B, carrying
    /// their average charges. Works unchanged for non-commuting A, B.
    pub fn from_eigenstates(states: &[EigenstateCharges], beta_a: f64, beta_b: f64) -> Result<Self> {
        if states.iter().any(|s| s.averages.len() != 2) {
            return Err(Error::Argument("bath eigenstates must carry exactly two charge averages".into()));
        }
        Self::new(states.iter().map(|s| (s.averages[0], s.averages[1])).collect(), beta_a, beta_b)
    }

    pub fn d(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[(f64, f64)] {
        &self.levels
    }

    pub fn betas(&self) -> (f64, f64) {
        (self.beta_a, self.beta_b)
    }

    pub fn exact(&self) -> Option<&ExactBath> {
        self.exact.as_ref()
    }

    pub fn log_populations(&self) -> &[f64] {
        &self.log_q
    }

    pub fn populations(&self) -> Vec<f64> {
        self.log_q.iter().map(|l| l.exp()).collect()
    }

    /// (a_1 - a_0, a_2 - a_0, b_1 - b_0, b_2 - b_0).
    pub fn charge_gaps(&self) -> (f64, f64, f64, f64) {
        let l = &self.levels;
        (l[1].0 - l[0].0, l[2].0 - l[0].0, l[1].1 - l[0].1, l[2].1 - l[0].1)
    }

    /// The same bath with levels 1 and 2 relabelled, which exchanges x and y.
    pub fn with_levels_swapped(&self) -> Self {
        let mut s = self.clone();
        s.levels.swap(1, 2);
        s.log_q.swap(1, 2);
        if let Some(e) = s.exact.as_mut() {
            e.levels.swap(1, 2);
        }
        s
    }
}

/// x = beta_A (a_1 - a_0) + beta_B (b_1 - b_0), y likewise with level 2.
pub fn xy(spec: &BathSpec) -> (f64, f64) {
    let (a10, a20, b10, b20) = spec.charge_gaps();
    (spec.beta_a * a10 + spec.beta_b * b10, spec.beta_a * a20 + spec.beta_b * b20)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathValidation {
    pub x: f64,
    pub y: f64,
    /// (a_1 - a_0)(b_2 - b_0) != (a_2 - a_0)(b_1 - b_0).
    pub not_affine: bool,
    /// Not x = y = 0, i.e. levels 0, 1, 2 do not share one population.
    pub distinct_populations: bool,
    pub exact_arithmetic: bool,
    pub problems: Vec<String>,
}

impl BathValidation {
    pub fn accepted(&self) -> bool {
        self.not_affine && self.distinct_populations
    }

    pub fn into_result(self) -> Result<Self> {
        if self.accepted() {
            Ok(self)
        } else {
            Err(Error::BathRejected(self.problems.join("; ")))
        }
    }
}

pub fn validate_bath(spec: &BathSpec) -> BathValidation {
    let (x, y) = xy(spec);
    let (not_affine, distinct_populations, exact_arithmetic) = match spec.exact() {
        Some(e) => {
            let l = &e.levels;
            let a10 = &l[1].0 - &l[0].0;
            let a20 = &l[2].0 - &l[0].0;
            let b10 = &l[1].1 - &l[0].1;
            let b20 = &l[2].1 - &l[0].1;
            let cross = &(&a10 * &b20) - &(&a20 * &b10);
            let ex = &(&e.beta_a * &a10) + &(&e.beta_b * &b10);
            let ey = &(&e.beta_a * &a20) + &(&e.beta_b * &b20);
            (!cross.is_zero(), !(ex.is_zero() && ey.is_zero()), true)
        }
        None => {
            let (a10, a20, b10, b20) = spec.charge_gaps();
            let cross = a10 * b20 - a20 * b10;
            (cross.abs() > BATH_TOL, x.abs() > BATH_TOL || y.abs() > BATH_TOL, false)
        }
    };
    let mut problems = Vec::new();
    if !not_affine {
        problems.push("charges of levels 0, 1, 2 are affinely related".to_string());
    }
    if !distinct_populations {
        problems.push("levels 0, 1, 2 share one population (x = y = 0)".to_string());
    }
    BathValidation { x, y, not_affine, distinct_populations, exact_arithmetic, problems }
}

/// m with m/dn1 < x/y <= (m+1)/dn1, or with `sign_flip`
/// (m-1)/dn1 <= x/y < m/dn1.
pub fn choose_m(x: f64, y: f64, dn1: u64, sign_flip: bool) -> Result<i64> {
    if y == 0.0 {
        return Err(Error::RoleSwap);
    }
    if dn1 == 0 {
        return Err(Error::Argument("dn1 must be positive".into()));
    }
    let mut t = (x / y) * dn1 as f64;
    // Snap round-off so that exact ratios such as 0.7 * 10 land on the
    // bracket edge they are meant to hit.
    let r = t.round();
    if (t - r).abs() <= 1e-12 * r.abs().max(1.0) {
        t = r;
    }
    let m = if sign_flip { t.floor() + 1.0 } else { t.ceil() - 1.0 };
    if !m.is_finite() || m.abs() > 9.0e15 {
        return Err(Error::Argument(format!("m = {m} out of range")));
    }
    Ok(m as i64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupationPair {
    n: Vec<u64>,
    n_prime: Vec<u64>,
}

impl OccupationPair {
    pub fn new(n: Vec<u64>, n_prime: Vec<u64>) -> Result<Self> {
        if n.len() != n_prime.len() || n.len() < 3 {
            return Err(Error::Argument("occupation vectors need equal length d >= 3".into()));
        }
        if n.iter().sum::<u64>() != n_prime.iter().sum::<u64>() {
            return Err(Error::Argument("occupation vectors hold different numbers of copies".into()));
        }
        if n[3..] != n_prime[3..] {
            return Err(Error::Argument("occupations may differ only on levels 0, 1, 2".into()));
        }
        Ok(OccupationPair { n, n_prime })
    }

    /// Fewest copies realising (dn1, dn2), plus `extra_n0` spectator copies
    /// in level 0 on both sides.
    pub fn minimal(d: usize, dn1: i64, dn2: i64, extra_n0: u64) -> Result<Self> {
        if d < 3 {
            return Err(Error::Argument("d must be at least 3".into()));
        }
        let n1 = (-dn1).max(0) as u64;
        let n2 = (-dn2).max(0) as u64;
        let n0 = (dn1 + dn2).max(0) as u64 + extra_n0;
        let total = n0 + n1 + n2;
        let p1 = (n1 as i64 + dn1) as u64;
        let p2 = (n2 as i64 + dn2) as u64;
        let mut n = vec![0; d];
        let mut np = vec![0; d];
        (n[0], n[1], n[2]) = (n0, n1, n2);
        (np[0], np[1], np[2]) = (total - p1 - p2, p1, p2);
        Self::new(n, np)
    }

    pub fn n(&self) -> &[u64] {
        &self.n
    }

    pub fn n_prime(&self) -> &[u64] {
        &self.n_prime
    }

    pub fn dn1(&self) -> i64 {
        self.n_prime[1] as i64 - self.n[1] as i64
    }

    pub fn dn2(&self) -> i64 {
        self.n_prime[2] as i64 - self.n[2] as i64
    }

    pub fn copies(&self) -> u64 {
        self.n.iter().sum()
    }

    pub fn with_levels_swapped(&self) -> Self {
        let mut p = self.clone();
        p.n.swap(1, 2);
        p.n_prime.swap(1, 2);
        p
    }

    /// Sizes of the two permutation classes, N!/prod n_i!, when they fit.
    pub fn class_sizes(&self) -> Option<(u128, u128)> {
        Some((multinomial(&self.n)?, multinomial(&self.n_prime)?))
    }
}

fn multinomial(n: &[u64]) -> Option<u128> {
    let mut acc: u128 = 1;
    let mut total: u64 = 0;
    for &k in n {
        for j in 1..=k {
            total += 1;
            acc = acc.checked_mul(total as u128)? / j as u128;
        }
    }
    Some(acc)
}

/// Result of swapping the populations of |n> and |n'>, stored as a positive
/// weight ln prod q_i^{n_i} times weight-free unit quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeOutcome {
    pub dn1: i64,
    pub dn2: i64,
    /// ln of the population of |n>.
    pub ln_weight: f64,
    /// 1 - q_n'/q_n.
    pub dq_unit: f64,
    /// a_10 dn1 + a_20 dn2.
    pub a_unit: f64,
    pub b_unit: f64,
    /// x dn1 + y dn2 = beta_A a_unit + beta_B b_unit.
    pub gap: f64,
}

impl TradeOutcome {
    fn scale(&self) -> f64 {
        self.ln_weight.exp()
    }

    /// q_n - q_n'. Underflows to 0 for very heavy baths; use the log form then.
    pub fn delta_q(&self) -> f64 {
        self.dq_unit * self.scale()
    }

    pub fn d_a(&self) -> f64 {
        self.delta_q() * self.a_unit
    }

    pub fn d_b(&self) -> f64 {
        self.delta_q() * self.b_unit
    }

    pub fn d_f(&self) -> f64 {
        self.delta_q() * self.gap
    }

    pub fn ln_abs_delta_q(&self) -> f64 {
        self.dq_unit.abs().ln() + self.ln_weight
    }

    /// 0 < dF_b <= |y dq|, evaluated on the weight-free factors so that it
    /// survives underflow of the weight.
    pub fn satisfies_cost_bound(&self, y: f64) -> bool {
        let f = self.dq_unit * self.gap;
        f > 0.0 && f <= (y * self.dq_unit).abs() * (1.0 + 1e-12)
    }

    /// |dA / dF|, finite whenever the step moves anything.
    pub fn ratio_a(&self) -> f64 {
        (self.a_unit / self.gap).abs()
    }

    pub fn ratio_b(&self) -> f64 {
        (self.b_unit / self.gap).abs()
    }
}

/// Closed-form outcome of one swap |n> <-> |n'>.
pub fn trade_step(spec: &BathSpec, pair: &OccupationPair) -> Result<TradeOutcome> {
    if pair.n.len() != spec.d() {
        return Err(Error::Dimension { expected: spec.d(), found: pair.n.len() });
    }
    let (dn1, dn2) = (pair.dn1(), pair.dn2());
    let (a10, a20, b10, b20) = spec.charge_gaps();
    let a_unit = a10 * dn1 as f64 + a20 * dn2 as f64;
    let b_unit = b10 * dn1 as f64 + b20 * dn2 as f64;
    let gap = spec.beta_a * a_unit + spec.beta_b * b_unit;
    let ln_weight = pair
        .n
        .iter()
        .zip(&spec.log_q)
        .filter(|(&k, _)| k > 0)
        .map(|(&k, &l)| k as f64 * l)
        .sum();
    Ok(TradeOutcome { dn1, dn2, ln_weight, dq_unit: -(-gap).exp_m1(), a_unit, b_unit, gap })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TradeCharge {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Any,
    Increase,
    Decrease,
}

/// Move at least `amount` of one charge into or out of the bath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeGoal {
    pub charge: TradeCharge,
    pub amount: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeLimits {
    /// Largest dn1 tried before giving up.
    pub max_dn1: u64,
}

impl Default for TradeLimits {
    fn default() -> Self {
        TradeLimits { max_dn1: 1 << 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedStep {
    pub pair: OccupationPair,
    pub outcome: TradeOutcome,
    /// ln of the repetition count N = ceil(amount / |dC|).
    pub ln_repetitions: f64,
    pub sign_flip: bool,
}

impl PlannedStep {
    /// The repetition count when it fits in a u64.
    pub fn repetitions(&self) -> Option<u64> {
        (self.ln_repetitions < 43.0).then(|| self.ln_repetitions.exp().round() as u64)
    }

    fn total(&self, unit: f64) -> f64 {
        let sign = self.outcome.dq_unit.signum() * unit.signum();
        sign * (self.ln_repetitions + self.outcome.ln_abs_delta_q() + unit.abs().ln()).exp()
    }

    pub fn total_da(&self) -> f64 {
        self.total(self.outcome.a_unit)
    }

    pub fn total_db(&self) -> f64 {
        self.total(self.outcome.b_unit)
    }

    pub fn total_df(&self) -> f64 {
        self.total(self.outcome.gap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradePlan {
    pub goal: TradeGoal,
    pub budget: f64,
    pub steps: Vec<PlannedStep>,
    pub total_da: f64,
    pub total_db: f64,
    pub total_df: f64,
}

pub fn plan_trade(spec: &BathSpec, goal: TradeGoal, budget: f64) -> Result<TradePlan> {
    plan_trade_with_limits(spec, goal, budget, TradeLimits::default())
}

/// Grows dn1 until a single swap moves the goal charge at least 2 amount/budget
/// times faster than it spends free entropy, pads level 0 until one swap
/// moves at most half the amount, and repeats that swap N times.
pub fn plan_trade_with_limits(spec: &BathSpec, goal: TradeGoal, budget: f64, limits: TradeLimits) -> Result<TradePlan> {
    validate_bath(spec).into_result()?;
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::Argument(format!("free-entropy budget must be positive, got {budget}")));
    }
    if !(goal.amount >= 0.0) || !goal.amount.is_finite() {
        return Err(Error::Argument(format!("target amount must be non-negative, got {}", goal.amount)));
    }
    let empty = TradePlan { goal, budget, steps: Vec::new(), total_da: 0.0, total_db: 0.0, total_df: 0.0 };
    if goal.amount == 0.0 {
        return Ok(empty);
    }
    let (_, y) = xy(spec);
    let (work, swapped) = if y == 0.0 { (spec.with_levels_swapped(), true) } else { (spec.clone(), false) };
    let (x, y) = xy(&work);
    let wanted = 2.0 * goal.amount / budget;

    let mut best_ratio = 0.0f64;
    let mut dn1: u64 = 1;
    while dn1 <= limits.max_dn1 {
        // The sign-flipped choice is only used when the requested direction
        // needs it; the unflipped step also meets 0 < dF <= y dq.
        let flips: &[bool] = if goal.direction == Direction::Any { &[false] } else { &[false, true] };
        for &flip in flips {
            let m = choose_m(x, y, dn1, flip)?;
            let pair = OccupationPair::minimal(work.d(), dn1 as i64, -m, 0)?;
            let step = trade_step(&work, &pair)?;
            let unit = match goal.charge {
                TradeCharge::A => step.a_unit,
                TradeCharge::B => step.b_unit,
            };
            if unit == 0.0 || step.gap == 0.0 {
                continue;
            }
            let sign = step.dq_unit.signum() * unit.signum();
            let direction_ok = match goal.direction {
                Direction::Any => true,
                Direction::Increase => sign > 0.0,
                Direction::Decrease => sign < 0.0,
            };
            if !direction_ok {
                continue;
            }
            let ratio = (unit / step.gap).abs();
            best_ratio = best_ratio.max(ratio);
            if ratio < wanted {
                continue;
            }
            let planned = finish_step(&work, pair, step, unit, goal.amount, flip)?;
            let planned = if swapped { unswap(planned) } else { planned };
            let (total_da, total_db, total_df) = (planned.total_da(), planned.total_db(), planned.total_df());
            return Ok(TradePlan { goal, budget, steps: vec![planned], total_da, total_db, total_df });
        }
        dn1 *= 2;
    }
    Err(Error::Resource(format!(
        "best |dC/dF| = {best_ratio:e} below the required {wanted:e} with dn1 <= {}",
        limits.max_dn1
    )))
}

fn finish_step(spec: &BathSpec, pair: OccupationPair, step: TradeOutcome, unit: f64, amount: f64, flip: bool) -> Result<PlannedStep> {
    let ln_dc = step.ln_abs_delta_q() + unit.abs().ln();
    let ln_half = (amount / 2.0).ln();
    let (pair, step, ln_dc) = if ln_dc > ln_half {
        let ln_q0 = spec.log_populations()[0];
        let extra = ((ln_dc - ln_half) / -ln_q0).ceil() as u64;
        let pair = OccupationPair::minimal(spec.d(), pair.dn1(), pair.dn2(), pair.n()[0] + extra - minimal_n0(&pair))?;
        let step = trade_step(spec, &pair)?;
        let ln_dc = step.ln_abs_delta_q() + unit.abs().ln();
        (pair, step, ln_dc)
    } else {
        (pair, step, ln_dc)
    };
    let ln_ratio = amount.ln() - ln_dc;
    let ln_repetitions = if ln_ratio < 36.0 {
        ln_ratio.exp().ceil().ln()
    } else {
        // Far beyond integer precision: keep the count in log form with a
        // relative margin that dominates rounding.
        ln_ratio + 1e-12
    };
    Ok(PlannedStep { pair, outcome: step, ln_repetitions, sign_flip: flip })
}

fn minimal_n0(pair: &OccupationPair) -> u64 {
    (pair.dn1() + pair.dn2()).max(0) as u64
}

fn unswap(step: PlannedStep) -> PlannedStep {
    let o = step.outcome;
    PlannedStep {
        pair: step.pair.with_levels_swapped(),
        outcome: TradeOutcome { dn1: o.dn2, dn2: o.dn1, ..o },
        ..step
    }
}

/// Deltas of one swap as measured on the dense state.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrade {
    /// Number of matched basis-state pairs swapped.
    pub multiplicity: u64,
    pub delta_q: f64,
    pub d_a: f64,
    pub d_b: f64,
    pub d_f: f64,
    /// Total entropy change of the bath (zero for a permutation).
    pub d_s: f64,
}

/// Builds tau^{(x) N} as a dense matrix, swaps every basis state of class n
/// with a partner of class n' (min of the class sizes), and reads the deltas
/// off expectation values, divided by the number of swapped pairs.
pub fn dense_oracle_trade(spec: &BathSpec, pair: &OccupationPair) -> Result<OracleTrade> {
    let d = spec.d();
    if pair.n.len() != d {
        return Err(Error::Dimension { expected: d, found: pair.n.len() });
    }
    let copies = pair.copies() as u32;
    let dim = (d as u64).checked_pow(copies).filter(|&v| v <= MAX_DIM as u64 && copies >= 1).ok_or_else(|| {
        Error::Argument(format!("{d}^{copies} exceeds the dense cap {MAX_DIM}"))
    })? as usize;

    let single = DensityMatrix::from_populations(&spec.populations())?;
    let factors: Vec<&DensityMatrix> = (0..copies).map(|_| &single).collect();
    let rho = tensor(&factors)?;

    let digits = |mut idx: usize| {
        let mut occ = vec![0u64; d];
        let mut a = 0.0;
        let mut b = 0.0;
        for _ in 0..copies {
            let lvl = idx % d;
            idx /= d;
            occ[lvl] += 1;
            a += spec.levels[lvl].0;
            b += spec.levels[lvl].1;
        }
        (occ, a, b)
    };
    let mut class_n = Vec::new();
    let mut class_np = Vec::new();
    let mut a_diag = Vec::with_capacity(dim);
    let mut b_diag = Vec::with_capacity(dim);
    for idx in 0..dim {
        let (occ, a, b) = digits(idx);
        if occ == pair.n {
            class_n.push(idx);
        }
        if occ == pair.n_prime {
            class_np.push(idx);
        }
        a_diag.push(a);
        b_diag.push(b);
    }
    let k = class_n.len().min(class_np.len());
    let mut perm: Vec<usize> = (0..dim).collect();
    if pair.n != pair.n_prime {
        for (&i, &j) in class_n.iter().zip(&class_np) {
            perm.swap(i, j);
        }
    }
    let u = UnitaryOperator::permutation(&perm)?;
    let after = apply_unitary(&rho, &u)?;

    let a_tot = HermitianOperator::from_diagonal(&a_diag)?;
    let b_tot = HermitianOperator::from_diagonal(&b_diag)?;
    let d_a = expectation(&after, &a_tot)? - expectation(&rho, &a_tot)?;
    let d_b = expectation(&after, &b_tot)? - expectation(&rho, &b_tot)?;
    let d_s = von_neumann_entropy(&after) - von_neumann_entropy(&rho);
    let delta_q = rho.matrix()[(class_n[0], class_n[0])].re - rho.matrix()[(class_np[0], class_np[0])].re;
    let kf = k as f64;
    let (beta_a, beta_b) = spec.betas();
    Ok(OracleTrade {
        multiplicity: k as u64,
        delta_q,
        d_a: d_a / kf,
        d_b: d_b / kf,
        d_f: (beta_a * d_a + beta_b * d_b - d_s) / kf,
        d_s,
    })
}
