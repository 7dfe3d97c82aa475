//! Extracting charge combinations from a non-equilibrium system.
//!
//! The system is first rotated so its eigenvectors line up with the joint
//! charge basis (eigenstates of beta_A A + beta_B B). Populations are then
//! moved between pairs of levels in small steps, each step swapping a
//! two-dimensional system-bath subspace with a bath pair whose population
//! ratio matches the system's. The batteries are implicit: work is minus the
//! total change of each charge over system and bath.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bathtrade::{trade_step, validate_bath, xy, BathSpec, OccupationPair};
use crate::error::{Error, Result};
use crate::gge::{eigenstate_charges, free_entropy, ChargeSet, EigenstateCharges, GibbsState, InverseTemperatures};
use crate::numtheory::{bezout, convergents, float_to_rational, Rational};
use crate::qcore::{
    apply_unitary, entropy_of_spectrum, expectation, matmul, partial_trace, tensor, trace_distance,
    von_neumann_entropy, CMatrix, DensityMatrix, Operator, ProductSpace, UnitaryOperator, MAX_DIM,
};

/// Largest |dn1|, |dn2| searched by [`select_bath_pair`].
pub const SEARCH_WINDOW: i64 = 10_000;
/// Largest denominator for which x/y is treated as rational.
pub const RATIONAL_WINDOW: u64 = 10_000;
/// Populations closer than this to the target end the protocol.
pub const PROTOCOL_TOL: f64 = 1e-13;
/// Slack for the audited inequalities.
pub const AUDIT_TOL: f64 = 1e-10;

/// A system state with its two charges, eigen-decomposed once.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    rho: DensityMatrix,
    charges: ChargeSet,
    populations: Vec<f64>,
    vectors: CMatrix,
}

impl SystemSpec {
    pub fn new(rho: DensityMatrix, charges: ChargeSet) -> Result<Self> {
        if charges.dim() != rho.dim() {
            return Err(Error::Dimension { expected: rho.dim(), found: charges.dim() });
        }
        let eig = rho.eigh();
        let n = rho.dim();
        // Eigh is ascending; store descending.
        let populations = (0..n).rev().map(|k| eig.values[k].max(0.0)).collect();
        let mut vectors = CMatrix::zeros(n, n);
        for (col, k) in (0..n).rev().enumerate() {
            vectors.set_column(col, &eig.vectors.column(k));
        }
        Ok(SystemSpec { rho, charges, populations, vectors })
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn charges(&self) -> &ChargeSet {
        &self.charges
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    /// Eigenvalues p_0 >= p_1 >= ...
    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    /// Column k is the eigenvector for populations()[k].
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn reconstruction_defect(&self) -> f64 {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for (k, p) in self.populations.iter().enumerate() {
            let v = self.vectors.column(k);
            m += v * v.adjoint() * crate::qcore::C64::new(*p, 0.0);
        }
        crate::qcore::max_abs(&(m - self.rho.matrix()))
    }
}

/// Rotation taking the k-th eigenvector of the system (descending
/// population) to the k-th charge-basis state (ascending eigenvalue of
/// beta_A A + beta_B B). Returns the unitary and the rotated state.
pub fn diagonalize_to_charge_basis(sys: &SystemSpec, basis: &[EigenstateCharges]) -> Result<(UnitaryOperator, DensityMatrix)> {
    if basis.len() != sys.dim() {
        return Err(Error::Dimension { expected: sys.dim(), found: basis.len() });
    }
    let u = basis_map(basis, sys.eigenvectors())?;
    let sigma = apply_unitary(sys.rho(), &u)?;
    Ok((u, sigma))
}

/// sum_k |target_k><source_k| for target = charge basis.
fn basis_map(basis: &[EigenstateCharges], source: &CMatrix) -> Result<UnitaryOperator> {
    let n = basis.len();
    let mut c = CMatrix::zeros(n, n);
    for (k, s) in basis.iter().enumerate() {
        c.set_column(k, &s.vector);
    }
    UnitaryOperator::new(matmul(&c, &source.adjoint()))
}

/// Closest reachable x dn1 + y dn2 to `target`, within `tol`.
///
/// Rational x/y = u/v only reaches multiples of y/v, so the request fails
/// with `ExcludedRatio` when |y/v| > tol. Otherwise a greedy expansion over
/// the convergents of x/y is tried first and an exhaustive scan of the
/// window backs it up.
pub fn select_bath_pair(x: f64, y: f64, target: f64, tol: f64) -> Result<(i64, i64)> {
    if x == 0.0 && y == 0.0 {
        return Err(Error::Precondition("x and y are both zero".into()));
    }
    if !(tol > 0.0) || !target.is_finite() || !x.is_finite() || !y.is_finite() {
        return Err(Error::Argument(format!("bad search request: target {target}, tol {tol}")));
    }
    if target.abs() <= tol {
        return Ok((0, 0));
    }
    if y == 0.0 {
        let (a, b) = select_bath_pair(y, x, target, tol)?;
        return Ok((b, a));
    }
    let alpha = x / y;
    let approx = float_to_rational(alpha, RATIONAL_WINDOW)?;
    if (approx.to_f64() - alpha).abs() <= 1e-12 * alpha.abs().max(1.0) {
        return rational_pair(x, y, &approx, target, tol);
    }
    if let Some(p) = greedy_pair(x, y, alpha, target, tol) {
        return Ok(p);
    }
    scan_pair(x, y, target, tol).ok_or(Error::WindowExhausted { window: SEARCH_WINDOW, tol })
}

fn rational_pair(x: f64, y: f64, ratio: &Rational, target: f64, tol: f64) -> Result<(i64, i64)> {
    use num_traits::ToPrimitive;
    let u = ratio.numer().to_i64().unwrap_or(i64::MAX);
    let v = ratio.denom().to_i64().unwrap_or(i64::MAX);
    let step = y / v as f64;
    if step.abs() > tol {
        return Err(Error::ExcludedRatio { u, v, step: step.abs(), tol });
    }
    // x dn1 + y dn2 = step (u dn1 + v dn2); aim for k = round(target / step).
    let k = (target / step).round();
    if k.abs() > 4.0 * (SEARCH_WINDOW as f64).powi(2) {
        return Err(Error::WindowExhausted { window: SEARCH_WINDOW, tol });
    }
    let k = k as i128;
    let (a, b) = if u == 0 { (0, 1) } else { bezout(u.unsigned_abs(), v as u64)? };
    let (mut dn1, mut dn2) = (k * a as i128 * u.signum() as i128, k * b as i128);
    // Shift along the kernel (v, -u) to the smallest dn1.
    if v > 0 && u != 0 {
        let t = (dn1 as f64 / v as f64).round() as i128;
        dn1 -= t * v as i128;
        dn2 += t * u as i128;
    }
    let fits = |n: i128| n.abs() <= SEARCH_WINDOW as i128;
    if !fits(dn1) || !fits(dn2) || (x * dn1 as f64 + y * dn2 as f64 - target).abs() > tol {
        return Err(Error::WindowExhausted { window: SEARCH_WINDOW, tol });
    }
    Ok((dn1 as i64, dn2 as i64))
}

/// alpha dn1 + dn2 = s is approached by peeling off multiples of
/// theta_k = alpha q_k - p_k, largest first.
fn greedy_pair(x: f64, y: f64, alpha: f64, target: f64, tol: f64) -> Option<(i64, i64)> {
    let s = target / y;
    let exact = Rational::from_f64(alpha).ok()?;
    let mut dn1: i64 = 0;
    let mut dn2: i64 = s.round() as i64;
    let mut err = s - dn2 as f64;
    for (p, q) in convergents(&exact, SEARCH_WINDOW as u64) {
        use num_traits::ToPrimitive;
        if (y * err).abs() <= tol {
            break;
        }
        let (p, q) = (p.to_i64()?, q.to_i64()?);
        let theta = alpha * q as f64 - p as f64;
        if theta == 0.0 {
            break;
        }
        let b = (err / theta).round() as i64;
        dn1 = dn1.checked_add(b.checked_mul(q)?)?;
        dn2 = dn2.checked_sub(b.checked_mul(p)?)?;
        err = s - (alpha * dn1 as f64 + dn2 as f64);
    }
    let ok = dn1.abs() <= SEARCH_WINDOW
        && dn2.abs() <= SEARCH_WINDOW
        && (x * dn1 as f64 + y * dn2 as f64 - target).abs() <= tol;
    ok.then_some((dn1, dn2))
}

fn scan_pair(x: f64, y: f64, target: f64, tol: f64) -> Option<(i64, i64)> {
    let mut best: Option<(i64, i64)> = None;
    for m in 0..=SEARCH_WINDOW {
        for dn1 in [m, -m] {
            let dn2 = ((target - x * dn1 as f64) / y).round();
            if dn2.abs() > SEARCH_WINDOW as f64 {
                continue;
            }
            let dn2 = dn2 as i64;
            if (x * dn1 as f64 + y * dn2 as f64 - target).abs() <= tol {
                best = Some((dn1, dn2));
                break;
            }
        }
        if best.is_some() {
            break;
        }
    }
    best
}

/// The first convergent pair (dn1, dn2) = (q, -p) of x/y, starting from the
/// generator (0, 1), whose combination |x dn1 + y dn2| is at most `tol`.
pub fn smallest_combination(x: f64, y: f64, tol: f64) -> Result<(i64, i64)> {
    use num_traits::ToPrimitive;
    if y.abs() <= tol {
        return Ok((0, 1));
    }
    let alpha = Rational::from_f64(x / y)?;
    for (p, q) in convergents(&alpha, SEARCH_WINDOW as u64) {
        let (p, q) = match (p.to_i64(), q.to_i64()) {
            (Some(p), Some(q)) => (p, q),
            _ => break,
        };
        if (x * q as f64 - y * p as f64).abs() <= tol {
            return Ok((q, -p));
        }
    }
    Err(Error::WindowExhausted { window: SEARCH_WINDOW, tol })
}

/// A state diagonal in the charge basis: populations and the (a, b)
/// averages of each basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalState {
    pub populations: Vec<f64>,
    pub levels: Vec<(f64, f64)>,
}

impl DiagonalState {
    pub fn new(populations: Vec<f64>, levels: Vec<(f64, f64)>) -> Result<Self> {
        if populations.len() != levels.len() {
            return Err(Error::Dimension { expected: levels.len(), found: populations.len() });
        }
        if populations.iter().any(|p| !(*p >= 0.0)) || (populations.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
            return Err(Error::Invariant("populations must be a probability vector".into()));
        }
        Ok(DiagonalState { populations, levels })
    }

    pub fn charge_totals(&self) -> (f64, f64) {
        self.populations
            .iter()
            .zip(&self.levels)
            .fold((0.0, 0.0), |(a, b), (p, (la, lb))| (a + p * la, b + p * lb))
    }

    pub fn entropy(&self) -> f64 {
        entropy_of_spectrum(&self.populations)
    }
}

/// How much bath weight takes part in a swap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SwapWeight {
    /// k matched pairs |i, n, alpha> <-> |j, n', alpha'>; weight k q_n.
    Pairs(u64),
    /// Total population W of the bath states of class n that are swapped.
    Total(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionStep {
    /// Population moves from system level `from` to level `to`.
    pub from: usize,
    pub to: usize,
    pub pair: OccupationPair,
    pub delta_p: f64,
    pub weight: f64,
    /// q_n' / q_n.
    pub ratio: f64,
    pub d_a_s: f64,
    pub d_b_s: f64,
    pub d_a_b: f64,
    pub d_b_b: f64,
    pub d_w_a: f64,
    pub d_w_b: f64,
    pub d_s_s: f64,
    pub d_s_b: f64,
    pub d_f_b: f64,
}

impl ExtractionStep {
    /// d_s_s + d_s_b + d_f_b; equals -dF_s - beta . dW for the step.
    pub fn deficit(&self) -> f64 {
        self.d_s_s + self.d_s_b + self.d_f_b
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Swaps |from, n'> with |to, n> over a bath weight W, moving
/// delta_p = W (p_from r - p_to) with r = q_n'/q_n.
pub fn swap_population_step(
    state: &DiagonalState,
    spec: &BathSpec,
    pair: &OccupationPair,
    levels: (usize, usize),
    weight: SwapWeight,
) -> Result<(DiagonalState, ExtractionStep)> {
    let (i, j) = levels;
    let n = state.populations.len();
    if i >= n || j >= n || i == j {
        return Err(Error::Argument(format!("bad level pair ({i}, {j}) for {n} levels")));
    }
    let t = trade_step(spec, pair)?;
    let r = (-t.gap).exp();
    let w = match weight {
        SwapWeight::Pairs(k) => k as f64 * t.ln_weight.exp(),
        SwapWeight::Total(w) => w,
    };
    if !(w >= 0.0) || w * (1.0 + r) > 1.0 + 1e-12 {
        return Err(Error::StepSize(format!("bath weight {w} with ratio {r} exceeds the bath")));
    }
    let (pi, pj) = (state.populations[i], state.populations[j]);
    let c = pi * r - pj;
    let dp = w * c;
    let (pi2, pj2) = (pi - dp, pj + dp);
    if pi2 < -1e-15 || pj2 < -1e-15 {
        return Err(Error::StepSize(format!("step {dp} drives a population negative")));
    }
    let (pi2, pj2) = (pi2.max(0.0), pj2.max(0.0));
    let mut populations = state.populations.clone();
    populations[i] = pi2;
    populations[j] = pj2;

    let (ai, bi) = state.levels[i];
    let (aj, bj) = state.levels[j];
    let d_a_s = dp * (aj - ai);
    let d_b_s = dp * (bj - bi);
    let d_a_b = -dp * t.a_unit;
    let d_b_b = -dp * t.b_unit;
    let d_s_s = -(plogp(pi2) + plogp(pj2)) + plogp(pi) + plogp(pj);
    // Relative entropy of the disturbed bath to its thermal state.
    let d_f_b = w * ((1.0 + c) * c.ln_1p() + (r - c) * (-c / r).ln_1p());
    let (beta_a, beta_b) = spec.betas();
    let d_s_b = beta_a * d_a_b + beta_b * d_b_b - d_f_b;
    let step = ExtractionStep {
        from: i,
        to: j,
        pair: pair.clone(),
        delta_p: dp,
        weight: w,
        ratio: r,
        d_a_s,
        d_b_s,
        d_a_b,
        d_b_b,
        d_w_a: -d_a_s - d_a_b,
        d_w_b: -d_b_s - d_b_b,
        d_s_s,
        d_s_b,
        d_f_b,
    };
    Ok((DiagonalState { populations, levels: state.levels.clone() }, step))
}

#[derive(Debug, Clone)]
pub struct ExtractionReport {
    pub w_a: f64,
    pub w_b: f64,
    /// Work from the initial and final rotations alone.
    pub rotation_work: (f64, f64),
    pub d_f_s: f64,
    /// -dF_s - (beta_A W_A + beta_B W_B).
    pub deficit: f64,
    /// Sum of the per-step deficits from the swap bookkeeping.
    pub step_deficit: f64,
    pub steps: Vec<ExtractionStep>,
    pub delta_p: f64,
    pub final_state: DensityMatrix,
    pub final_distance: f64,
}

impl ExtractionReport {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn first_step_bath_free_entropy(&self) -> Option<f64> {
        self.steps.first().map(|s| s.d_f_b)
    }

    pub fn max_step_population(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.delta_p.abs()))
    }
}

/// Drives the system to its generalized Gibbs state at the bath's
/// temperatures, extracting the free-entropy drop as work.
pub fn run_extraction(sys: &SystemSpec, spec: &BathSpec, delta_p: f64, target: &GibbsState) -> Result<ExtractionReport> {
    transform(sys, spec, delta_p, target.state(), target.betas())
}

/// Takes the system from its state to `goal` (full rank) with steps of at
/// most `delta_p`, using the bath and implicit batteries.
pub fn transform(
    sys: &SystemSpec,
    spec: &BathSpec,
    delta_p: f64,
    goal: &DensityMatrix,
    betas: &InverseTemperatures,
) -> Result<ExtractionReport> {
    if sys.charges().len() != 2 || betas.len() != 2 {
        return Err(Error::Argument("extraction needs exactly two charges".into()));
    }
    if goal.dim() != sys.dim() {
        return Err(Error::Dimension { expected: sys.dim(), found: goal.dim() });
    }
    let (beta_a, beta_b) = spec.betas();
    let b = betas.as_slice();
    if (b[0] - beta_a).abs() > 1e-12 * beta_a.abs().max(1.0) || (b[1] - beta_b).abs() > 1e-12 * beta_b.abs().max(1.0) {
        return Err(Error::Argument("system and bath temperatures differ".into()));
    }
    if !(delta_p > 0.0) || delta_p > 0.5 {
        return Err(Error::Argument(format!("delta_p must lie in (0, 0.5], got {delta_p}")));
    }
    validate_bath(spec).into_result()?;
    let goal_spec = SystemSpec::new(goal.clone(), sys.charges().clone())?;
    let t = goal_spec.populations().to_vec();
    if t.iter().any(|&p| p <= 1e-300) {
        return Err(Error::Argument("target state is not full rank".into()));
    }

    let charges = sys.charges();
    let basis = eigenstate_charges(charges, betas)?;
    let (_, sigma) = diagonalize_to_charge_basis(sys, &basis)?;
    let totals = |rho: &DensityMatrix| -> Result<(f64, f64)> {
        Ok((expectation(rho, charges.charge(0))?, expectation(rho, charges.charge(1))?))
    };
    let start = totals(sys.rho())?;
    let rotated = totals(&sigma)?;
    let mut rotation_work = (start.0 - rotated.0, start.1 - rotated.1);

    let levels: Vec<(f64, f64)> = basis.iter().map(|s| (s.averages[0], s.averages[1])).collect();
    let mut state = DiagonalState { populations: sys.populations().to_vec(), levels };
    let (x, y) = xy(spec);
    let tol = delta_p / 20.0;
    let total_move: f64 = state.populations.iter().zip(&t).map(|(p, q)| (p - q).abs()).sum();
    let max_steps = (20.0 * total_move / delta_p) as usize + 20 * t.len() * t.len() + 100;
    let mut steps = Vec::new();
    let (mut w_a, mut w_b) = rotation_work;

    while let Some((i, j, amount)) = next_move(&state.populations, &t) {
        if steps.len() >= max_steps {
            return Err(Error::Resource(format!("no convergence after {max_steps} steps")));
        }
        let d = amount.min(delta_p);
        let (pi, pj) = (state.populations[i], state.populations[j]);
        let g = ((pi - d) / (pj + d)).ln();
        let (dn1, dn2) = select_bath_pair(x, y, g - tol, tol)?;
        let pair = OccupationPair::minimal(spec.d(), dn1, dn2, 0)?;
        let r = (-trade_step(spec, &pair)?.gap).exp();
        let c = pi * r - pj;
        if !(c > 0.0) {
            return Err(Error::Invariant(format!("bath ratio {r} cannot move population {pi} -> {pj}")));
        }
        let w = (d / c).min(1.0 / (1.0 + r));
        let (next, step) = swap_population_step(&state, spec, &pair, (i, j), SwapWeight::Total(w))?;
        w_a += step.d_w_a;
        w_b += step.d_w_b;
        state = next;
        steps.push(step);
    }

    // Final rotation from the charge basis onto the goal's eigenvectors.
    let n = sys.dim();
    let mut diag = CMatrix::zeros(n, n);
    for (k, s) in basis.iter().enumerate() {
        let v = &s.vector;
        diag += v * v.adjoint() * crate::qcore::C64::new(state.populations[k], 0.0);
    }
    let reached = DensityMatrix::new(diag)?;
    let to_goal = basis_map(&basis, goal_spec.eigenvectors())?.adjoint();
    let final_state = apply_unitary(&reached, &to_goal)?;
    let before = totals(&reached)?;
    let after = totals(&final_state)?;
    w_a += before.0 - after.0;
    w_b += before.1 - after.1;
    rotation_work.0 += before.0 - after.0;
    rotation_work.1 += before.1 - after.1;

    let d_f_s = free_entropy(&final_state, charges, betas)? - free_entropy(sys.rho(), charges, betas)?;
    let deficit = -d_f_s - (beta_a * w_a + beta_b * w_b);
    let step_deficit = steps.iter().map(ExtractionStep::deficit).sum();
    let final_distance = trace_distance(&final_state, goal)?;
    Ok(ExtractionReport {
        w_a,
        w_b,
        rotation_work,
        d_f_s,
        deficit,
        step_deficit,
        steps,
        delta_p,
        final_state,
        final_distance,
    })
}

/// Level pair (from, to) with populations above and below target that are
/// furthest from the target ratio, and the most that may move between them.
fn next_move(p: &[f64], t: &[f64]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64, f64)> = None;
    for i in 0..p.len() {
        if p[i] - t[i] <= PROTOCOL_TOL {
            continue;
        }
        for j in 0..p.len() {
            if t[j] - p[j] <= PROTOCOL_TOL {
                continue;
            }
            let mismatch = (p[i] / p[j]).ln() - (t[i] / t[j]).ln();
            if best.is_none_or(|b| mismatch > b.3) {
                best = Some((i, j, (p[i] - t[i]).min(t[j] - p[j]), mismatch));
            }
        }
    }
    best.map(|(i, j, amount, _)| (i, j, amount))
}

/// (F(rho) - F(tau)) / (F(sigma) - F(tau)): copies of sigma obtainable per
/// copy of rho in the reversible limit.
pub fn interconversion_rate(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    charges: &ChargeSet,
    betas: &InverseTemperatures,
) -> Result<f64> {
    let tau = crate::gge::gibbs_state(charges, betas)?;
    let f_tau = free_entropy(tau.state(), charges, betas)?;
    let num = free_entropy(rho, charges, betas)? - f_tau;
    let den = free_entropy(sigma, charges, betas)? - f_tau;
    if den.abs() < 1e-12 {
        return Err(Error::DegenerateReference);
    }
    if rho == sigma {
        return Ok(1.0);
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditMode {
    /// Haar unitaries on system (x) bath.
    Joint,
    /// Haar unitaries on the bath alone; checks beta . W <= 0.
    BathOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditCheck {
    SecondLaw,
    BathOnlyCorollary,
    SubAdditivity,
    BathFreeEntropy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSample {
    /// W_i = -dA_s,i - dA_b,i.
    pub work: Vec<f64>,
    pub d_f_s: f64,
    pub d_f_b: f64,
    pub d_s_s: f64,
    pub d_s_b: f64,
    /// beta . W + dF_s; the second law says <= 0.
    pub second_law_gap: f64,
    pub system_unchanged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditViolation {
    pub trial: usize,
    pub seed: u64,
    pub check: AuditCheck,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub trials: usize,
    pub seed: u64,
    pub max_second_law_gap: f64,
    pub min_entropy_sum: f64,
    pub min_bath_free_entropy: f64,
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Deltas of one joint unitary applied to rho_s (x) tau_b.
pub fn audit_unitary(sys: &SystemSpec, bath: &GibbsState, u: &UnitaryOperator) -> Result<AuditSample> {
    let (ds, db) = (sys.dim(), bath.state().dim());
    let charges_s = sys.charges();
    let charges_b = bath.charges();
    if charges_s.len() != charges_b.len() {
        return Err(Error::Argument("system and bath carry different numbers of charges".into()));
    }
    if ds * db > MAX_DIM {
        return Err(Error::Argument(format!("joint dimension {} exceeds {MAX_DIM}", ds * db)));
    }
    if u.dim() != ds * db {
        return Err(Error::Dimension { expected: ds * db, found: u.dim() });
    }
    let betas = bath.betas();
    let space = ProductSpace::new(vec![ds, db])?;
    let joint = tensor(&[sys.rho(), bath.state()])?;
    let after = apply_unitary(&joint, u)?;
    let rho_s = partial_trace(&after, &space, &[0])?;
    let rho_b = partial_trace(&after, &space, &[1])?;
    let mut work = Vec::with_capacity(betas.len());
    for k in 0..betas.len() {
        let d_s = expectation(&rho_s, charges_s.charge(k))? - expectation(sys.rho(), charges_s.charge(k))?;
        let d_b = expectation(&rho_b, charges_b.charge(k))? - expectation(bath.state(), charges_b.charge(k))?;
        work.push(-d_s - d_b);
    }
    let d_f_s = free_entropy(&rho_s, charges_s, betas)? - free_entropy(sys.rho(), charges_s, betas)?;
    let d_f_b = free_entropy(&rho_b, charges_b, betas)? - free_entropy(bath.state(), charges_b, betas)?;
    let d_s_s = von_neumann_entropy(&rho_s) - von_neumann_entropy(sys.rho());
    let d_s_b = von_neumann_entropy(&rho_b) - von_neumann_entropy(bath.state());
    let beta_w: f64 = work.iter().zip(betas.as_slice()).map(|(w, b)| w * b).sum();
    Ok(AuditSample {
        work,
        d_f_s,
        d_f_b,
        d_s_s,
        d_s_b,
        second_law_gap: beta_w + d_f_s,
        system_unchanged: trace_distance(&rho_s, sys.rho())? <= 1e-12,
    })
}

/// Seeded Haar unitaries; trial k uses seed.wrapping_add(k), recorded with
/// any violation.
pub fn second_law_audit(sys: &SystemSpec, bath: &GibbsState, trials: usize, seed: u64, mode: AuditMode) -> Result<AuditReport> {
    let (ds, db) = (sys.dim(), bath.state().dim());
    let mut report = AuditReport {
        trials,
        seed,
        max_second_law_gap: f64::NEG_INFINITY,
        min_entropy_sum: f64::INFINITY,
        min_bath_free_entropy: f64::INFINITY,
        violations: Vec::new(),
    };
    for trial in 0..trials {
        let trial_seed = seed.wrapping_add(trial as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let u = match mode {
            AuditMode::Joint => UnitaryOperator::haar(ds * db, &mut rng),
            AuditMode::BathOnly => tensor(&[&UnitaryOperator::identity(ds), &UnitaryOperator::haar(db, &mut rng)])?,
        };
        let s = audit_unitary(sys, bath, &u)?;
        report.max_second_law_gap = report.max_second_law_gap.max(s.second_law_gap);
        report.min_entropy_sum = report.min_entropy_sum.min(s.d_s_s + s.d_s_b);
        report.min_bath_free_entropy = report.min_bath_free_entropy.min(s.d_f_b);
        let mut flag = |check, value| report.violations.push(AuditViolation { trial, seed: trial_seed, check, value });
        if s.second_law_gap > AUDIT_TOL {
            flag(AuditCheck::SecondLaw, s.second_law_gap);
        }
        if s.system_unchanged {
            let beta_w: f64 = s.work.iter().zip(bath.betas().as_slice()).map(|(w, b)| w * b).sum();
            if beta_w > AUDIT_TOL {
                flag(AuditCheck::BathOnlyCorollary, beta_w);
            }
        }
        if s.d_s_s + s.d_s_b < -AUDIT_TOL {
            flag(AuditCheck::SubAdditivity, s.d_s_s + s.d_s_b);
        }
        if s.d_f_b < -AUDIT_TOL {
            flag(AuditCheck::BathFreeEntropy, s.d_f_b);
        }
    }
    Ok(report)
}
