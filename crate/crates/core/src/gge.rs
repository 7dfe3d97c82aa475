//! Generalized Gibbs ensembles.
//!
//! For charges A_1..A_k and inverse temperatures beta_i the thermal state is
//! tau = exp(-sum_i beta_i A_i) / Z. It minimizes the free entropy
//! F(rho) = sum_i beta_i <A_i> - S(rho), with F(tau) = -ln Z, and maximizes
//! the entropy among states sharing its charge averages. Non-commuting
//! charges go through the same code path: only the weighted sum is
//! exponentiated.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::qcore::{
    expectation, hermitian_exp, matmul, max_abs, trace_distance, von_neumann_entropy, CMatrix,
    CVector, DensityMatrix, HermitianOperator, Operator, ProductSpace, C64,
};

/// Central-difference step for the Jacobian of beta -> averages.
pub const FD_STEP: f64 = 1e-5;
pub const MAX_NEWTON_ITERS: usize = 60;
const MAX_HALVINGS: usize = 50;
/// |beta| beyond this is read as the targets leaving the admissible set.
pub const BETA_DIVERGENCE: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct ChargeSet {
    charges: Vec<HermitianOperator>,
    names: Vec<String>,
}

impl ChargeSet {
    pub fn new(charges: Vec<HermitianOperator>, names: Vec<String>) -> Result<Self> {
        let first = charges.first().ok_or_else(|| Error::Argument("a charge set needs k >= 1".into()))?;
        let dim = first.dim();
        if let Some(bad) = charges.iter().find(|c| c.dim() != dim) {
            return Err(Error::Dimension { expected: dim, found: bad.dim() });
        }
        if names.len() != charges.len() {
            return Err(Error::Argument(format!("{} names for {} charges", names.len(), charges.len())));
        }
        Ok(ChargeSet { charges, names })
    }

    /// Names default to A, B, C, ...
    pub fn unnamed(charges: Vec<HermitianOperator>) -> Result<Self> {
        let names = (0..charges.len()).map(default_name).collect();
        Self::new(charges, names)
    }

    /// Diagonal charges from per-level values: `levels[i][j]` is the value
    /// of charge j on basis state i.
    pub fn from_levels(levels: &[Vec<f64>]) -> Result<Self> {
        let k = levels.first().map(|l| l.len()).unwrap_or(0);
        if levels.iter().any(|l| l.len() != k) {
            return Err(Error::Argument("ragged level table".into()));
        }
        let charges = (0..k)
            .map(|j| HermitianOperator::from_diagonal(&levels.iter().map(|l| l[j]).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        Self::unnamed(charges)
    }

    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.charges[0].dim()
    }

    pub fn charges(&self) -> &[HermitianOperator] {
        &self.charges
    }

    pub fn charge(&self, i: usize) -> &HermitianOperator {
        &self.charges[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn weighted_sum(&self, betas: &InverseTemperatures) -> Result<HermitianOperator> {
        self.check_betas(betas)?;
        HermitianOperator::linear_combination(betas.as_slice(), &self.charges)
    }

    pub fn averages(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        self.charges.iter().map(|a| expectation(rho, a)).collect()
    }

    /// True when every pair commutes to within `tol` (max-abs).
    pub fn commuting(&self, tol: f64) -> bool {
        let k = self.len();
        (0..k).all(|i| (i + 1..k).all(|j| self.charges[i].commutator_norm(&self.charges[j]).unwrap_or(f64::INFINITY) <= tol))
    }

    /// The same charges acting on factor `index` of a product space.
    pub fn embedded(&self, space: &ProductSpace, index: usize) -> Result<Self> {
        let charges = self
            .charges
            .iter()
            .map(|a| crate::qcore::embed(a, space, index))
            .collect::<Result<Vec<_>>>()?;
        Self::new(charges, self.names.clone())
    }

    /// Charge-wise sum with another set on the same space.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::Argument(format!("{} vs {} charges", self.len(), other.len())));
        }
        let charges = self
            .charges
            .iter()
            .zip(&other.charges)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(charges, self.names.clone())
    }

    fn check_betas(&self, betas: &InverseTemperatures) -> Result<()> {
        if betas.len() != self.len() {
            return Err(Error::Argument(format!(
                "{} inverse temperatures for {} charges",
                betas.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

fn default_name(i: usize) -> String {
    if i < 26 {
        ((b'A' + i as u8) as char).to_string()
    } else {
        format!("Q{i}")
    }
}

/// One beta per charge, in inverse units of that charge. Negative values allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseTemperatures(Vec<f64>);

impl InverseTemperatures {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() || betas.iter().any(|b| !b.is_finite()) {
            return Err(Error::Argument(format!("inverse temperatures must be finite and non-empty: {betas:?}")));
        }
        Ok(InverseTemperatures(betas))
    }

    pub fn zeros(k: usize) -> Self {
        InverseTemperatures(vec![0.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|b| b * b).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct GibbsState {
    state: DensityMatrix,
    log_partition: f64,
    betas: InverseTemperatures,
    charges: ChargeSet,
}

impl GibbsState {
    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn betas(&self) -> &InverseTemperatures {
        &self.betas
    }

    pub fn charges(&self) -> &ChargeSet {
        &self.charges
    }

    pub fn averages(&self) -> Vec<f64> {
        self.charges.averages(&self.state).expect("dims agree by construction")
    }

    /// F(tau) = -ln Z.
    pub fn free_entropy(&self) -> f64 {
        -self.log_partition
    }

    /// Max-abs distance between the stored state and exp(-sum beta A)/Z
    /// rebuilt from scratch with the partition function taken from the trace.
    pub fn reconstruction_defect(&self) -> f64 {
        let r = self.charges.weighted_sum(&self.betas).expect("dims agree by construction");
        let shift = r.eigenvalues()[0];
        let shifted = r.add(&HermitianOperator::identity(r.dim()).scaled(-shift)).expect("same dim");
        let unnorm = hermitian_exp(&shifted, -1.0);
        let z_shifted = unnorm.matrix().trace().re;
        let rebuilt = unnorm.matrix() / C64::new(z_shifted, 0.0);
        let log_z = z_shifted.ln() - shift;
        max_abs(&(rebuilt - self.state.matrix())).max((log_z - self.log_partition).abs())
    }
}

/// tau = exp(-sum beta_i A_i) / Z, with ln Z from a shifted log-sum-exp.
pub fn gibbs_state(charges: &ChargeSet, betas: &InverseTemperatures) -> Result<GibbsState> {
    let r = charges.weighted_sum(betas)?;
    let eig = r.eigh();
    let log_z = log_sum_exp_neg(&eig.values);
    let state = DensityMatrix::from_valid(eig.reconstruct(|v| (-v - log_z).exp()));
    Ok(GibbsState { state, log_partition: log_z, betas: betas.clone(), charges: charges.clone() })
}

/// ln sum exp(-v).
fn log_sum_exp_neg(values: &[f64]) -> f64 {
    let low = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let s: f64 = values.iter().map(|v| (-(v - low)).exp()).sum();
    s.ln() - low
}

/// F(rho) = sum_i beta_i tr(A_i rho) - S(rho).
pub fn free_entropy(rho: &DensityMatrix, charges: &ChargeSet, betas: &InverseTemperatures) -> Result<f64> {
    charges.check_betas(betas)?;
    let avg = charges.averages(rho)?;
    let energy: f64 = avg.iter().zip(betas.as_slice()).map(|(a, b)| a * b).sum();
    Ok(energy - von_neumann_entropy(rho))
}

fn residual(charges: &ChargeSet, betas: &[f64], targets: &[f64]) -> Result<Vec<f64>> {
    let tau = gibbs_state(charges, &InverseTemperatures::new(betas.to_vec())?)?;
    Ok(tau.averages().iter().zip(targets).map(|(a, t)| a - t).collect())
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Finds beta with |<A_i>_tau(beta) - target_i| <= tol for every i.
///
/// Damped Newton on the averages map. The Jacobian comes from central
/// differences of [`gibbs_state`], so non-commuting charges need nothing
/// special. Steps are halved until the residual norm drops.
pub fn solve_betas(
    charges: &ChargeSet,
    targets: &[f64],
    init: &InverseTemperatures,
    tol: f64,
) -> Result<InverseTemperatures> {
    let k = charges.len();
    if targets.len() != k {
        return Err(Error::Argument(format!("{} targets for {k} charges", targets.len())));
    }
    charges.check_betas(init)?;
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let mut beta = init.as_slice().to_vec();
    let mut res = residual(charges, &beta, targets)?;
    for _ in 0..MAX_NEWTON_ITERS {
        if norm_inf(&res) <= tol {
            return InverseTemperatures::new(beta);
        }
        let jac = jacobian(charges, &beta, targets)?;
        let rhs = DVector::from_iterator(k, res.iter().map(|r| -r));
        let step = match jac.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => jac
                .svd(true, true)
                .solve(&rhs, 1e-14)
                .map_err(|e| Error::Invariant(format!("singular Jacobian: {e}")))?,
        };

        let current = norm2(&res);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
            if let Ok(r) = residual(charges, &trial, targets) {
                if norm2(&r) < current {
                    accepted = Some((trial, r));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next, r)) = accepted else {
            return Err(Error::NonConvergence { iterations: MAX_NEWTON_ITERS, residual: norm_inf(&res) });
        };
        beta = next;
        res = r;
        let n = norm2(&beta);
        if n > BETA_DIVERGENCE {
            return Err(Error::Range { norm: n, residual: norm_inf(&res) });
        }
    }
    if norm_inf(&res) <= tol {
        return InverseTemperatures::new(beta);
    }
    Err(Error::NonConvergence { iterations: MAX_NEWTON_ITERS, residual: norm_inf(&res) })
}

fn jacobian(charges: &ChargeSet, beta: &[f64], targets: &[f64]) -> Result<DMatrix<f64>> {
    let k = beta.len();
    let mut jac = DMatrix::zeros(k, k);
    for j in 0..k {
        let mut up = beta.to_vec();
        let mut down = beta.to_vec();
        up[j] += FD_STEP;
        down[j] -= FD_STEP;
        let fu = residual(charges, &up, targets)?;
        let fd = residual(charges, &down, targets)?;
        for i in 0..k {
            jac[(i, j)] = (fu[i] - fd[i]) / (2.0 * FD_STEP);
        }
    }
    Ok(jac)
}

/// One eigenstate of sum_i beta_i A_i with its population and charge averages.
#[derive(Debug, Clone)]
pub struct EigenstateCharges {
    pub eigenvalue: f64,
    /// <i|A_j|i> for each charge j.
    pub averages: Vec<f64>,
    /// q_i = exp(-eigenvalue) / Z.
    pub population: f64,
    pub vector: CVector,
}

/// Eigenstates of sum_i beta_i A_i in ascending eigenvalue order (descending
/// population).
///
/// Inside a degenerate block the basis diagonalizes A_1 restricted to the
/// block, then A_2 within any remaining degeneracy, and so on. Each vector's
/// largest component is made real positive.
pub fn eigenstate_charges(charges: &ChargeSet, betas: &InverseTemperatures) -> Result<Vec<EigenstateCharges>> {
    let r = charges.weighted_sum(betas)?;
    let eig = r.eigh();
    let log_z = log_sum_exp_neg(&eig.values);
    let n = r.dim();
    let scale = eig.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));

    let mut columns: Vec<CVector> = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (eig.values[end] - eig.values[start]).abs() <= 1e-10 * scale {
            end += 1;
        }
        let block = eig.vectors.columns(start, end - start).into_owned();
        let lambda = eig.values[start..end].iter().sum::<f64>() / (end - start) as f64;
        for v in refine_block(block, charges.charges(), 0) {
            columns.push(v);
            values.push(lambda);
        }
        start = end;
    }

    let mut out = Vec::with_capacity(n);
    for (v, lambda) in columns.into_iter().zip(values) {
        let v = fix_phase(v);
        let averages = charges
            .charges()
            .iter()
            .map(|a| (v.adjoint() * a.matrix() * &v)[(0, 0)].re)
            .collect();
        out.push(EigenstateCharges { eigenvalue: lambda, averages, population: (-lambda - log_z).exp(), vector: v });
    }
    Ok(out)
}

fn refine_block(block: CMatrix, charges: &[HermitianOperator], level: usize) -> Vec<CVector> {
    let m = block.ncols();
    if m == 1 || level == charges.len() {
        return block.column_iter().map(|c| c.into_owned()).collect();
    }
    let restricted = matmul(&matmul(&block.adjoint(), charges[level].matrix()), &block);
    let local = HermitianOperator::from_valid(restricted).eigh();
    let rotated = matmul(&block, &local.vectors);
    let scale = local.values.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let mut out = Vec::with_capacity(m);
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && (local.values[end] - local.values[start]).abs() <= 1e-10 * scale {
            end += 1;
        }
        out.extend(refine_block(rotated.columns(start, end - start).into_owned(), charges, level + 1));
        start = end;
    }
    out
}

fn fix_phase(v: CVector) -> CVector {
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > v[best].norm() + 1e-12 {
            best = i;
        }
    }
    let z = v[best];
    if z.norm() == 0.0 {
        return v;
    }
    let phase = z.conj() / C64::new(z.norm(), 0.0);
    v.map(|c| c * phase)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    RandomMixed,
    RandomPure,
    MixtureWithThermal,
    MatchedAverages,
}

#[derive(Debug, Clone)]
pub struct MinimalityViolation {
    pub kind: SampleKind,
    /// F(rho) - F(tau), or S(rho) - S(tau) for the entropy dual.
    pub gap: f64,
    pub state: DensityMatrix,
}

#[derive(Debug, Clone)]
pub struct MinimalityReport {
    pub trials: usize,
    /// F(tau) = -ln Z.
    pub thermal_free_entropy: f64,
    pub min_gap: f64,
    pub matched_samples: usize,
    /// Largest S(rho) - S(tau) - sum_i |beta_i d_i| among samples whose
    /// averages sit within 1e-6 of tau's (d is the residual mismatch).
    pub max_entropy_excess: f64,
    pub violations: Vec<MinimalityViolation>,
}

impl MinimalityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.violations.first() {
            None => Ok(self),
            Some(v) => Err(Error::Property(format!(
                "{} violations; first ({:?}) has gap {:e}",
                self.violations.len(),
                v.kind,
                v.gap
            ))),
        }
    }
}

/// Samples states around tau and checks F(rho) >= F(tau) - 1e-12, plus the
/// entropy dual on perturbations that keep every charge average fixed.
pub fn verify_minimality(
    charges: &ChargeSet,
    betas: &InverseTemperatures,
    trials: usize,
    seed: u64,
) -> Result<MinimalityReport> {
    if trials == 0 {
        return Err(Error::Argument("trials must be at least 1".into()));
    }
    let tau = gibbs_state(charges, betas)?;
    let f_tau = tau.free_entropy();
    let s_tau = von_neumann_entropy(tau.state());
    let avg_tau = tau.averages();
    let dim = charges.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions = traceless_complement(charges);

    let mut report = MinimalityReport {
        trials,
        thermal_free_entropy: f_tau,
        min_gap: f64::INFINITY,
        matched_samples: 0,
        max_entropy_excess: f64::NEG_INFINITY,
        violations: Vec::new(),
    };
    for t in 0..trials {
        let kind = match t % 4 {
            0 => SampleKind::RandomMixed,
            1 => SampleKind::RandomPure,
            2 => SampleKind::MixtureWithThermal,
            _ if !directions.is_empty() => SampleKind::MatchedAverages,
            _ => SampleKind::MixtureWithThermal,
        };
        let rho = match kind {
            SampleKind::RandomMixed => DensityMatrix::random(dim, &mut rng),
            SampleKind::RandomPure => DensityMatrix::random_pure(dim, &mut rng),
            SampleKind::MixtureWithThermal => {
                let w = 10f64.powf(-6.0 * rng.random::<f64>());
                tau.state().mix(&DensityMatrix::random(dim, &mut rng), w)?
            }
            SampleKind::MatchedAverages => matched_perturbation(&tau, &directions, &mut rng)?,
        };
        let gap = free_entropy(&rho, charges, betas)? - f_tau;
        report.min_gap = report.min_gap.min(gap);
        if gap < -1e-12 {
            report.violations.push(MinimalityViolation { kind, gap, state: rho.clone() });
        }
        let avg = charges.averages(&rho)?;
        if avg.iter().zip(&avg_tau).all(|(a, b)| (a - b).abs() <= 1e-6) {
            report.matched_samples += 1;
            // A residual average mismatch d lets the entropy rise by up to
            // sum_i beta_i d_i without contradicting minimality.
            let slack: f64 = avg.iter().zip(&avg_tau).zip(betas.as_slice()).map(|((a, b), beta)| (beta * (a - b)).abs()).sum();
            let excess = von_neumann_entropy(&rho) - s_tau - slack;
            report.max_entropy_excess = report.max_entropy_excess.max(excess);
            if excess > 1e-6 {
                report.violations.push(MinimalityViolation { kind, gap: excess, state: rho });
            }
        }
    }
    Ok(report)
}

/// Orthonormal (Hilbert-Schmidt) basis of Hermitian directions orthogonal
/// to the identity and every charge, built from the matrix units.
fn traceless_complement(charges: &ChargeSet) -> Vec<CMatrix> {
    let dim = charges.dim();
    let ip = |a: &CMatrix, b: &CMatrix| a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum::<f64>();
    let mut basis: Vec<CMatrix> = Vec::new();
    let push = |m: CMatrix, basis: &mut Vec<CMatrix>| -> bool {
        let mut v = m;
        for _ in 0..2 {
            for b in basis.iter() {
                let c = ip(b, &v);
                v -= b * C64::new(c, 0.0);
            }
        }
        let n = ip(&v, &v).sqrt();
        if n > 1e-9 {
            basis.push(v / C64::new(n, 0.0));
            true
        } else {
            false
        }
    };
    push(CMatrix::identity(dim, dim), &mut basis);
    for a in charges.charges() {
        push(a.matrix().clone(), &mut basis);
    }
    let fixed = basis.len();
    for i in 0..dim {
        for j in i..dim {
            let mut m = CMatrix::zeros(dim, dim);
            m[(i, j)] = C64::new(1.0, 0.0);
            m[(j, i)] = C64::new(1.0, 0.0);
            push(m, &mut basis);
            if i != j {
                let mut m = CMatrix::zeros(dim, dim);
                m[(i, j)] = C64::new(0.0, 1.0);
                m[(j, i)] = C64::new(0.0, -1.0);
                push(m, &mut basis);
            }
        }
    }
    basis.split_off(fixed)
}

fn matched_perturbation<R: Rng>(tau: &GibbsState, directions: &[CMatrix], rng: &mut R) -> Result<DensityMatrix> {
    let mut delta = CMatrix::zeros(tau.state().dim(), tau.state().dim());
    for d in directions {
        delta += d * C64::new(rng.random::<f64>() * 2.0 - 1.0, 0.0);
    }
    let op_norm = HermitianOperator::from_valid(delta.clone())
        .eigenvalues()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = tau.state().eigenvalues()[0];
    let s = floor / op_norm * rng.random::<f64>();
    DensityMatrix::new(tau.state().matrix() + delta * C64::new(s, 0.0))
}

/// Trace distance from tau, for the equality case of the minimality property.
pub fn distance_to_thermal(rho: &DensityMatrix, tau: &GibbsState) -> Result<f64> {
    trace_distance(rho, tau.state())
}
