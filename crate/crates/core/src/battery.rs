//! Explicit batteries: weights on charge ladders.
//!
//! A ladder is a ring of rungs with charge offset + k spacing. The shift
//! Gamma^s moves a weight up by s rungs. A unitary U on system (x) bath is
//! made strictly conserving by lifting each matrix element U_ij to
//! U_ij |i><j| (x) Gamma_A^{s_ij} (x) Gamma_B^{t_ij}, where s_ij spacing_A =
//! a_j - a_i. The ring keeps Gamma exactly unitary; weights must stay clear
//! of the seam by a guard band of four times the largest shift.
//!
//! The reduced system-bath state after a lifted unitary is computed two
//! ways: from position-space overlaps chi(d) = <w|Gamma^d|w>, and as the
//! momentum mixture sum_{m,l} mu_A(m) mu_B(l) V(m,l) rho V(m,l)^dagger.

use std::collections::BTreeMap;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::gge::ChargeSet;
use crate::qcore::{
    apply_unitary, max_abs, trace_distance, von_neumann_entropy, CMatrix, DensityMatrix, Operator, UnitaryOperator, C64,
    MAX_DIM,
};

/// Amplitudes at or below this count as empty in the guard band.
pub const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ladder {
    size: usize,
    spacing: f64,
    offset: f64,
}

impl Ladder {
    pub fn new(size: usize, spacing: f64, offset: f64) -> Result<Self> {
        if size < 3 {
            return Err(Error::Argument(format!("a ladder needs at least 3 rungs, got {size}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() || !offset.is_finite() {
            return Err(Error::Argument(format!("bad ladder spacing {spacing} or offset {offset}")));
        }
        Ok(Ladder { size, spacing, offset })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn value(&self, rung: usize) -> f64 {
        self.offset + rung as f64 * self.spacing
    }

    /// Rungs needed to store `gap` units of charge.
    pub fn shift_for_gap(&self, gap: f64) -> Result<i64> {
        let s = (gap / self.spacing).round();
        if (gap - s * self.spacing).abs() > 1e-12 * gap.abs().max(1.0) {
            return Err(Error::Commensurability { gap, spacing: self.spacing });
        }
        Ok(s as i64)
    }

    fn wrap(&self, k: i64) -> usize {
        k.rem_euclid(self.size as i64) as usize
    }
}

/// Gamma^shift on a ladder ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShiftOperator {
    pub size: usize,
    pub shift: i64,
}

impl ShiftOperator {
    pub fn new(ladder: &Ladder, shift: i64) -> Self {
        ShiftOperator { size: ladder.size, shift }
    }

    pub fn apply(&self, amps: &[C64]) -> Vec<C64> {
        let n = self.size as i64;
        let mut out = vec![C64::new(0.0, 0.0); self.size];
        for (k, a) in amps.iter().enumerate() {
            out[(k as i64 + self.shift).rem_euclid(n) as usize] = *a;
        }
        out
    }

    /// Like `apply`, but refuses weights that would cross the seam.
    pub fn apply_checked(&self, w: &WeightState, guard: usize) -> Result<Vec<C64>> {
        w.check_guard(guard.max(self.shift.unsigned_abs() as usize))?;
        Ok(self.apply(&w.amplitudes))
    }

    pub fn matrix(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.size, self.size);
        for k in 0..self.size {
            m[((k as i64 + self.shift).rem_euclid(self.size as i64) as usize, k)] = C64::new(1.0, 0.0);
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightProfile {
    Gaussian { center: f64, width: f64 },
    /// Plane wave e^{2 pi i m k / N}: an exact eigenstate of every shift,
    /// so it is allowed to cover the seam.
    Momentum { m: usize },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightState {
    ladder: Ladder,
    amplitudes: Vec<C64>,
    profile: WeightProfile,
}

impl WeightState {
    pub fn new(ladder: Ladder, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != ladder.size {
            return Err(Error::Dimension { expected: ladder.size, found: amplitudes.len() });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Invariant(format!("weight norm {norm} differs from 1")));
        }
        Ok(WeightState { ladder, amplitudes, profile: WeightProfile::Custom })
    }

    /// Position wavefunction exp(-(k - center)^2 / (4 width^2)), so the rung
    /// distribution has standard deviation `width`.
    pub fn gaussian(ladder: Ladder, center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::Argument(format!("width must be positive, got {width}")));
        }
        let raw: Vec<f64> = (0..ladder.size)
            .map(|k| (-(k as f64 - center).powi(2) / (4.0 * width * width)).exp())
            .collect();
        let norm = raw.iter().map(|a| a * a).sum::<f64>().sqrt();
        let amplitudes = raw.iter().map(|a| C64::new(a / norm, 0.0)).collect();
        Ok(WeightState { ladder, amplitudes, profile: WeightProfile::Gaussian { center, width } })
    }

    /// Gaussian centred on a fresh ladder of the given spacing, long enough
    /// that amplitudes within `guard` rungs of either end stay below the
    /// support tolerance. Rung values run symmetrically around zero.
    pub fn padded_gaussian(width: f64, guard: usize, spacing: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::Argument(format!("width must be positive, got {width}")));
        }
        let half = (11.0 * width).ceil() as usize + guard + 2;
        let ladder = Ladder::new(2 * half + 1, spacing, -(half as f64) * spacing)?;
        Self::gaussian(ladder, half as f64, width)
    }

    pub fn momentum(ladder: Ladder, m: usize) -> Self {
        let n = ladder.size as f64;
        let amplitudes = (0..ladder.size)
            .map(|k| C64::from_polar(1.0 / n.sqrt(), 2.0 * std::f64::consts::PI * (m * k) as f64 / n))
            .collect();
        WeightState { ladder, amplitudes, profile: WeightProfile::Momentum { m: m % ladder.size } }
    }

    pub fn ladder(&self) -> &Ladder {
        &self.ladder
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn profile(&self) -> WeightProfile {
        self.profile
    }

    /// Errors if any amplitude within `guard` rungs of either end exceeds
    /// the support tolerance. Momentum eigenstates are exempt.
    pub fn check_guard(&self, guard: usize) -> Result<()> {
        if matches!(self.profile, WeightProfile::Momentum { .. }) {
            return Ok(());
        }
        let n = self.ladder.size;
        if 2 * guard >= n {
            return Err(Error::GuardBand { guard });
        }
        let edge = (0..guard).chain(n - guard..n);
        if edge.into_iter().any(|k| self.amplitudes[k].norm() > SUPPORT_TOL) {
            return Err(Error::GuardBand { guard });
        }
        Ok(())
    }

    /// Mean charge stored on the ladder.
    pub fn mean_charge(&self) -> f64 {
        self.amplitudes.iter().enumerate().map(|(k, a)| a.norm_sqr() * self.ladder.value(k)).sum()
    }

    /// mu(m) = |FFT(w)_m|^2 / N, which sums to one.
    pub fn momentum_distribution(&self) -> Vec<f64> {
        momentum_distribution(&self.amplitudes)
    }

    /// chi(d) = <w|Gamma^d|w> = sum_m conj(w[m + d]) w[m] on the ring.
    pub fn overlap(&self, d: i64) -> C64 {
        let n = self.ladder.size as i64;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(m, a)| self.amplitudes[(m as i64 + d).rem_euclid(n) as usize].conj() * a)
            .sum()
    }
}

pub fn momentum_distribution(amps: &[C64]) -> Vec<f64> {
    let n = amps.len();
    let mut buf = amps.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().map(|z| z.norm_sqr() / n as f64).collect()
}

/// One term U_ij |i><j| (x) Gamma_A^shift_a (x) Gamma_B^shift_b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub row: usize,
    pub col: usize,
    pub coeff: C64,
    pub shift_a: i64,
    pub shift_b: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedUnitary {
    dim: usize,
    blocks: Vec<Block>,
    levels: Vec<(f64, f64)>,
    ladder_a: Ladder,
    ladder_b: Ladder,
}

/// Entries below this magnitude are dropped and need no commensurate gap.
const ZERO_ENTRY: f64 = 1e-15;

impl LiftedUnitary {
    /// Merges terms with equal (row, col, shifts) and drops zeros.
    fn from_terms(dim: usize, terms: Vec<Block>, levels: Vec<(f64, f64)>, ladder_a: Ladder, ladder_b: Ladder) -> Self {
        let mut merged: BTreeMap<(usize, usize, i64, i64), C64> = BTreeMap::new();
        for t in terms {
            *merged.entry((t.row, t.col, t.shift_a, t.shift_b)).or_insert(C64::new(0.0, 0.0)) += t.coeff;
        }
        let blocks = merged
            .into_iter()
            .filter(|(_, c)| c.norm() > ZERO_ENTRY)
            .map(|((row, col, shift_a, shift_b), coeff)| Block { row, col, coeff, shift_a, shift_b })
            .collect();
        LiftedUnitary { dim, blocks, levels, ladder_a, ladder_b }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn sb_dim(&self) -> usize {
        self.dim
    }

    pub fn ladders(&self) -> (&Ladder, &Ladder) {
        (&self.ladder_a, &self.ladder_b)
    }

    pub fn joint_dim(&self) -> usize {
        self.dim * self.ladder_a.size * self.ladder_b.size
    }

    pub fn max_shifts(&self) -> (i64, i64) {
        self.blocks
            .iter()
            .fold((0, 0), |(a, b), k| (a.max(k.shift_a.abs()), b.max(k.shift_b.abs())))
    }

    /// Four times the largest shift on each ladder.
    pub fn guards(&self) -> (usize, usize) {
        let (a, b) = self.max_shifts();
        (4 * a as usize, 4 * b as usize)
    }

    /// V(m, l)_ij = U_ij e^{-2 pi i (m s_ij / N_A + l t_ij / N_B)}.
    pub fn momentum_unitary(&self, m: usize, l: usize) -> CMatrix {
        let (na, nb) = (self.ladder_a.size as f64, self.ladder_b.size as f64);
        let mut v = CMatrix::zeros(self.dim, self.dim);
        for b in &self.blocks {
            let phase = -2.0 * std::f64::consts::PI * (m as f64 * b.shift_a as f64 / na + l as f64 * b.shift_b as f64 / nb);
            v[(b.row, b.col)] += b.coeff * C64::from_polar(1.0, phase);
        }
        v
    }

    /// The unitary with the ladders ignored, V(0, 0).
    pub fn base_unitary(&self) -> Result<UnitaryOperator> {
        UnitaryOperator::new(self.momentum_unitary(0, 0))
    }

    fn index(&self, i: usize, ka: usize, kb: usize) -> usize {
        (i * self.ladder_a.size + ka) * self.ladder_b.size + kb
    }

    /// Acts on a joint vector laid out as [sb][rung A][rung B].
    pub fn apply_joint(&self, psi: &[C64]) -> Result<Vec<C64>> {
        if psi.len() != self.joint_dim() {
            return Err(Error::Dimension { expected: self.joint_dim(), found: psi.len() });
        }
        let (na, nb) = (self.ladder_a.size, self.ladder_b.size);
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        for b in &self.blocks {
            for ka in 0..na {
                let ta = self.ladder_a.wrap(ka as i64 + b.shift_a);
                for kb in 0..nb {
                    let tb = self.ladder_b.wrap(kb as i64 + b.shift_b);
                    out[self.index(b.row, ta, tb)] += b.coeff * psi[self.index(b.col, ka, kb)];
                }
            }
        }
        Ok(out)
    }

    /// Dense matrix on the joint space, for small ladders.
    pub fn dense_matrix(&self) -> Result<CMatrix> {
        let n = self.joint_dim();
        if n > MAX_DIM {
            return Err(Error::Argument(format!("joint dimension {n} exceeds {MAX_DIM}")));
        }
        let mut m = CMatrix::zeros(n, n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        for col in 0..n {
            e[col] = C64::new(1.0, 0.0);
            for (row, z) in self.apply_joint(&e)?.into_iter().enumerate() {
                m[(row, col)] = z;
            }
            e[col] = C64::new(0.0, 0.0);
        }
        Ok(m)
    }

    /// Frobenius norms of [U, A_total] and [U, B_total] restricted to columns
    /// whose rungs lie outside the guard bands.
    pub fn conservation_defects(&self) -> (f64, f64) {
        let (ga, gb) = self.guards();
        let (na, nb) = (self.ladder_a.size, self.ladder_b.size);
        let (mut da, mut db) = (0.0, 0.0);
        for b in &self.blocks {
            let (ai, bi) = self.levels[b.row];
            let (aj, bj) = self.levels[b.col];
            let w = b.coeff.norm_sqr();
            for ka in ga..na.saturating_sub(ga) {
                let ta = self.ladder_a.wrap(ka as i64 + b.shift_a);
                let ea = ai + self.ladder_a.value(ta) - aj - self.ladder_a.value(ka);
                for kb in gb..nb.saturating_sub(gb) {
                    let tb = self.ladder_b.wrap(kb as i64 + b.shift_b);
                    let eb = bi + self.ladder_b.value(tb) - bj - self.ladder_b.value(kb);
                    da += w * ea * ea;
                    db += w * eb * eb;
                }
            }
        }
        (da.sqrt(), db.sqrt())
    }

    /// Largest |(U Gamma - Gamma U) psi| over a few fixed vectors, for the
    /// shift by one rung on each ladder.
    pub fn translation_defects(&self) -> Result<(f64, f64)> {
        let n = self.joint_dim();
        let (na, nb) = (self.ladder_a.size, self.ladder_b.size);
        let shift = |psi: &[C64], da: i64, db: i64| -> Vec<C64> {
            let mut out = vec![C64::new(0.0, 0.0); n];
            for i in 0..self.dim {
                for ka in 0..na {
                    for kb in 0..nb {
                        let t = self.index(i, self.ladder_a.wrap(ka as i64 + da), self.ladder_b.wrap(kb as i64 + db));
                        out[t] = psi[self.index(i, ka, kb)];
                    }
                }
            }
            out
        };
        let mut worst = (0.0f64, 0.0f64);
        for seed in 1..=3u64 {
            let psi: Vec<C64> = (0..n)
                .map(|k| {
                    let t = (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15 ^ seed) as f64 / u64::MAX as f64;
                    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * t)
                })
                .collect();
            for (which, (da, db)) in [(0, (1, 0)), (1, (0, 1))] {
                let lhs = self.apply_joint(&shift(&psi, da, db))?;
                let rhs = shift(&self.apply_joint(&psi)?, da, db);
                let d = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                if which == 0 {
                    worst.0 = worst.0.max(d);
                } else {
                    worst.1 = worst.1.max(d);
                }
            }
        }
        Ok(worst)
    }

    fn check_weights(&self, wa: &WeightState, wb: &WeightState) -> Result<()> {
        if wa.ladder != self.ladder_a || wb.ladder != self.ladder_b {
            return Err(Error::Argument("weights live on different ladders".into()));
        }
        let (ga, gb) = self.guards();
        wa.check_guard(ga)?;
        wb.check_guard(gb)
    }

    /// tr_w[U (rho (x) w_A (x) w_B) U^dagger] from weight overlaps.
    pub fn reduced_sb(&self, rho: &DensityMatrix, wa: &WeightState, wb: &WeightState) -> Result<DensityMatrix> {
        self.check_weights(wa, wb)?;
        if rho.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, found: rho.dim() });
        }
        let mut chi_a = BTreeMap::new();
        let mut chi_b = BTreeMap::new();
        let r = rho.matrix();
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for b in &self.blocks {
            for c in &self.blocks {
                let da = b.shift_a - c.shift_a;
                let db = b.shift_b - c.shift_b;
                let xa = *chi_a.entry(da).or_insert_with(|| wa.overlap(da));
                let xb = *chi_b.entry(db).or_insert_with(|| wb.overlap(db));
                out[(b.row, c.row)] += b.coeff * r[(b.col, c.col)] * c.coeff.conj() * xa * xb;
            }
        }
        DensityMatrix::new(out)
    }

    /// The same reduced state as a mixture of V(m, l) rho V(m, l)^dagger over
    /// the weights' momentum distributions. Momenta with joint weight below
    /// 1e-30 are skipped.
    pub fn reduced_sb_mixture(&self, rho: &DensityMatrix, wa: &WeightState, wb: &WeightState) -> Result<DensityMatrix> {
        self.check_weights(wa, wb)?;
        let mu_a = wa.momentum_distribution();
        let mu_b = wb.momentum_distribution();
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (m, pa) in mu_a.iter().enumerate() {
            for (l, pb) in mu_b.iter().enumerate() {
                let p = pa * pb;
                if p < 1e-30 {
                    continue;
                }
                let v = self.momentum_unitary(m, l);
                out += (&v * rho.matrix() * v.adjoint()) * C64::new(p, 0.0);
            }
        }
        DensityMatrix::new(out)
    }

    /// Full evolution of rho (x) w_A (x) w_B, branch by branch over the
    /// eigenvectors of rho.
    pub fn evolve(&self, rho: &DensityMatrix, wa: &WeightState, wb: &WeightState) -> Result<ExplicitRun> {
        self.check_weights(wa, wb)?;
        let (na, nb) = (self.ladder_a.size, self.ladder_b.size);
        let eig = rho.eigh();
        let mut sb = CMatrix::zeros(self.dim, self.dim);
        let mut pos_a = vec![0.0; na];
        let mut pos_b = vec![0.0; nb];
        let mut mom_a = vec![0.0; na];
        let mut mom_b = vec![0.0; nb];
        let mut charge_sb = (0.0, 0.0);
        for (r, &lambda) in eig.values.iter().enumerate() {
            if lambda <= 1e-15 {
                continue;
            }
            let phi = eig.vectors.column(r);
            let mut psi = vec![C64::new(0.0, 0.0); self.joint_dim()];
            for i in 0..self.dim {
                for ka in 0..na {
                    for kb in 0..nb {
                        psi[self.index(i, ka, kb)] = phi[i] * wa.amplitudes[ka] * wb.amplitudes[kb];
                    }
                }
            }
            let out = self.apply_joint(&psi)?;
            for i in 0..self.dim {
                for j in 0..self.dim {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..na * nb {
                        acc += out[i * na * nb + k] * out[j * na * nb + k].conj();
                    }
                    sb[(i, j)] += acc * lambda;
                }
                let mut slab_a = vec![C64::new(0.0, 0.0); na];
                for kb in 0..nb {
                    for (ka, s) in slab_a.iter_mut().enumerate() {
                        *s = out[self.index(i, ka, kb)];
                    }
                    for (ka, s) in slab_a.iter().enumerate() {
                        pos_a[ka] += lambda * s.norm_sqr();
                        pos_b[kb] += lambda * s.norm_sqr();
                    }
                    for (m, p) in momentum_distribution(&slab_a).into_iter().enumerate() {
                        mom_a[m] += lambda * p;
                    }
                }
                for ka in 0..na {
                    let slab_b: Vec<C64> = (0..nb).map(|kb| out[self.index(i, ka, kb)]).collect();
                    for (l, p) in momentum_distribution(&slab_b).into_iter().enumerate() {
                        mom_b[l] += lambda * p;
                    }
                }
            }
        }
        let rho_sb = DensityMatrix::new(sb)?;
        for (i, (a, b)) in self.levels.iter().enumerate() {
            let p = rho_sb.matrix()[(i, i)].re - rho.matrix()[(i, i)].re;
            charge_sb.0 += p * a;
            charge_sb.1 += p * b;
        }
        let mean = |pos: &[f64], l: &Ladder| pos.iter().enumerate().map(|(k, p)| p * l.value(k)).sum::<f64>();
        Ok(ExplicitRun {
            rho_sb,
            d_a_sb: charge_sb.0,
            d_b_sb: charge_sb.1,
            d_a_w: mean(&pos_a, &self.ladder_a) - wa.mean_charge(),
            d_b_w: mean(&pos_b, &self.ladder_b) - wb.mean_charge(),
            momentum_a: mom_a,
            momentum_b: mom_b,
        })
    }
}

/// Outcome of a full explicit-battery evolution.
#[derive(Debug, Clone)]
pub struct ExplicitRun {
    pub rho_sb: DensityMatrix,
    /// Change of the summed system + bath charges.
    pub d_a_sb: f64,
    pub d_b_sb: f64,
    /// Change of the mean charge stored on each ladder.
    pub d_a_w: f64,
    pub d_b_w: f64,
    /// Momentum distributions of the weights afterwards.
    pub momentum_a: Vec<f64>,
    pub momentum_b: Vec<f64>,
}

/// Lifts U on system (x) bath, whose basis state i carries charges
/// `levels[i]`, to a strictly conserving unitary with both ladders.
pub fn lift_unitary(u: &UnitaryOperator, levels: &[(f64, f64)], ladder_a: Ladder, ladder_b: Ladder) -> Result<LiftedUnitary> {
    let d = u.dim();
    if levels.len() != d {
        return Err(Error::Dimension { expected: d, found: levels.len() });
    }
    if d * ladder_a.size * ladder_b.size > 1 << 26 {
        return Err(Error::Resource("joint space too large".into()));
    }
    let mut terms = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let c = u.matrix()[(i, j)];
            if c.norm() <= ZERO_ENTRY {
                continue;
            }
            let shift_a = ladder_a.shift_for_gap(levels[j].0 - levels[i].0)?;
            let shift_b = ladder_b.shift_for_gap(levels[j].1 - levels[i].1)?;
            terms.push(Block { row: i, col: j, coeff: c, shift_a, shift_b });
        }
    }
    Ok(LiftedUnitary::from_terms(d, terms, levels.to_vec(), ladder_a, ladder_b))
}

/// Lift for charges given as operators; only jointly diagonal charges are
/// supported under strict conservation.
pub fn lift_for_charges(u: &UnitaryOperator, charges: &ChargeSet, ladder_a: Ladder, ladder_b: Ladder) -> Result<LiftedUnitary> {
    if charges.len() != 2 {
        return Err(Error::Argument("two charges expected".into()));
    }
    if charges.charges().iter().any(|c| !c.is_diagonal(1e-12)) {
        return Err(Error::Unsupported("strict conservation with non-diagonal (non-commuting) charges".into()));
    }
    let a = charges.charge(0).diagonal();
    let b = charges.charge(1).diagonal();
    let levels: Vec<(f64, f64)> = a.into_iter().zip(b).collect();
    lift_unitary(u, &levels, ladder_a, ladder_b)
}

/// Rotation of the system into its charge basis, identity on a bath of
/// `bath_levels.len()` states. `c` maps system basis j to row i.
pub fn build_u1(
    c: &UnitaryOperator,
    system_levels: &[(f64, f64)],
    bath_levels: &[(f64, f64)],
    ladder_a: Ladder,
    ladder_b: Ladder,
) -> Result<LiftedUnitary> {
    let ds = c.dim();
    if system_levels.len() != ds {
        return Err(Error::Dimension { expected: ds, found: system_levels.len() });
    }
    let db = bath_levels.len();
    let mut terms = Vec::new();
    let mut levels = Vec::with_capacity(ds * db);
    for (sa, sb) in system_levels {
        for (ba, bb) in bath_levels {
            levels.push((sa + ba, sb + bb));
        }
    }
    for i in 0..ds {
        for j in 0..ds {
            let coeff = c.matrix()[(i, j)];
            if coeff.norm() <= ZERO_ENTRY {
                continue;
            }
            let shift_a = ladder_a.shift_for_gap(system_levels[j].0 - system_levels[i].0)?;
            let shift_b = ladder_b.shift_for_gap(system_levels[j].1 - system_levels[i].1)?;
            for k in 0..db {
                terms.push(Block { row: i * db + k, col: j * db + k, coeff, shift_a, shift_b });
            }
        }
    }
    Ok(LiftedUnitary::from_terms(ds * db, terms, levels, ladder_a, ladder_b))
}

/// Swap of the system-bath states `upper` = |n alpha, 1> and `lower` =
/// |n' alpha', 0>, assembled as identity + the two shifted cross terms -
/// the two projectors. The ladders absorb
/// eps = (charge of `upper`) - (charge of `lower`).
pub fn build_u2(levels: &[(f64, f64)], upper: usize, lower: usize, ladder_a: Ladder, ladder_b: Ladder) -> Result<LiftedUnitary> {
    let d = levels.len();
    if upper >= d || lower >= d || upper == lower {
        return Err(Error::Argument(format!("bad swap states ({upper}, {lower}) for dimension {d}")));
    }
    let eps_a = ladder_a.shift_for_gap(levels[upper].0 - levels[lower].0)?;
    let eps_b = ladder_b.shift_for_gap(levels[upper].1 - levels[lower].1)?;
    let one = C64::new(1.0, 0.0);
    let block = |row, col, coeff, shift_a, shift_b| Block { row, col, coeff, shift_a, shift_b };
    let mut terms: Vec<Block> = (0..d).map(|k| block(k, k, one, 0, 0)).collect();
    terms.push(block(lower, upper, one, eps_a, eps_b));
    terms.push(block(upper, lower, one, -eps_a, -eps_b));
    terms.push(block(upper, upper, -one, 0, 0));
    terms.push(block(lower, lower, -one, 0, 0));
    Ok(LiftedUnitary::from_terms(d, terms, levels.to_vec(), ladder_a, ladder_b))
}

/// Trace distance between the explicit-battery result and U rho U^dagger.
pub fn implicit_explicit_gap(rho_sb: &DensityMatrix, wa: &WeightState, wb: &WeightState, lifted: &LiftedUnitary) -> Result<f64> {
    let explicit = lifted.reduced_sb(rho_sb, wa, wb)?;
    let implicit = apply_unitary(rho_sb, &lifted.base_unitary()?)?;
    trace_distance(&explicit, &implicit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyCheck {
    /// S(rho'_sb) - S(rho_sb).
    pub d_s: f64,
    /// Largest entry of the overlap result minus the momentum mixture.
    pub mixture_defect: f64,
}

/// Entropy change of system and bath under a lifted unitary with the
/// weights traced out, cross-checked against the momentum mixture.
pub fn entropy_nondecrease_check(lifted: &LiftedUnitary, rho_sb: &DensityMatrix, wa: &WeightState, wb: &WeightState) -> Result<EntropyCheck> {
    let (ta, tb) = lifted.translation_defects()?;
    if ta > 1e-10 || tb > 1e-10 {
        return Err(Error::Precondition(format!("not translation invariant ({ta:e}, {tb:e})")));
    }
    let after = lifted.reduced_sb(rho_sb, wa, wb)?;
    let mixture = lifted.reduced_sb_mixture(rho_sb, wa, wb)?;
    let check = EntropyCheck {
        d_s: von_neumann_entropy(&after) - von_neumann_entropy(rho_sb),
        mixture_defect: max_abs(&(after.matrix() - mixture.matrix())),
    };
    if check.d_s < -1e-10 {
        return Err(Error::Invariant(format!("entropy of system and bath fell by {:e}", -check.d_s)));
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder(n: usize) -> Ladder {
        Ladder::new(n, 1.0, 0.0).unwrap()
    }

    #[test]
    fn ladder_checks() {
        assert!(Ladder::new(2, 1.0, 0.0).is_err());
        assert!(Ladder::new(5, 0.0, 0.0).is_err());
        let l = Ladder::new(5, 0.5, -1.0).unwrap();
        assert_eq!(l.value(4), 1.0);
        assert_eq!(l.shift_for_gap(-1.5).unwrap(), -3);
        assert!(matches!(l.shift_for_gap(0.7), Err(Error::Commensurability { .. })));
    }

    #[test]
    fn shift_is_unitary_permutation() {
        let s = ShiftOperator::new(&ladder(7), -3);
        let m = s.matrix();
        assert!(max_abs(&(&m * m.adjoint() - CMatrix::identity(7, 7))) == 0.0);
        let w = WeightState::gaussian(ladder(7), 3.0, 0.3).unwrap();
        assert_eq!(s.apply(&w.amplitudes)[0], w.amplitudes[3]);
    }

    #[test]
    fn guard_band_refuses_edge_support() {
        let w = WeightState::gaussian(ladder(32), 3.0, 1.0).unwrap();
        assert!(matches!(w.check_guard(4), Err(Error::GuardBand { .. })));
        assert!(WeightState::gaussian(ladder(64), 32.0, 1.0).unwrap().check_guard(8).is_ok());
        assert!(WeightState::momentum(ladder(8), 3).check_guard(4).is_ok());
    }

    #[test]
    fn momentum_distribution_normalised() {
        let w = WeightState::gaussian(ladder(50), 25.0, 3.0).unwrap();
        let mu = w.momentum_distribution();
        assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = WeightState::momentum(ladder(16), 5).momentum_distribution();
        assert!((p[5] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_lifts_to_identity() {
        let levels = vec![(0.0, 0.0), (1.0, 2.0)];
        let l = lift_unitary(&UnitaryOperator::identity(2), &levels, ladder(4), ladder(4)).unwrap();
        assert!(l.blocks().iter().all(|b| b.shift_a == 0 && b.shift_b == 0));
        assert_eq!(l.conservation_defects(), (0.0, 0.0));
    }

    #[test]
    fn degenerate_swap_needs_no_shift() {
        let levels = vec![(1.0, 0.5), (1.0, 0.5)];
        let l = lift_unitary(&UnitaryOperator::permutation(&[1, 0]).unwrap(), &levels, ladder(4), ladder(4)).unwrap();
        assert_eq!(l.max_shifts(), (0, 0));
    }

    #[test]
    fn noncommuting_charges_unsupported() {
        let c = ChargeSet::unnamed(vec![crate::qcore::HermitianOperator::pauli_x(), crate::qcore::HermitianOperator::pauli_z()]).unwrap();
        let err = lift_for_charges(&UnitaryOperator::identity(2), &c, ladder(4), ladder(4)).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn u2_without_gap_is_plain_swap() {
        let levels = vec![(0.0, 0.0), (1.0, 1.0), (1.0, 1.0)];
        let l = build_u2(&levels, 1, 2, ladder(4), ladder(4)).unwrap();
        assert_eq!(l.max_shifts(), (0, 0));
        let u = l.base_unitary().unwrap();
        assert_eq!(u, UnitaryOperator::permutation(&[0, 2, 1]).unwrap());
    }
}
