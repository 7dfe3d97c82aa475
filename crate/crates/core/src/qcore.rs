//! Dense Hermitian linear algebra on finite-dimensional Hilbert spaces.
//!
//! Every operator is a dense `DMatrix<Complex<f64>>` wrapped in a newtype whose
//! constructor checks the relevant invariant. Operations that preserve the
//! invariant by construction skip the full check and only assert the cheap
//! parts in debug builds.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-10;
/// Eigenvalues below this contribute nothing to the entropy.
pub const ENTROPY_CLIP: f64 = 1e-14;
pub const MAX_DIM: usize = 4096;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Largest entrywise modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn check_square(m: &CMatrix) -> Result<usize> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension { expected: n, found: m.ncols() });
    }
    if n == 0 {
        return Err(Error::Argument("operator of dimension 0".into()));
    }
    if n > MAX_DIM {
        return Err(Error::Argument(format!("dimension {n} exceeds the cap {MAX_DIM}")));
    }
    Ok(n)
}

/// Complex matrix product. Large products go through four real products,
/// which hit the blocked f64 kernel instead of the generic complex loop.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    if a.nrows() * a.ncols() * b.ncols() <= 48 * 48 * 48 {
        return a * b;
    }
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    re.zip_map(&im, C64::new)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Column k is the eigenvector for `values[k]`.
    pub vectors: CMatrix,
}

impl Eigh {
    fn of(m: &CMatrix) -> Eigh {
        let n = m.nrows();
        let eig = SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = CMatrix::zeros(n, n);
        for (k, &i) in order.iter().enumerate() {
            vectors.set_column(k, &eig.eigenvectors.column(i));
        }
        Eigh { values, vectors }
    }

    /// V diag(f(lambda)) V^dagger.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (k, &v) in self.values.iter().enumerate() {
            let s = f(v);
            scaled.column_mut(k).scale_mut(s);
        }
        matmul(&scaled, &self.vectors.adjoint())
    }
}

/// Shared view of the dense matrix behind each operator newtype.
pub trait Operator: Sized {
    fn matrix(&self) -> &CMatrix;

    fn dim(&self) -> usize {
        self.matrix().nrows()
    }

    /// Wraps a Kronecker product of operators of the same kind; the product
    /// inherits the invariant from its factors.
    #[doc(hidden)]
    fn from_product(m: CMatrix) -> Self;
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

impl HermitianOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let defect = hermitian_defect(&m);
        if defect > HERMITIAN_TOL {
            return Err(Error::Invariant(format!("matrix is not Hermitian (defect {defect:e})")));
        }
        Ok(HermitianOperator { m: symmetrize(&m) })
    }

    pub(crate) fn from_valid(m: CMatrix) -> Self {
        debug_assert!(hermitian_defect(&m) <= 1e-9 * (1.0 + max_abs(&m)));
        HermitianOperator { m: symmetrize(&m) }
    }

    pub fn from_real(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension { expected: n, found: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = C64::new(v, 0.0);
            }
        }
        Self::new(m)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite diagonal entry".into()));
        }
        let d = CVector::from_iterator(diag.len(), diag.iter().map(|&v| C64::new(v, 0.0)));
        Self::new(CMatrix::from_diagonal(&d))
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator { m: CMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianOperator { m: CMatrix::identity(dim, dim) }
    }

    pub fn pauli_x() -> Self {
        Self::from_valid(CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]))
    }

    pub fn pauli_y() -> Self {
        let i = C64::new(0.0, 1.0);
        Self::from_valid(CMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]))
    }

    pub fn pauli_z() -> Self {
        Self::from_valid(CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]))
    }

    pub fn spin1_x() -> Self {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::from_valid(CMatrix::from_row_slice(3, 3, &[ZERO, s, ZERO, s, ZERO, s, ZERO, s, ZERO]))
    }

    pub fn spin1_y() -> Self {
        let s = C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
        Self::from_valid(CMatrix::from_row_slice(3, 3, &[ZERO, -s, ZERO, s, ZERO, -s, ZERO, s, ZERO]))
    }

    pub fn spin1_z() -> Self {
        Self::from_valid(CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, ZERO, -ONE])))
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn eigh(&self) -> Eigh {
        Eigh::of(&self.m)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigh().values
    }

    pub fn scaled(&self, s: f64) -> Self {
        HermitianOperator { m: &self.m * C64::new(s, 0.0) }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: other.dim() });
        }
        Ok(HermitianOperator { m: &self.m + &other.m })
    }

    /// Sum of c_i O_i.
    pub fn linear_combination(coeffs: &[f64], ops: &[HermitianOperator]) -> Result<Self> {
        if coeffs.len() != ops.len() || ops.is_empty() {
            return Err(Error::Argument(format!(
                "{} coefficients for {} operators",
                coeffs.len(),
                ops.len()
            )));
        }
        let mut acc = HermitianOperator::zeros(ops[0].dim());
        for (c, op) in coeffs.iter().zip(ops) {
            if op.dim() != acc.dim() {
                return Err(Error::Dimension { expected: acc.dim(), found: op.dim() });
            }
            acc.m += &op.m * C64::new(*c, 0.0);
        }
        Ok(acc)
    }

    /// Max-abs entry of [self, other].
    pub fn commutator_norm(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: other.dim() });
        }
        Ok(max_abs(&(matmul(&self.m, &other.m) - matmul(&other.m, &self.m))))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m[(i, i)].re).collect()
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.m[(i, j)].norm() <= tol))
    }

    /// Conjugation V^dagger self V.
    pub fn conjugated(&self, v: &UnitaryOperator) -> Result<Self> {
        if self.dim() != v.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: v.dim() });
        }
        Ok(Self::from_valid(matmul(&matmul(&v.m.adjoint(), &self.m), &v.m)))
    }
}

impl Operator for HermitianOperator {
    fn matrix(&self) -> &CMatrix {
        &self.m
    }
    fn from_product(m: CMatrix) -> Self {
        HermitianOperator { m }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let defect = hermitian_defect(&m);
        if defect > HERMITIAN_TOL {
            return Err(Error::Invariant(format!("state is not Hermitian (defect {defect:e})")));
        }
        let m = symmetrize(&m);
        let tr = m.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::Invariant(format!("trace is {tr}, not 1")));
        }
        let low = Eigh::of(&m).values[0];
        if low < -PSD_TOL {
            return Err(Error::Invariant(format!("negative eigenvalue {low:e}")));
        }
        Ok(DensityMatrix { m })
    }

    /// For results that are states by construction. Debug builds check the
    /// Hermitian and trace parts; the spectrum is checked only for small dims.
    pub(crate) fn from_valid(m: CMatrix) -> Self {
        let m = symmetrize(&m);
        debug_assert!((m.trace().re - 1.0).abs() <= 1e-9, "trace drifted to {}", m.trace().re);
        debug_assert!(m.nrows() > 64 || Eigh::of(&m).values[0] >= -1e-9);
        DensityMatrix { m }
    }

    pub fn from_populations(p: &[f64]) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Argument("empty population list".into()));
        }
        let d = CVector::from_iterator(p.len(), p.iter().map(|&v| C64::new(v, 0.0)));
        Self::new(CMatrix::from_diagonal(&d))
    }

    /// |psi><psi| for a unit vector.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Invariant(format!("state vector has norm {norm}")));
        }
        Self::new(psi * psi.adjoint())
    }

    pub fn basis_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::Argument(format!("basis index {k} out of range for dim {dim}")));
        }
        let mut p = vec![0.0; dim];
        p[k] = 1.0;
        Self::from_populations(&p)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix { m: CMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0) }
    }

    /// rho = G G^dagger / tr, G Ginibre.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let g = ginibre(dim, rng);
        let m = matmul(&g, &g.adjoint());
        let tr = m.trace().re;
        Self::from_valid(m / C64::new(tr, 0.0))
    }

    pub fn random_pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let g = ginibre(dim, rng);
        let psi = g.column(0).into_owned();
        let psi = &psi / C64::new(psi.norm(), 0.0);
        Self::from_valid(&psi * psi.adjoint())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn eigh(&self) -> Eigh {
        Eigh::of(&self.m)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigh().values
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m[(i, i)].re).collect()
    }

    /// (1 - t) self + t other.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: other.dim() });
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Argument(format!("mixing weight {t} outside [0, 1]")));
        }
        Ok(Self::from_valid(&self.m * C64::new(1.0 - t, 0.0) + &other.m * C64::new(t, 0.0)))
    }

    pub fn as_hermitian(&self) -> HermitianOperator {
        HermitianOperator { m: self.m.clone() }
    }
}

impl Operator for DensityMatrix {
    fn matrix(&self) -> &CMatrix {
        &self.m
    }
    fn from_product(m: CMatrix) -> Self {
        DensityMatrix { m }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    m: CMatrix,
}

impl UnitaryOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        let n = check_square(&m)?;
        let defect = max_abs(&(matmul(&m, &m.adjoint()) - CMatrix::identity(n, n)));
        if defect > UNITARY_TOL {
            return Err(Error::Invariant(format!("U U^dagger deviates from identity by {defect:e}")));
        }
        Ok(UnitaryOperator { m })
    }

    pub(crate) fn from_valid(m: CMatrix) -> Self {
        debug_assert!(
            m.nrows() > 256
                || max_abs(&(matmul(&m, &m.adjoint()) - CMatrix::identity(m.nrows(), m.nrows())))
                    <= 1e-9
        );
        UnitaryOperator { m }
    }

    pub fn identity(dim: usize) -> Self {
        UnitaryOperator { m: CMatrix::identity(dim, dim) }
    }

    /// U|j> = |perm[j]>.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        let mut m = CMatrix::zeros(n, n);
        for (j, &i) in perm.iter().enumerate() {
            if i >= n || seen[i] {
                return Err(Error::Argument("not a permutation".into()));
            }
            seen[i] = true;
            m[(i, j)] = ONE;
        }
        check_square(&m)?;
        Ok(UnitaryOperator { m })
    }

    /// Exchange of the two factors of C^d1 (x) C^d2, mapping a (x) b to b (x) a.
    pub fn swap(d1: usize, d2: usize) -> Result<Self> {
        let perm: Vec<usize> = (0..d1 * d2).map(|k| (k % d2) * d1 + k / d2).collect();
        Self::permutation(&perm)
    }

    /// Haar-distributed unitary: QR of a complex Ginibre matrix with the
    /// phases of R's diagonal pushed into Q.
    pub fn haar<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let qr = ginibre(dim, rng).qr();
        let (mut q, r) = (qr.q(), qr.r());
        for k in 0..dim {
            let d = r[(k, k)];
            let phase = if d.norm() > 0.0 { d / C64::new(d.norm(), 0.0) } else { ONE };
            q.column_mut(k).scale_mut_complex(phase);
        }
        Self::from_valid(q)
    }

    /// Unitary whose k-th column is column k of `columns` (must be orthonormal).
    pub fn from_columns(columns: CMatrix) -> Result<Self> {
        Self::new(columns)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn adjoint(&self) -> Self {
        UnitaryOperator { m: self.m.adjoint() }
    }

    /// self * other.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: other.dim() });
        }
        Ok(UnitaryOperator { m: matmul(&self.m, &other.m) })
    }

    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        max_abs(&(matmul(&self.m, &self.m.adjoint()) - CMatrix::identity(n, n)))
    }
}

impl Operator for UnitaryOperator {
    fn matrix(&self) -> &CMatrix {
        &self.m
    }
    fn from_product(m: CMatrix) -> Self {
        UnitaryOperator { m }
    }
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, s: C64);
}

impl<S> ScaleComplex for nalgebra::Matrix<C64, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<C64, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_complex(&mut self, s: C64) {
        for z in self.iter_mut() {
            *z *= s;
        }
    }
}

fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Ordered tensor factors, first factor most significant in the index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductSpace {
    factors: Vec<usize>,
}

impl ProductSpace {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() || factors.contains(&0) {
            return Err(Error::Argument("factors must be a non-empty list of positive dims".into()));
        }
        let total = factors.iter().try_fold(1usize, |acc, &f| acc.checked_mul(f));
        match total {
            Some(t) if t <= MAX_DIM => Ok(ProductSpace { factors }),
            _ => Err(Error::Argument(format!("total dimension exceeds the cap {MAX_DIM}"))),
        }
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().product()
    }

    /// Mixed-radix digits of a flat index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (k, &f) in self.factors.iter().enumerate().rev() {
            out[k] = index % f;
            index /= f;
        }
        out
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.factors).fold(0, |acc, (&d, &f)| acc * f + d)
    }
}

/// exp(scale * H) through the eigendecomposition of H.
pub fn hermitian_exp(h: &HermitianOperator, scale: f64) -> HermitianOperator {
    let eig = h.eigh();
    HermitianOperator::from_valid(eig.reconstruct(|v| (scale * v).exp()))
}

/// Entropy in nats. Eigenvalues below [`ENTROPY_CLIP`] count as zero.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_spectrum(&rho.eigenvalues())
}

pub fn entropy_of_spectrum(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&v| v > ENTROPY_CLIP)
        .map(|&v| -v * v.ln())
        .sum()
}

/// S(rho || sigma) = tr rho ln rho - tr rho ln sigma. Infinite when the
/// support of rho leaves that of sigma.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    let eig = sigma.eigh();
    let mut cross = 0.0;
    for (k, &lambda) in eig.values.iter().enumerate() {
        let v = eig.vectors.column(k);
        let weight = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
        if lambda <= ENTROPY_CLIP {
            if weight > ENTROPY_CLIP {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        cross += weight * lambda.ln();
    }
    Ok(-von_neumann_entropy(rho) - cross)
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension { expected: a, found: b });
    }
    Ok(())
}

/// Reduction of `rho` onto the factors listed (ascending) in `keep`.
pub fn partial_trace(rho: &DensityMatrix, space: &ProductSpace, keep: &[usize]) -> Result<DensityMatrix> {
    same_dim(space.dim(), rho.dim())?;
    let nf = space.factors.len();
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= nf) {
        return Err(Error::Argument(format!(
            "keep set {keep:?} must be ascending indices below {nf}"
        )));
    }
    let traced: Vec<usize> = (0..nf).filter(|k| !keep.contains(k)).collect();
    let kept_dims: Vec<usize> = keep.iter().map(|&k| space.factors[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| space.factors[k]).collect();
    let dk: usize = kept_dims.iter().product();
    let dt: usize = traced_dims.iter().product();

    // Flat index of every (kept, traced) combination.
    let mut flat = vec![0usize; dk * dt];
    let kept_space = ProductSpace { factors: kept_dims };
    let traced_space = ProductSpace { factors: if traced_dims.is_empty() { vec![1] } else { traced_dims } };
    let mut digits = vec![0usize; nf];
    for a in 0..dk {
        let ka = kept_space.digits(a);
        for t in 0..dt {
            let ta = traced_space.digits(t);
            for (slot, &k) in keep.iter().enumerate() {
                digits[k] = ka[slot];
            }
            for (slot, &k) in traced.iter().enumerate() {
                digits[k] = ta[slot];
            }
            flat[a * dt + t] = space.index(&digits);
        }
    }

    let m = rho.matrix();
    let out = CMatrix::from_fn(dk, dk, |a, b| {
        (0..dt).fold(ZERO, |acc, t| acc + m[(flat[a * dt + t], flat[b * dt + t])])
    });
    Ok(DensityMatrix::from_valid(out))
}

/// tr(obs rho), imaginary round-off discarded.
pub fn expectation(rho: &DensityMatrix, obs: &HermitianOperator) -> Result<f64> {
    same_dim(rho.dim(), obs.dim())?;
    let (r, o) = (rho.matrix(), obs.matrix());
    let n = r.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (r[(i, j)] * o[(j, i)]).re;
        }
    }
    Ok(acc)
}

pub fn apply_unitary(rho: &DensityMatrix, u: &UnitaryOperator) -> Result<DensityMatrix> {
    same_dim(u.dim(), rho.dim())?;
    let out = matmul(&matmul(u.matrix(), rho.matrix()), &u.matrix().adjoint());
    Ok(DensityMatrix::from_valid(out))
}

/// (1/2) sum |eig(rho - sigma)|.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    let diff = symmetrize(&(rho.matrix() - sigma.matrix()));
    Ok(0.5 * Eigh::of(&diff).values.iter().map(|v| v.abs()).sum::<f64>())
}

/// Kronecker product in the given order.
pub fn tensor<O: Operator>(ops: &[&O]) -> Result<O> {
    let (first, rest) = ops.split_first().ok_or_else(|| Error::Argument("empty tensor product".into()))?;
    let total = ops.iter().try_fold(1usize, |acc, o| acc.checked_mul(o.dim()));
    if !matches!(total, Some(t) if t <= MAX_DIM) {
        return Err(Error::Argument(format!("tensor product exceeds the cap {MAX_DIM}")));
    }
    let mut acc = first.matrix().clone();
    for op in rest {
        acc = acc.kronecker(op.matrix());
    }
    Ok(O::from_product(acc))
}

/// I (x) ... (x) op (x) ... (x) I with `op` on factor `index`.
pub fn embed(op: &HermitianOperator, space: &ProductSpace, index: usize) -> Result<HermitianOperator> {
    let f = space.factors();
    if index >= f.len() {
        return Err(Error::Argument(format!("factor {index} out of range")));
    }
    same_dim(f[index], op.dim())?;
    let left: usize = f[..index].iter().product();
    let right: usize = f[index + 1..].iter().product();
    let m = CMatrix::identity(left, left)
        .kronecker(op.matrix())
        .kronecker(&CMatrix::identity(right, right));
    Ok(HermitianOperator { m })
}
