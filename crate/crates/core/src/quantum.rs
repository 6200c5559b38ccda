//! Dense operator algebra on `internal ⊗ mode_0 ⊗ mode_1 ⊗ …` Hilbert spaces.
//!
//! The internal factor is the three-level system ordered `(g1, g2, e)`; every
//! mode is a harmonic oscillator truncated at `N_max`, i.e. it keeps the Fock
//! levels `0..=N_max`. Basis index of `|level, n_0, n_1, …⟩` follows the
//! Kronecker convention with the internal level most significant.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use faer::{Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};

pub type C64 = faer::c64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Largest total dimension a [`HilbertSpace`] may have unless a larger budget is given.
pub const DEFAULT_DENSE_BUDGET: usize = 4096;

/// Bound on the population of the top two Fock levels before a truncation warning.
pub const TAIL_BOUND: f64 = 1e-8;

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    G1,
    G2,
    E,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::G1, Level::G2, Level::E];

    pub fn index(self) -> usize {
        match self {
            Level::G1 => 0,
            Level::G2 => 1,
            Level::E => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Level::G1 => "g1",
            Level::G2 => "g2",
            Level::E => "e",
        }
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "g1" => Ok(Level::G1),
            "g2" => Ok(Level::G2),
            "e" => Ok(Level::E),
            other => Err(Error::Domain(format!("unknown internal level `{other}`"))),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpace {
    internal_dim: usize,
    mode_cutoffs: Vec<usize>,
}

impl HilbertSpace {
    pub fn new(internal_dim: usize, mode_cutoffs: Vec<usize>) -> Result<Self> {
        Self::with_budget(internal_dim, mode_cutoffs, DEFAULT_DENSE_BUDGET)
    }

    pub fn with_budget(internal_dim: usize, mode_cutoffs: Vec<usize>, budget: usize) -> Result<Self> {
        if internal_dim < 2 {
            return Err(Error::InvalidDimension(format!("internal dimension must be at least 2, got {internal_dim}")));
        }
        if let Some(bad) = mode_cutoffs.iter().find(|&&n| n < 1) {
            return Err(Error::InvalidDimension(format!("Fock cutoff must be at least 1, got {bad}")));
        }
        let dim = mode_cutoffs
            .iter()
            .try_fold(internal_dim, |acc, &n| acc.checked_mul(n + 1))
            .ok_or_else(|| Error::Resource("Hilbert-space dimension overflows".into()))?;
        if dim > budget {
            return Err(Error::Resource(format!("Hilbert-space dimension {dim} exceeds the dense budget {budget}")));
        }
        Ok(Self { internal_dim, mode_cutoffs })
    }

    /// Three-level internal space with the given mode cutoffs.
    pub fn three_level(mode_cutoffs: &[usize]) -> Result<Self> {
        Self::new(3, mode_cutoffs.to_vec())
    }

    pub fn internal_dim(&self) -> usize {
        self.internal_dim
    }

    pub fn mode_cutoffs(&self) -> &[usize] {
        &self.mode_cutoffs
    }

    pub fn n_modes(&self) -> usize {
        self.mode_cutoffs.len()
    }

    pub fn mode_dim(&self, mode: usize) -> usize {
        self.mode_cutoffs[mode] + 1
    }

    /// Dimension of the motional factor (product over modes).
    pub fn motional_dim(&self) -> usize {
        self.mode_cutoffs.iter().map(|n| n + 1).product()
    }

    pub fn dim(&self) -> usize {
        self.internal_dim * self.motional_dim()
    }

    /// Basis index of `|level, fock[0], fock[1], …⟩`.
    pub fn index(&self, level: usize, fock: &[usize]) -> usize {
        debug_assert_eq!(fock.len(), self.n_modes());
        let mut idx = level;
        for (m, &n) in fock.iter().enumerate() {
            debug_assert!(n <= self.mode_cutoffs[m]);
            idx = idx * self.mode_dim(m) + n;
        }
        idx
    }

    /// Inverse of [`HilbertSpace::index`].
    pub fn decompose(&self, mut idx: usize) -> (usize, Vec<usize>) {
        let mut fock = vec![0; self.n_modes()];
        for m in (0..self.n_modes()).rev() {
            let d = self.mode_dim(m);
            fock[m] = idx % d;
            idx /= d;
        }
        (idx, fock)
    }

    fn check_level(&self, level: Level) -> Result<usize> {
        let i = level.index();
        if i >= self.internal_dim {
            return Err(Error::Domain(format!(
                "level {level} does not exist in a {}-level internal space",
                self.internal_dim
            )));
        }
        Ok(i)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes() {
            return Err(Error::Domain(format!("mode {mode} does not exist ({} modes)", self.n_modes())));
        }
        Ok(())
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Mat<C64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = Mat::<C64>::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for l in 0..bc {
                for k in 0..br {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Largest entrywise modulus of `a - a†`.
pub fn hermiticity_defect(a: MatRef<'_, C64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Hermitian part `(a + a†)/2`.
pub(crate) fn hermitian_part(a: MatRef<'_, C64>) -> Mat<C64> {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

fn max_abs(a: MatRef<'_, C64>) -> f64 {
    let mut m = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// Annihilation operator on the Fock levels `0..=cutoff`.
pub fn annihilation(cutoff: usize) -> Result<Mat<C64>> {
    if cutoff < 1 {
        return Err(Error::InvalidDimension(format!("Fock cutoff must be at least 1, got {cutoff}")));
    }
    let d = cutoff + 1;
    let mut b = Mat::<C64>::zeros(d, d);
    for n in 1..d {
        b[(n - 1, n)] = c((n as f64).sqrt());
    }
    Ok(b)
}

pub fn creation(cutoff: usize) -> Result<Mat<C64>> {
    Ok(annihilation(cutoff)?.adjoint().to_owned())
}

/// Number operator built directly as `diag(0, 1, …, cutoff)`.
pub fn number_operator(cutoff: usize) -> Result<Mat<C64>> {
    if cutoff < 1 {
        return Err(Error::InvalidDimension(format!("Fock cutoff must be at least 1, got {cutoff}")));
    }
    Ok(Mat::from_fn(cutoff + 1, cutoff + 1, |i, j| if i == j { c(i as f64) } else { ZERO }))
}

/// Position quadrature `x̂ = (b + b†)/√2`; every Lamb-Dicke phase multiplies this operator.
pub fn position_quadrature(cutoff: usize) -> Result<Mat<C64>> {
    let b = annihilation(cutoff)?;
    let x = &b + b.adjoint();
    Ok(faer::Scale(c(std::f64::consts::FRAC_1_SQRT_2)) * &x)
}

/// `exp(iθ x̂)` on the truncated mode, computed from the eigendecomposition of the
/// truncated `x̂` so the result is exactly unitary.
pub fn displacement_phase(cutoff: usize, theta: f64) -> Result<Mat<C64>> {
    let x = position_quadrature(cutoff)?;
    let evd = x
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition of x failed: {e:?}")))?;
    let u = evd.U();
    let s = evd.S();
    let d = cutoff + 1;
    let mut phased = u.to_owned();
    for k in 0..d {
        let ph = C64::from_polar(1.0, theta * s[k].re);
        for i in 0..d {
            phased[(i, k)] *= ph;
        }
    }
    Ok(&phased * u.adjoint())
}

/// Operator on a [`HilbertSpace`] stored as a dense matrix.
#[derive(Clone, Debug)]
pub struct Operator {
    space: HilbertSpace,
    mat: Mat<C64>,
}

impl Operator {
    pub fn from_matrix(space: HilbertSpace, mat: Mat<C64>) -> Result<Self> {
        let d = space.dim();
        if mat.nrows() != mat.ncols() {
            return Err(Error::InvalidDimension(format!(
                "operator matrix is {}x{}, not square",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, found: mat.nrows() });
        }
        Ok(Self { space, mat })
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let d = space.dim();
        Self { space: space.clone(), mat: Mat::zeros(d, d) }
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        let d = space.dim();
        Self { space: space.clone(), mat: Mat::identity(d, d) }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn into_matrix(self) -> Mat<C64> {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), mat: self.mat.adjoint().to_owned() }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { space: self.space.clone(), mat: faer::Scale(factor) * &self.mat }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(self.mat.as_ref())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Returns `self` if it is Hermitian to `tol`, else a domain error.
    pub fn assert_hermitian(self, tol: f64) -> Result<Self> {
        let defect = self.hermiticity_defect();
        if defect > tol {
            return Err(Error::Domain(format!("operator is not Hermitian: max |A - A†| = {defect:e} > {tol:e}")));
        }
        Ok(self)
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        Ok(&(self * other)? - &(other * self)?)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        max_abs(self.mat.as_ref())
    }

    /// `A |ψ⟩`.
    pub fn apply(&self, psi: &[C64]) -> Result<Vec<C64>> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: psi.len() });
        }
        let d = self.dim();
        let mut out = vec![ZERO; d];
        for (j, &pj) in psi.iter().enumerate() {
            if pj == ZERO {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.mat[(i, j)] * pj;
            }
        }
        Ok(out)
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_dense(self.mat.as_ref())
    }

    fn check_same_space(&self, other: &Operator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

impl Add for &Operator {
    type Output = Operator;

    /// Panics if the spaces differ; use only on operators built for one space.
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "adding operators on different spaces");
        Operator { space: self.space.clone(), mat: &self.mat + &rhs.mat }
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "subtracting operators on different spaces");
        Operator { space: self.space.clone(), mat: &self.mat - &rhs.mat }
    }
}

impl Mul for &Operator {
    type Output = Result<Operator>;

    fn mul(self, rhs: &Operator) -> Result<Operator> {
        self.check_same_space(rhs)?;
        Ok(Operator { space: self.space.clone(), mat: &self.mat * &rhs.mat })
    }
}

/// `|j⟩⟨k| ⊗ 1`.
pub fn transition(space: &HilbertSpace, j: Level, k: Level) -> Result<Operator> {
    let (j, k) = (space.check_level(j)?, space.check_level(k)?);
    let rest = space.motional_dim();
    let mut mat = Mat::<C64>::zeros(space.dim(), space.dim());
    for r in 0..rest {
        mat[(j * rest + r, k * rest + r)] = ONE;
    }
    Ok(Operator { space: space.clone(), mat })
}

/// `σ_x^{(m,n)} = |m⟩⟨n| + h.c.`
pub fn sigma_x(space: &HilbertSpace, m: Level, n: Level) -> Result<Operator> {
    Ok(&transition(space, m, n)? + &transition(space, n, m)?)
}

/// `σ_y^{(m,n)} = i|m⟩⟨n| + h.c.`
pub fn sigma_y(space: &HilbertSpace, m: Level, n: Level) -> Result<Operator> {
    Ok(&transition(space, m, n)?.scale(I) + &transition(space, n, m)?.scale(-I))
}

/// Embeds a single-mode operator: `1_internal ⊗ … ⊗ op ⊗ … ⊗ 1`.
pub fn embed_mode_op(space: &HilbertSpace, mode: usize, op: MatRef<'_, C64>) -> Result<Operator> {
    space.check_mode(mode)?;
    let dm = space.mode_dim(mode);
    if op.nrows() != dm || op.ncols() != dm {
        return Err(Error::DimensionMismatch { expected: dm, found: op.nrows() });
    }
    let left = space.internal_dim() * (0..mode).map(|m| space.mode_dim(m)).product::<usize>();
    let right: usize = (mode + 1..space.n_modes()).map(|m| space.mode_dim(m)).product();
    let d = space.dim();
    let mut mat = Mat::<C64>::zeros(d, d);
    for j in 0..dm {
        for i in 0..dm {
            let v = op[(i, j)];
            if v == ZERO {
                continue;
            }
            for l in 0..left {
                for r in 0..right {
                    mat[((l * dm + i) * right + r, (l * dm + j) * right + r)] = v;
                }
            }
        }
    }
    Ok(Operator { space: space.clone(), mat })
}

/// Embeds an operator on the whole motional factor: `1_internal ⊗ op`.
pub fn embed_motional_op(space: &HilbertSpace, op: MatRef<'_, C64>) -> Result<Operator> {
    let dm = space.motional_dim();
    if op.nrows() != dm || op.ncols() != dm {
        return Err(Error::DimensionMismatch { expected: dm, found: op.nrows() });
    }
    let id = Mat::<C64>::identity(space.internal_dim(), space.internal_dim());
    Ok(Operator { space: space.clone(), mat: kron(id.as_ref(), op) })
}

/// `|j⟩⟨k| ⊗ motional`, where `motional` acts on all modes jointly.
pub fn transition_with(space: &HilbertSpace, j: Level, k: Level, motional: MatRef<'_, C64>) -> Result<Operator> {
    let (j, k) = (space.check_level(j)?, space.check_level(k)?);
    let dm = space.motional_dim();
    if motional.nrows() != dm || motional.ncols() != dm {
        return Err(Error::DimensionMismatch { expected: dm, found: motional.nrows() });
    }
    let mut mat = Mat::<C64>::zeros(space.dim(), space.dim());
    for b in 0..dm {
        for a in 0..dm {
            mat[(j * dm + a, k * dm + b)] = motional[(a, b)];
        }
    }
    Ok(Operator { space: space.clone(), mat })
}

/// `Tr(op ρ)`.
pub fn expectation(op: &Operator, rho: &DensityMatrix) -> Result<C64> {
    if op.space != rho.space {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: op.dim() });
    }
    Ok(trace_product(op.matrix(), rho.matrix()))
}

/// `Tr(a b)` without forming the product.
pub(crate) fn trace_product(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for j in 0..n {
        for i in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Normalized thermal occupation of the levels `0..=cutoff`.
pub fn thermal_distribution(cutoff: usize, mean_n: f64) -> Result<Vec<f64>> {
    if !(mean_n >= 0.0) || !mean_n.is_finite() {
        return Err(Error::Domain(format!("thermal mean occupation {mean_n} is invalid")));
    }
    if mean_n == 0.0 {
        let mut p = vec![0.0; cutoff + 1];
        p[0] = 1.0;
        return Ok(p);
    }
    let q = mean_n / (1.0 + mean_n);
    let mut p: Vec<f64> = (0..=cutoff).map(|n| q.powi(n as i32)).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}

/// Density operator satisfying Hermiticity, unit trace and numerical positivity.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: HilbertSpace,
    mat: Mat<C64>,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const POSITIVITY_TOL: f64 = 1e-8;

    pub fn new(space: HilbertSpace, mat: Mat<C64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(space, mat)?;
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(space: HilbertSpace, mat: Mat<C64>) -> Result<Self> {
        let d = space.dim();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: mat.nrows() });
        }
        Ok(Self { space, mat })
    }

    pub fn validate(&self) -> Result<()> {
        let herm = hermiticity_defect(self.mat.as_ref());
        if herm > Self::HERMITIAN_TOL {
            return Err(Error::Domain(format!("density matrix not Hermitian ({herm:e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > Self::TRACE_TOL || tr.im.abs() > Self::TRACE_TOL {
            return Err(Error::Domain(format!("density matrix trace is {tr}")));
        }
        let min = self.min_eigenvalue()?;
        if min < -Self::POSITIVITY_TOL {
            return Err(Error::Domain(format!("density matrix has eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn pure(space: HilbertSpace, psi: &[C64]) -> Result<Self> {
        let d = space.dim();
        if psi.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: psi.len() });
        }
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 == 0.0 {
            return Err(Error::Domain("zero state vector".into()));
        }
        let mat = Mat::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / norm2);
        Ok(Self { space, mat })
    }

    /// `|level⟩⟨level| ⊗ thermal(n̄) ⊗ …` with one mean occupation per mode.
    pub fn internal_times_thermal(space: &HilbertSpace, level: Level, mean_n: &[f64]) -> Result<Self> {
        if mean_n.len() != space.n_modes() {
            return Err(Error::DimensionMismatch { expected: space.n_modes(), found: mean_n.len() });
        }
        let li = space.check_level(level)?;
        let dists = space
            .mode_cutoffs()
            .iter()
            .zip(mean_n)
            .map(|(&n, &m)| thermal_distribution(n, m))
            .collect::<Result<Vec<_>>>()?;
        let d = space.dim();
        let mut mat = Mat::<C64>::zeros(d, d);
        for r in 0..space.motional_dim() {
            let idx = li * space.motional_dim() + r;
            let (_, fock) = space.decompose(idx);
            let p: f64 = fock.iter().zip(&dists).map(|(&n, dist)| dist[n]).product();
            mat[(idx, idx)] = c(p);
        }
        Ok(Self { space: space.clone(), mat })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    pub fn purity(&self) -> f64 {
        trace_product(self.mat.as_ref(), self.mat.as_ref()).re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let h = hermitian_part(self.mat.as_ref());
        let ev = h
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Numerical(format!("eigenvalues failed: {e:?}")))?;
        Ok(ev.first().copied().unwrap_or(0.0))
    }

    /// Population of each internal level.
    pub fn populations(&self) -> Vec<f64> {
        let rest = self.space.motional_dim();
        (0..self.space.internal_dim())
            .map(|l| (0..rest).map(|r| self.mat[(l * rest + r, l * rest + r)].re).sum())
            .collect()
    }

    pub fn population(&self, level: Level) -> f64 {
        self.populations()[level.index()]
    }

    /// Reduced Fock distribution of one mode.
    pub fn fock_distribution(&self, mode: usize) -> Result<Vec<f64>> {
        self.space.check_mode(mode)?;
        let mut p = vec![0.0; self.space.mode_dim(mode)];
        for idx in 0..self.dim() {
            let (_, fock) = self.space.decompose(idx);
            p[fock[mode]] += self.mat[(idx, idx)].re;
        }
        Ok(p)
    }

    pub fn mean_phonons(&self, mode: usize) -> Result<f64> {
        Ok(self.fock_distribution(mode)?.iter().enumerate().map(|(n, p)| n as f64 * p).sum())
    }

    /// Population of the top two Fock levels of a mode.
    pub fn tail_population(&self, mode: usize) -> Result<f64> {
        let p = self.fock_distribution(mode)?;
        Ok(p.iter().rev().take(2).sum())
    }

    /// One truncation warning per mode whose tail exceeds [`TAIL_BOUND`].
    pub fn tail_warnings(&self) -> Vec<Warning> {
        (0..self.space.n_modes())
            .filter_map(|m| {
                let tail = self.tail_population(m).ok()?;
                (tail >= TAIL_BOUND).then(|| Warning::Truncation { mode: m, tail }.emit())
            })
            .collect()
    }

    /// `⟨ψ|ρ|ψ⟩` for the normalized `ψ`.
    pub fn fidelity_with_pure(&self, psi: &[C64]) -> Result<f64> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: psi.len() });
        }
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let mut acc = ZERO;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                acc += psi[i].conj() * self.mat[(i, j)] * psi[j];
            }
        }
        Ok(acc.re / norm2)
    }
}

/// Compressed-sparse-row matrix used on the hot paths (time stepping).
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    pub fn from_dense(a: MatRef<'_, C64>) -> Self {
        let mut row_ptr = Vec::with_capacity(a.nrows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != ZERO {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(values.len());
        }
        Self { n_rows: a.nrows(), n_cols: a.ncols(), row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `Y = A X` for column-major square `X` stored flat with leading dimension `n`.
    pub fn mul_dense_into(&self, x: &[C64], y: &mut [C64], n: usize) {
        for col in 0..n {
            self.mul_vec_into(&x[col * n..(col + 1) * n], &mut y[col * n..(col + 1) * n]);
        }
    }
}
