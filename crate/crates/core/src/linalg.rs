//! Dense self-adjoint linear algebra: ordered eigendecompositions,
//! orthonormal bases, projectors and canonical-angle subspace distances.
//!
//! Eigen- and singular-value decompositions are delegated to `nalgebra`.
//! Every type here is generic over [`Scalar`], i.e. real symmetric (`f64`)
//! or complex Hermitian (`Complex64`) data.

use std::ops::{Add, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen, QR, SVD};
use rand::Rng;

use crate::error::{mismatch, Error, Result};
use crate::rng::{gaussian_matrix, Scalar};

/// Frobenius-norm tolerance on `VᴴV − I` accepted by [`OrthonormalBasis::new`].
pub const ORTHONORMALITY_TOL: f64 = 1e-12;

/// Absolute floor applied to every norm-relative tolerance.
pub const ABS_TOL_FLOOR: f64 = 1e-14;

const EIG_MAX_SWEEPS: usize = 100_000;

/// `rel · scale`, floored at [`ABS_TOL_FLOOR`].
pub fn scaled_tol(rel: f64, scale: f64) -> f64 {
    (rel * scale).max(ABS_TOL_FLOOR)
}

fn check_finite<T: Scalar>(m: &DMatrix<T>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Malformed(format!("{what} has non-finite entries")))
    }
}

/// Dense Hermitian (real symmetric when `T = f64`) matrix.
///
/// Construction symmetrizes the input, `M ← (M + Mᴴ)/2`, so the stored
/// entries are exactly self-adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix<T: Scalar = f64> {
    m: DMatrix<T>,
}

impl<T: Scalar> HermitianMatrix<T> {
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Malformed(format!(
                "expected a nonempty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        check_finite(&m, "matrix")?;
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without validation. Callers guarantee a square matrix.
    pub(crate) fn symmetrized(m: DMatrix<T>) -> Self {
        let half = T::from_real(0.5);
        let m = (&m + m.adjoint()) * half;
        Self { m }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = T::from_real(v);
        }
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.m
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|x| x.is_finite())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            m: &self.m * T::from_real(factor),
        }
    }

    /// Sorted (nondecreasing) eigenvalues.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut values: Vec<f64> = symmetric_eigen(&self.m)?.eigenvalues.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        Ok(values)
    }

    /// `‖A‖₂ = max |λ_j(A)|`.
    pub fn spectral_norm(&self) -> Result<f64> {
        let values = self.eigenvalues()?;
        Ok(values.first().unwrap().abs().max(values.last().unwrap().abs()))
    }

    /// Quadratic form restricted to a subspace: `VᴴAV`.
    pub fn compress(&self, v: &OrthonormalBasis<T>) -> HermitianMatrix<T> {
        Self::symmetrized(v.matrix().adjoint() * &self.m * v.matrix())
    }

    pub fn trace_with(&self, other: &DMatrix<T>) -> T {
        // tr(A·M) without forming the product
        let mut acc = T::zero();
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                acc += self.m[(i, j)] * other[(j, i)];
            }
        }
        acc
    }
}

impl<T: Scalar> Add for &HermitianMatrix<T> {
    type Output = HermitianMatrix<T>;

    fn add(self, rhs: Self) -> HermitianMatrix<T> {
        assert_eq!(self.dim(), rhs.dim(), "Hermitian sum of mismatched dimensions");
        HermitianMatrix { m: &self.m + &rhs.m }
    }
}

impl<T: Scalar> Sub for &HermitianMatrix<T> {
    type Output = HermitianMatrix<T>;

    fn sub(self, rhs: Self) -> HermitianMatrix<T> {
        assert_eq!(self.dim(), rhs.dim(), "Hermitian difference of mismatched dimensions");
        HermitianMatrix { m: &self.m - &rhs.m }
    }
}

impl<T: Scalar> Neg for &HermitianMatrix<T> {
    type Output = HermitianMatrix<T>;

    fn neg(self) -> HermitianMatrix<T> {
        HermitianMatrix { m: -&self.m }
    }
}

fn symmetric_eigen<T: Scalar>(m: &DMatrix<T>) -> Result<SymmetricEigen<T, nalgebra::Dyn>> {
    check_finite(m, "matrix")?;
    SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIG_MAX_SWEEPS).ok_or(Error::EigensolverFailure(m.nrows()))
}

/// n×k matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis<T: Scalar = f64> {
    v: DMatrix<T>,
}

impl<T: Scalar> OrthonormalBasis<T> {
    /// Validates `VᴴV = I` to [`ORTHONORMALITY_TOL`] in the Frobenius norm.
    pub fn new(v: DMatrix<T>) -> Result<Self> {
        if v.ncols() == 0 || v.ncols() > v.nrows() {
            return Err(Error::Malformed(format!(
                "basis shape {}x{} needs 0 < k <= n",
                v.nrows(),
                v.ncols()
            )));
        }
        check_finite(&v, "basis")?;
        let defect = (v.adjoint() * &v - DMatrix::<T>::identity(v.ncols(), v.ncols())).norm();
        if defect > ORTHONORMALITY_TOL {
            return Err(Error::ContractViolation(format!(
                "columns are not orthonormal: ||V^H V - I||_F = {defect:e}"
            )));
        }
        Ok(Self { v })
    }

    /// Orthonormal basis of the column space of `m` (thin QR, with the
    /// diagonal of R made real positive). `m` must have full column rank.
    pub fn orthonormalize(m: DMatrix<T>) -> Result<Self> {
        if m.ncols() == 0 || m.ncols() > m.nrows() {
            return Err(Error::Malformed(format!(
                "cannot orthonormalize a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        check_finite(&m, "matrix")?;
        let scale = m.norm();
        let qr = QR::new(m);
        let r = qr.r();
        let mut q = qr.q();
        for j in 0..q.ncols() {
            let rjj = r[(j, j)];
            let modulus = rjj.modulus();
            if modulus <= 1e-13 * scale {
                return Err(Error::Malformed("matrix is numerically rank deficient".into()));
            }
            // phase fix: R_jj > 0
            let phase = rjj * T::from_real(1.0 / modulus);
            let mut col = q.column_mut(j);
            col *= phase;
        }
        Self::new(q)
    }

    /// QR of an n×k Gaussian matrix drawn from `rng`.
    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Self> {
        Self::orthonormalize(gaussian_matrix::<T, R>(n, k, rng))
    }

    /// The first `k` columns of `I_n`.
    pub fn leading_identity(n: usize, k: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, k))
    }

    pub fn rows(&self) -> usize {
        self.v.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.v
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.v
    }

    pub fn projector(&self) -> Projector<T> {
        Projector { basis: self.clone() }
    }

    /// `V·Q` for a k×k unitary `Q`.
    pub fn rotate(&self, q: &DMatrix<T>) -> Result<Self> {
        if q.nrows() != self.cols() || q.ncols() != self.cols() {
            return Err(mismatch(
                format!("{0}x{0}", self.cols()),
                format!("{}x{}", q.nrows(), q.ncols()),
            ));
        }
        Self::new(&self.v * q)
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return Err(mismatch(
                format!("{}x{}", self.rows(), self.cols()),
                format!("{}x{}", other.rows(), other.cols()),
            ));
        }
        Ok(())
    }
}

/// Orthogonal projector `P = VVᴴ`, held implicitly through its basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector<T: Scalar = f64> {
    basis: OrthonormalBasis<T>,
}

impl<T: Scalar> Projector<T> {
    pub fn basis(&self) -> &OrthonormalBasis<T> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    /// Dense n×n realization `VVᴴ`.
    pub fn dense(&self) -> DMatrix<T> {
        let v = self.basis.matrix();
        let p = v * v.adjoint();
        let half = T::from_real(0.5);
        (&p + p.adjoint()) * half
    }

    /// The diagonal of `P`, i.e. the squared row norms of `V`. Real and in [0, 1].
    pub fn diagonal(&self) -> Vec<f64> {
        let v = self.basis.matrix();
        (0..v.nrows())
            .map(|i| v.row(i).iter().map(|x| x.modulus_squared()).sum())
            .collect()
    }
}

impl<T: Scalar> From<OrthonormalBasis<T>> for Projector<T> {
    fn from(basis: OrthonormalBasis<T>) -> Self {
        Self { basis }
    }
}

/// Full eigendecomposition with eigenvalues in nondecreasing order.
#[derive(Debug, Clone)]
pub struct OrderedEigensystem<T: Scalar = f64> {
    pub values: Vec<f64>,
    pub vectors: OrthonormalBasis<T>,
}

impl<T: Scalar> OrderedEigensystem<T> {
    /// Eigenbasis of the `k` smallest eigenvalues.
    pub fn smallest(&self, k: usize) -> OrthonormalBasis<T> {
        OrthonormalBasis {
            v: self.vectors.matrix().columns(0, k).into_owned(),
        }
    }

    /// Eigenbasis of the `k` largest eigenvalues (columns in ascending order).
    pub fn largest(&self, k: usize) -> OrthonormalBasis<T> {
        let n = self.values.len();
        OrthonormalBasis {
            v: self.vectors.matrix().columns(n - k, k).into_owned(),
        }
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues nondecreasing.
///
/// Eigenvectors of (numerically) repeated eigenvalues are an arbitrary
/// orthonormal basis of the eigenspace; only the subspace is meaningful.
pub fn eigh_sorted<T: Scalar>(a: &HermitianMatrix<T>) -> Result<OrderedEigensystem<T>> {
    let eig = symmetric_eigen(a.matrix())?;
    let mut order: Vec<usize> = (0..a.dim()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.dim(), a.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(OrderedEigensystem {
        values,
        vectors: OrthonormalBasis { v: vectors },
    })
}

fn singular_values<T: Scalar>(m: DMatrix<T>) -> Result<Vec<f64>> {
    check_finite(&m, "matrix")?;
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(vec![0.0]);
    }
    let svd = SVD::try_new(m, false, false, f64::EPSILON, EIG_MAX_SWEEPS).ok_or(Error::EigensolverFailure(r.max(c)))?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Largest singular value of an arbitrary matrix.
pub fn spectral_norm<T: Scalar>(m: &DMatrix<T>) -> Result<f64> {
    Ok(singular_values(m.clone())?[0])
}

/// Canonical angles between `R(X)` and `R(Y)`, largest first, in `[0, π/2]`.
///
/// Cosines come from the singular values of `XᴴY`, sines from those of
/// `(I − XXᴴ)Y`; each angle is taken from whichever is better conditioned,
/// so tiny angles are resolved to full relative accuracy.
pub fn canonical_angles<T: Scalar>(x: &OrthonormalBasis<T>, y: &OrthonormalBasis<T>) -> Result<Vec<f64>> {
    x.check_same_shape(y)?;
    let k = x.cols();
    let xy = x.matrix().adjoint() * y.matrix();
    let residual = y.matrix() - x.matrix() * &xy;
    let mut cosines = singular_values(xy)?;
    cosines.reverse(); // ascending cosines <-> descending angles
    let sines = singular_values(residual)?;
    Ok((0..k)
        .map(|j| {
            let c = cosines[j].clamp(0.0, 1.0);
            let s = sines.get(j).copied().unwrap_or(0.0).clamp(0.0, 1.0);
            if c * c < 0.5 {
                c.acos()
            } else {
                s.asin()
            }
        })
        .collect())
}

/// `‖sin Θ(R(X), R(Y))‖₂`, the sine of the largest canonical angle.
/// Equals `‖XXᴴ − YYᴴ‖₂`.
pub fn sin_theta_dist<T: Scalar>(x: &OrthonormalBasis<T>, y: &OrthonormalBasis<T>) -> Result<f64> {
    x.check_same_shape(y)?;
    let xy = x.matrix().adjoint() * y.matrix();
    let residual = y.matrix() - x.matrix() * &xy;
    Ok(spectral_norm(&residual)?.min(1.0))
}
