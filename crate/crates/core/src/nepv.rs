//! NEPv instances `A(P) = A₀ + A₁(P) + A₂(P)` and the plain SCF solver.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{mismatch, Error, Result};
use crate::linalg::{eigh_sorted, scaled_tol, spectral_norm, HermitianMatrix, OrthonormalBasis, Projector};
use crate::rng::Scalar;

/// A matrix-valued map of the (dense) projector. Maps accept any n×n
/// matrix so that the linear part can be checked on its linear extension.
pub type ComponentMap<T> = Arc<dyn Fn(&DMatrix<T>) -> DMatrix<T> + Send + Sync>;

/// Which end of the spectrum of `A(P)` the solution subspace spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectralEnd {
    #[default]
    Smallest,
    Largest,
}

impl SpectralEnd {
    fn flipped(self) -> Self {
        match self {
            Self::Smallest => Self::Largest,
            Self::Largest => Self::Smallest,
        }
    }
}

/// Closed-form upper bounds on the local Lipschitz constants `d₁`, `d₂`,
/// valid over all rank-k projectors (hence for every center and radius).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LipschitzBounds {
    pub d1: Option<f64>,
    pub d2: Option<f64>,
}

/// Closed-form upper bounds on `δ₁`, `δ₂` of a perturbed problem, measured
/// against the base problem it was built from.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DeltaBounds {
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
}

/// An eigenvector-dependent nonlinear eigenvalue problem `A(P)V = VΛ`.
///
/// `a1` must be homogeneous linear in `P`, `a2` continuous. Absent maps are
/// identically zero. Cloning is cheap; the maps are shared.
#[derive(Clone)]
pub struct NepvProblem<T: Scalar = f64> {
    a0: HermitianMatrix<T>,
    a1: Option<ComponentMap<T>>,
    a2: Option<ComponentMap<T>>,
    k: usize,
    end: SpectralEnd,
    lipschitz: LipschitzBounds,
    deltas: DeltaBounds,
}

impl<T: Scalar> fmt::Debug for NepvProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NepvProblem")
            .field("n", &self.dim())
            .field("k", &self.k)
            .field("end", &self.end)
            .field("has_a1", &self.a1.is_some())
            .field("has_a2", &self.a2.is_some())
            .field("lipschitz", &self.lipschitz)
            .field("deltas", &self.deltas)
            .finish()
    }
}

impl<T: Scalar> NepvProblem<T> {
    pub fn new(a0: HermitianMatrix<T>, k: usize, end: SpectralEnd) -> Result<Self> {
        if k == 0 || k >= a0.dim() {
            return Err(Error::Malformed(format!(
                "subspace dimension k = {k} must satisfy 0 < k < n = {}",
                a0.dim()
            )));
        }
        Ok(Self {
            a0,
            a1: None,
            a2: None,
            k,
            end,
            lipschitz: LipschitzBounds::default(),
            deltas: DeltaBounds::default(),
        })
    }

    pub fn with_linear(mut self, a1: ComponentMap<T>) -> Self {
        self.a1 = Some(a1);
        self
    }

    pub fn with_nonlinear(mut self, a2: ComponentMap<T>) -> Self {
        self.a2 = Some(a2);
        self
    }

    pub fn with_lipschitz_bounds(mut self, bounds: LipschitzBounds) -> Self {
        self.lipschitz = bounds;
        self
    }

    pub fn with_delta_bounds(mut self, bounds: DeltaBounds) -> Self {
        self.deltas = bounds;
        self
    }

    pub fn dim(&self) -> usize {
        self.a0.dim()
    }

    pub fn subspace_dim(&self) -> usize {
        self.k
    }

    pub fn end(&self) -> SpectralEnd {
        self.end
    }

    pub fn a0(&self) -> &HermitianMatrix<T> {
        &self.a0
    }

    pub fn has_linear(&self) -> bool {
        self.a1.is_some()
    }

    pub fn has_nonlinear(&self) -> bool {
        self.a2.is_some()
    }

    pub fn lipschitz_bounds(&self) -> LipschitzBounds {
        self.lipschitz
    }

    pub fn delta_bounds(&self) -> DeltaBounds {
        self.deltas
    }

    /// +1 for `Smallest`, −1 for `Largest`. Multiplying `A(P)` by the sign
    /// turns every problem into a smallest-end one.
    pub fn sign(&self) -> f64 {
        match self.end {
            SpectralEnd::Smallest => 1.0,
            SpectralEnd::Largest => -1.0,
        }
    }

    /// The problem `(−A₀, −A₁, −A₂)` targeting the opposite spectral end.
    /// It has exactly the same solutions.
    pub fn negated(&self) -> Self {
        let neg = |m: &Option<ComponentMap<T>>| {
            m.clone()
                .map(|f| -> ComponentMap<T> { Arc::new(move |p: &DMatrix<T>| -f(p)) })
        };
        Self {
            a0: -&self.a0,
            a1: neg(&self.a1),
            a2: neg(&self.a2),
            k: self.k,
            end: self.end.flipped(),
            lipschitz: self.lipschitz,
            deltas: self.deltas,
        }
    }

    /// Same maps with `A₀` replaced.
    pub fn with_a0(&self, a0: HermitianMatrix<T>) -> Result<Self> {
        if a0.dim() != self.dim() {
            return Err(mismatch(self.dim(), a0.dim()));
        }
        let mut out = self.clone();
        out.a0 = a0;
        Ok(out)
    }

    fn apply(&self, map: &Option<ComponentMap<T>>, p: &DMatrix<T>, name: &str) -> Result<HermitianMatrix<T>> {
        let n = self.dim();
        if p.nrows() != n || p.ncols() != n {
            return Err(mismatch(format!("{n}x{n}"), format!("{}x{}", p.nrows(), p.ncols())));
        }
        let Some(f) = map else {
            return Ok(HermitianMatrix::zeros(n));
        };
        let m = f(p);
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::ContractViolation(format!(
                "{name} returned a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::Malformed(format!("{name} returned non-finite entries")));
        }
        let skew = (&m - m.adjoint()).norm();
        if skew > scaled_tol(1e-12, m.norm()) {
            return Err(Error::ContractViolation(format!(
                "{name} is not Hermitian: ||M - M^H||_F = {skew:e}"
            )));
        }
        Ok(HermitianMatrix::symmetrized(m))
    }

    /// `A₁` applied to an arbitrary n×n matrix.
    pub fn linear_part(&self, p: &DMatrix<T>) -> Result<HermitianMatrix<T>> {
        self.apply(&self.a1, p, "A1")
    }

    /// `A₂` applied to an arbitrary n×n matrix.
    pub fn nonlinear_part(&self, p: &DMatrix<T>) -> Result<HermitianMatrix<T>> {
        self.apply(&self.a2, p, "A2")
    }

    pub fn evaluate_dense(&self, p: &DMatrix<T>) -> Result<HermitianMatrix<T>> {
        let a1 = self.linear_part(p)?;
        let a2 = self.nonlinear_part(p)?;
        Ok(&(&self.a0 + &a1) + &a2)
    }

    /// `A(P) = A₀ + A₁(P) + A₂(P)`.
    pub fn evaluate(&self, p: &Projector<T>) -> Result<HermitianMatrix<T>> {
        if p.dim() != self.dim() {
            return Err(mismatch(self.dim(), p.dim()));
        }
        self.evaluate_dense(&p.dense())
    }

    /// Eigenbasis of `A₀` alone at the problem's spectral end.
    pub fn default_initial_guess(&self) -> Result<OrthonormalBasis<T>> {
        let eig = eigh_sorted(&self.a0)?;
        Ok(match self.end {
            SpectralEnd::Smallest => eig.smallest(self.k),
            SpectralEnd::Largest => eig.largest(self.k),
        })
    }

    fn check_basis(&self, v: &OrthonormalBasis<T>) -> Result<()> {
        if v.rows() != self.dim() || v.cols() != self.k {
            return Err(mismatch(
                format!("{}x{}", self.dim(), self.k),
                format!("{}x{}", v.rows(), v.cols()),
            ));
        }
        Ok(())
    }
}

/// Residual `R = A(P̂)V̂ − V̂(V̂ᴴA(P̂)V̂)` of an approximate solution.
#[derive(Debug, Clone)]
pub struct Residual<T: Scalar = f64> {
    pub r: DMatrix<T>,
    pub norm: f64,
    /// `A(P̂)`.
    pub operator: HermitianMatrix<T>,
    pub operator_norm: f64,
}

impl<T: Scalar> Residual<T> {
    /// `‖R‖₂ / ‖A(P̂)‖₂`, the SCF stopping quantity.
    pub fn relative(&self) -> f64 {
        if self.operator_norm > 0.0 {
            self.norm / self.operator_norm
        } else {
            self.norm
        }
    }
}

pub fn residual<T: Scalar>(problem: &NepvProblem<T>, v: &OrthonormalBasis<T>) -> Result<Residual<T>> {
    problem.check_basis(v)?;
    let operator = problem.evaluate(&v.projector())?;
    residual_with(operator, v)
}

fn residual_with<T: Scalar>(operator: HermitianMatrix<T>, v: &OrthonormalBasis<T>) -> Result<Residual<T>> {
    let av = operator.matrix() * v.matrix();
    let r = &av - v.matrix() * (v.matrix().adjoint() * &av);
    let norm = spectral_norm(&r)?;
    let operator_norm = operator.spectral_norm()?;
    Ok(Residual {
        r,
        norm,
        operator,
        operator_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScfOptions {
    /// Stop once `‖R_l‖₂/‖A(P_l)‖₂ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ScfOptions {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iter: 200,
        }
    }
}

/// SCF history. Index 0 holds the initial guess, so every list has
/// `iterations + 1` entries.
#[derive(Debug, Clone)]
pub struct ScfTrace<T: Scalar = f64> {
    pub iterates: Vec<OrthonormalBasis<T>>,
    pub residual_norms: Vec<f64>,
    pub relative_residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Scalar> ScfTrace<T> {
    pub fn solution(&self) -> &OrthonormalBasis<T> {
        self.iterates.last().expect("trace holds at least the initial guess")
    }
}

/// Plain SCF: `V_l` spans the eigenvectors of the k extreme eigenvalues of
/// `A(V_{l−1}V_{l−1}ᴴ)`. At least one iteration is always taken.
/// Reaching `max_iter` is not an error; the trace reports `converged = false`.
pub fn scf_solve<T: Scalar>(
    problem: &NepvProblem<T>,
    v0: &OrthonormalBasis<T>,
    options: ScfOptions,
) -> Result<ScfTrace<T>> {
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::Malformed(format!(
            "SCF needs tol > 0 and max_iter >= 1 (got {:e}, {})",
            options.tol, options.max_iter
        )));
    }
    problem.check_basis(v0)?;
    let diverged = |iteration: usize| {
        move |e: Error| match e {
            Error::Malformed(_) => Error::Divergence { iteration },
            other => other,
        }
    };

    let first = residual(problem, v0).map_err(diverged(0))?;
    let mut trace = ScfTrace {
        iterates: vec![v0.clone()],
        residual_norms: vec![first.norm],
        relative_residuals: vec![first.relative()],
        converged: false,
        iterations: 0,
    };
    let mut operator = first.operator;
    let sign = problem.sign();
    for l in 1..=options.max_iter {
        let eig = eigh_sorted(&operator.scale(sign)).map_err(diverged(l))?;
        let v = eig.smallest(problem.k);
        let res = residual(problem, &v).map_err(diverged(l))?;
        trace.iterates.push(v);
        trace.residual_norms.push(res.norm);
        trace.relative_residuals.push(res.relative());
        trace.iterations = l;
        if res.relative() <= options.tol {
            trace.converged = true;
            break;
        }
        operator = res.operator;
    }
    Ok(trace)
}
