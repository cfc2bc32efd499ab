//! Discretized one-dimensional Kohn–Sham model
//!
//! `A(P) = ½L + V_ion + Diag(L†ρ) − 2γ Diag(ρ^{1/3})`, `ρ = diag(P)`,
//! and its perturbation `L → L + ΔL`, `V_ion → V_ion + ΔV_ion`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{eigh_sorted, HermitianMatrix};
use crate::nepv::{DeltaBounds, LipschitzBounds, NepvProblem, SpectralEnd};
use crate::rng::{prng, STREAM_PERTURBATION};
use rand_distr::StandardNormal;

/// Eigenvalues of `L` below this fraction of `‖L‖₂` are dropped from `L†`.
pub const PINV_CUTOFF: f64 = 1e-12;

/// Density of the random symmetric ionic-potential perturbation.
pub const ION_PERTURBATION_DENSITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsConfig {
    /// Grid size.
    pub n: usize,
    /// Occupied states.
    pub k: usize,
    /// Grid step.
    pub h: f64,
    /// Exchange coefficient.
    pub gamma: f64,
    /// Relative perturbation of the Laplacian, `ΔL = ε₁L`.
    pub eps1: f64,
    /// Scale of the random ionic-potential perturbation.
    pub eps2: f64,
    pub seed: u64,
}

impl Default for KsConfig {
    fn default() -> Self {
        Self {
            n: 50,
            k: 8,
            h: 0.05,
            gamma: 1.0,
            eps1: 0.0,
            eps2: 0.0,
            seed: 0,
        }
    }
}

impl KsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n < 2 * self.k {
            return Err(Error::Malformed(format!(
                "KS needs 1 <= k and n >= 2k (n = {}, k = {})",
                self.n, self.k
            )));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Malformed(format!(
                "KS grid step h = {} must be positive",
                self.h
            )));
        }
        if !(self.eps1 >= 0.0 && self.eps2 >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Malformed(
                "KS perturbation sizes must be nonnegative and gamma finite".into(),
            ));
        }
        Ok(())
    }
}

/// `L = (M + Mᵀ)/h²` with `M = I − superdiag(1)`: tridiagonal, `2/h²` on the
/// diagonal and `−1/h²` beside it.
pub fn build_laplacian(n: usize, h: f64) -> Result<HermitianMatrix> {
    if n < 2 {
        return Err(Error::Malformed(format!("Laplacian needs n >= 2, got {n}")));
    }
    let mut m = DMatrix::<f64>::identity(n, n);
    for i in 0..n - 1 {
        m[(i, i + 1)] = -1.0;
    }
    HermitianMatrix::new((&m + m.transpose()) / (h * h))
}

/// Moore–Penrose pseudoinverse via the eigendecomposition, with eigenvalues
/// below `PINV_CUTOFF·‖L‖₂` treated as zero.
pub fn pseudoinverse(l: &HermitianMatrix) -> Result<HermitianMatrix> {
    let eig = eigh_sorted(l)?;
    let norm = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let inv: Vec<f64> = eig
        .values
        .iter()
        .map(|&v| if v.abs() > PINV_CUTOFF * norm { 1.0 / v } else { 0.0 })
        .collect();
    let u = eig.vectors.matrix();
    let d = DMatrix::from_diagonal(&DVector::from_vec(inv));
    HermitianMatrix::new(u * d * u.transpose())
}

/// `‖M‖_∞`, the largest absolute row sum.
pub fn max_row_sum(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `ρ(P) = diag(P)`.
pub fn density(p: &DMatrix<f64>) -> DVector<f64> {
    p.diagonal()
}

/// Symmetric random matrix: each upper-triangular entry (diagonal included)
/// is nonzero with probability `density`, nonzeros standard normal, mirrored.
pub fn random_sparse_symmetric<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> HermitianMatrix {
    let mut m = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let keep = rng.random::<f64>() < density;
            let value: f64 = rng.sample(StandardNormal);
            if keep {
                m[(i, j)] = value;
                m[(j, i)] = value;
            }
        }
    }
    HermitianMatrix::symmetrized(m)
}

fn hartree_map(l_pinv: HermitianMatrix) -> crate::nepv::ComponentMap<f64> {
    let l_pinv = Arc::new(l_pinv.into_matrix());
    Arc::new(move |p: &DMatrix<f64>| DMatrix::from_diagonal(&(&*l_pinv * density(p))))
}

fn exchange_map(gamma: f64) -> crate::nepv::ComponentMap<f64> {
    Arc::new(move |p: &DMatrix<f64>| {
        let rho = density(p).map(|r| -2.0 * gamma * r.max(0.0).cbrt());
        DMatrix::from_diagonal(&rho)
    })
}

/// Assembles `(A₀, A₁, A₂)` from a Laplacian and ionic potential.
///
/// `d₁ ≤ ‖L†‖_∞` is registered: `‖Diag(L†Δρ)‖₂ = ‖L†Δρ‖_∞` and each
/// `|Δρ_i| = |e_iᵀ(P − P*)e_i| ≤ ‖P − P*‖₂`. `d₂` has no closed form
/// (the cube root is not Lipschitz at 0) and is left to sampling.
fn assemble(l: &HermitianMatrix, v_ion: &HermitianMatrix, k: usize, gamma: f64) -> Result<(NepvProblem, DMatrix<f64>)> {
    let l_pinv = pseudoinverse(l)?;
    let a0 = &l.scale(0.5) + v_ion;
    let d1 = max_row_sum(l_pinv.matrix());
    let pinv = l_pinv.matrix().clone();
    let problem = NepvProblem::new(a0, k, SpectralEnd::Smallest)?
        .with_linear(hartree_map(l_pinv))
        .with_nonlinear(exchange_map(gamma))
        .with_lipschitz_bounds(LipschitzBounds { d1: Some(d1), d2: None });
    Ok((problem, pinv))
}

/// The unperturbed model with `V_ion = 0`.
pub fn build_ks_problem(cfg: &KsConfig) -> Result<NepvProblem> {
    cfg.validate()?;
    let l = build_laplacian(cfg.n, cfg.h)?;
    Ok(assemble(&l, &HermitianMatrix::zeros(cfg.n), cfg.k, cfg.gamma)?.0)
}

/// The perturbations `(ΔL, ΔV_ion)` for a configuration.
pub fn ks_perturbation(cfg: &KsConfig) -> Result<(HermitianMatrix, HermitianMatrix)> {
    cfg.validate()?;
    let l = build_laplacian(cfg.n, cfg.h)?;
    let mut rng = prng(cfg.seed, STREAM_PERTURBATION);
    let ion = random_sparse_symmetric(cfg.n, ION_PERTURBATION_DENSITY, &mut rng);
    Ok((l.scale(cfg.eps1), ion.scale(cfg.eps2)))
}

/// `Ã₀ = ½L + V_ion + ΔL + ΔV_ion`, `Ã₁(P) = Diag((L+ΔL)†ρ)`, `Ã₂ = A₂`.
///
/// Registers `δ₁ ≤ ‖(L+ΔL)† − L†‖_∞` (since `0 ≤ ρ_i ≤ 1`) and `δ₂ = 0`.
pub fn build_perturbed_ks(cfg: &KsConfig) -> Result<NepvProblem> {
    cfg.validate()?;
    let l = build_laplacian(cfg.n, cfg.h)?;
    let (delta_l, delta_ion) = ks_perturbation(cfg)?;
    let l_pinv = pseudoinverse(&l)?;
    let lt = &l + &delta_l;
    let (problem, lt_pinv) = assemble(&lt, &HermitianMatrix::zeros(cfg.n), cfg.k, cfg.gamma)?;
    // Ã₀ = ½L + ΔL + ΔV_ion, not ½(L + ΔL)
    let a0 = &(&l.scale(0.5) + &delta_l) + &delta_ion;
    let delta1 = max_row_sum(&(lt_pinv - l_pinv.matrix()));
    Ok(problem.with_a0(a0)?.with_delta_bounds(DeltaBounds {
        delta1: Some(delta1),
        delta2: Some(0.0),
    }))
}
