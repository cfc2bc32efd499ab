//! Sum-of-trace-ratio maximization
//!
//! `max f(V) = tr(VᵀAV)/tr(VᵀBV) + tr(VᵀCV)` over orthonormal `V`. Its
//! critical points solve the NEPv `E(V)V = V(VᵀE(V)V)` with
//! `A₀ = C`, `A₁ ≡ 0`, `A₂(P) = A/φ_B − Bφ_A/φ_B²`, `φ_S = tr(SP)`, and
//! the maximizer spans the k *largest* eigenvalues of `E(V)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, OrthonormalBasis};
use crate::nepv::{ComponentMap, DeltaBounds, LipschitzBounds, NepvProblem, SpectralEnd};
use crate::rng::{gaussian_matrix, prng, uniform_matrix, STREAM_INSTANCE, STREAM_PERTURBATION};

/// Center of the spectrum of `B`.
pub const B_CENTER: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRatioConfig {
    pub n: usize,
    pub k: usize,
    /// Half-width of the spectrum of `B` around 50.
    pub beta: f64,
    /// Scale of the perturbations `ΔA, ΔB, ΔC`.
    pub eps: f64,
    pub seed: u64,
}

impl Default for TraceRatioConfig {
    fn default() -> Self {
        Self {
            n: 100,
            k: 5,
            beta: 10.0,
            eps: 0.0,
            seed: 0,
        }
    }
}

impl TraceRatioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n <= self.k {
            return Err(Error::Malformed(format!(
                "trace ratio needs n > k >= 1 (n = {}, k = {})",
                self.n, self.k
            )));
        }
        if !(0.0..B_CENTER).contains(&self.beta) {
            return Err(Error::Malformed(format!("beta = {} must lie in [0, 50)", self.beta)));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::Malformed(format!("eps = {} must be nonnegative", self.eps)));
        }
        Ok(())
    }
}

/// `Ω_W` (sum of the k largest `|λ_j(W)|`) and `ω_W` (sum of the k smallest).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigSumBounds {
    pub omega_large: f64,
    pub omega_small: f64,
}

impl EigSumBounds {
    pub fn of(w: &HermitianMatrix, k: usize) -> Result<Self> {
        let mut abs: Vec<f64> = w.eigenvalues()?.into_iter().map(f64::abs).collect();
        abs.sort_by(f64::total_cmp);
        let n = abs.len();
        let k = k.min(n);
        Ok(Self {
            omega_large: abs[n - k..].iter().sum(),
            omega_small: abs[..k].iter().sum(),
        })
    }
}

/// The data matrices `A`, `B`, `C` (or their perturbations).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRatioMatrices {
    pub a: HermitianMatrix,
    pub b: HermitianMatrix,
    pub c: HermitianMatrix,
}

fn symmetric_part(m: DMatrix<f64>) -> HermitianMatrix {
    HermitianMatrix::new(m).expect("generated matrices are finite and square")
}

impl TraceRatioMatrices {
    /// `A` = symmetrized uniform(0,1); `B = Q·Diag(50 + β(2u − 1))·Qᵀ` with `Q`
    /// the sign-fixed QR factor of a Gaussian matrix; `C` = symmetrized
    /// Gaussian. Draw order does not depend on `β`, so one seed gives the
    /// same `A`, `C`, `Q`, `u` for every `β`.
    pub fn generate(cfg: &TraceRatioConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n;
        let mut rng = prng(cfg.seed, STREAM_INSTANCE);
        let a = symmetric_part(uniform_matrix(n, n, &mut rng));
        let q = OrthonormalBasis::<f64>::orthonormalize(gaussian_matrix(n, n, &mut rng))?.into_matrix();
        let u = uniform_matrix(n, 1, &mut rng);
        let spectrum = DVector::from_fn(n, |i, _| B_CENTER + cfg.beta * (2.0 * u[(i, 0)] - 1.0));
        let b = symmetric_part(&q * DMatrix::from_diagonal(&spectrum) * q.transpose());
        let c = symmetric_part(gaussian_matrix(n, n, &mut rng));
        Ok(Self { a, b, c })
    }

    /// Unit-scale perturbation directions: symmetrized uniform(−1, 1).
    pub fn perturbation_directions(cfg: &TraceRatioConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n;
        let mut rng = prng(cfg.seed, STREAM_PERTURBATION);
        let mut draw = || symmetric_part(uniform_matrix(n, n, &mut rng).map(|x| 2.0 * x - 1.0));
        let a = draw();
        let b = draw();
        let c = draw();
        Ok(Self { a, b, c })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            a: self.a.scale(factor),
            b: self.b.scale(factor),
            c: self.c.scale(factor),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self {
            a: &self.a + &other.a,
            b: &self.b + &other.b,
            c: &self.c + &other.c,
        }
    }

    fn check_b_positive(&self) -> Result<()> {
        let min = self.b.eigenvalues()?[0];
        if !(min > 0.0) {
            return Err(Error::Malformed(format!(
                "B is not positive definite (lambda_min = {min:e})"
            )));
        }
        Ok(())
    }

    /// `A₂(P) = A/φ_B − B·φ_A/φ_B²`.
    pub fn nonlinear_map(&self) -> ComponentMap<f64> {
        let a = Arc::new(self.a.matrix().clone());
        let b = Arc::new(self.b.matrix().clone());
        Arc::new(move |p: &DMatrix<f64>| {
            let phi_a = a.dot(p);
            let phi_b = b.dot(p);
            &*a / phi_b - &*b * (phi_a / (phi_b * phi_b))
        })
    }

    /// The NEPv `(C, 0, A₂)` targeting the k largest eigenvalues, with the
    /// closed-form `d` bound registered.
    pub fn problem(&self, k: usize) -> Result<NepvProblem> {
        self.check_b_positive()?;
        let d2 = analytic_d_bound(&self.a, &self.b, k)?;
        Ok(NepvProblem::new(self.c.clone(), k, SpectralEnd::Largest)?
            .with_nonlinear(self.nonlinear_map())
            .with_lipschitz_bounds(LipschitzBounds { d1: None, d2: Some(d2) }))
    }

    /// `φ_S(V) = tr(VᵀSV)`.
    pub fn phi(s: &HermitianMatrix, v: &OrthonormalBasis) -> f64 {
        (v.matrix().transpose() * s.matrix() * v.matrix()).trace()
    }

    /// The objective `f(V) = φ_A/φ_B + φ_C`.
    pub fn objective(&self, v: &OrthonormalBasis) -> f64 {
        Self::phi(&self.a, v) / Self::phi(&self.b, v) + Self::phi(&self.c, v)
    }
}

/// Base problem of a configuration.
pub fn build_trace_ratio_problem(cfg: &TraceRatioConfig) -> Result<NepvProblem> {
    TraceRatioMatrices::generate(cfg)?.problem(cfg.k)
}

/// Perturbed problem `(C + ΔC, 0, Ã₂)` with `Ã₂` built from `A + ΔA`, `B + ΔB`,
/// registering the closed-form `δ₂` bound relative to the base problem.
pub fn build_perturbed_trace_ratio(cfg: &TraceRatioConfig) -> Result<NepvProblem> {
    let base = TraceRatioMatrices::generate(cfg)?;
    let delta = TraceRatioMatrices::perturbation_directions(cfg)?.scaled(cfg.eps);
    perturbed_problem(&base, &delta, cfg.k)
}

pub fn perturbed_problem(base: &TraceRatioMatrices, delta: &TraceRatioMatrices, k: usize) -> Result<NepvProblem> {
    base.check_b_positive()?;
    let perturbed = base.plus(delta);
    let delta2 = analytic_delta2_bound(&base.a, &base.b, &delta.a, &delta.b, k)?;
    Ok(perturbed.problem(k)?.with_delta_bounds(DeltaBounds {
        delta1: Some(0.0),
        delta2: Some(delta2),
    }))
}

fn positive(x: f64, what: &str) -> Result<f64> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(Error::DegenerateSpectrum(format!("{what} = {x:e}")))
    }
}

/// Closed-form upper bound on `sup_P ‖Ã₂(P) − A₂(P)‖₂` over all rank-k
/// projectors:
///
/// ```text
/// ‖A‖ Ω_ΔB/(ω_{B+ΔB} ω_B)
///   + ‖B‖ (Ω_ΔA Ω_B² + Ω_A(Ω_B + Ω_{B+ΔB}) Ω_ΔB)/(ω_{B+ΔB}² ω_B²)
///   + ‖ΔA‖/ω_{B+ΔB} + ‖ΔB‖ Ω_{A+ΔA}/ω_{B+ΔB}²
/// ```
pub fn analytic_delta2_bound(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    delta_a: &HermitianMatrix,
    delta_b: &HermitianMatrix,
    k: usize,
) -> Result<f64> {
    let bt = b + delta_b;
    let at = a + delta_a;
    let sa = EigSumBounds::of(a, k)?;
    let sb = EigSumBounds::of(b, k)?;
    let sbt = EigSumBounds::of(&bt, k)?;
    let sda = EigSumBounds::of(delta_a, k)?;
    let sdb = EigSumBounds::of(delta_b, k)?;
    let sat = EigSumBounds::of(&at, k)?;
    let w_b = positive(sb.omega_small, "omega_B")?;
    let w_bt = positive(sbt.omega_small, "omega_{B+dB}")?;
    let norm_a = a.spectral_norm()?;
    let norm_b = b.spectral_norm()?;
    let t1 = norm_a * sdb.omega_large / (w_bt * w_b);
    let t2 = norm_b
        * (sda.omega_large * sb.omega_large.powi(2)
            + sa.omega_large * (sb.omega_large + sbt.omega_large) * sdb.omega_large)
        / (w_bt.powi(2) * w_b.powi(2));
    let t3 = delta_a.spectral_norm()? / w_bt;
    let t4 = delta_b.spectral_norm()? * sat.omega_large / w_bt.powi(2);
    Ok(t1 + t2 + t3 + t4)
}

/// Closed-form upper bound on the Lipschitz constant of `A₂` over all
/// rank-k projectors: `2‖A‖‖B‖/ω_B² + 2‖B‖²Ω_AΩ_B/ω_B⁴`.
pub fn analytic_d_bound(a: &HermitianMatrix, b: &HermitianMatrix, k: usize) -> Result<f64> {
    let sa = EigSumBounds::of(a, k)?;
    let sb = EigSumBounds::of(b, k)?;
    let w_b = positive(sb.omega_small, "omega_B")?;
    let norm_a = a.spectral_norm()?;
    let norm_b = b.spectral_norm()?;
    Ok(2.0 * norm_a * norm_b / w_b.powi(2) + 2.0 * norm_b.powi(2) * sa.omega_large * sb.omega_large / w_b.powi(4))
}

/// `δ = δ₀ + δ₂` of the configuration's perturbation at scale `eps`
/// (`δ₀ = ‖ΔC‖₂`, `δ₂` the closed-form bound; `δ₁ = 0`).
pub fn perturbation_size(
    base: &TraceRatioMatrices,
    directions: &TraceRatioMatrices,
    k: usize,
    eps: f64,
) -> Result<f64> {
    let delta = directions.scaled(eps);
    Ok(delta.c.spectral_norm()? + analytic_delta2_bound(&base.a, &base.b, &delta.a, &delta.b, k)?)
}

/// Scale `eps` at which the perturbation size `δ` hits `target` to within
/// `1e-3` relative (fixed-point on the nearly linear map `eps ↦ δ`).
pub fn calibrate_eps(base: &TraceRatioMatrices, directions: &TraceRatioMatrices, k: usize, target: f64) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::Malformed(format!("delta target {target} must be positive")));
    }
    let probe = 1e-6;
    let mut eps = target * probe / perturbation_size(base, directions, k, probe)?;
    for _ in 0..50 {
        let delta = perturbation_size(base, directions, k, eps)?;
        if (delta / target - 1.0).abs() < 1e-3 {
            return Ok(eps);
        }
        eps *= target / delta;
    }
    Err(Error::Unavailable(format!(
        "could not calibrate eps for delta = {target:e}"
    )))
}
