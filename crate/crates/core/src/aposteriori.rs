//! Computable error bounds for an approximate NEPv solution `V̂`.
//!
//! `V̂` is an exact solution of the backward problem whose constant term is
//! `A₀ + ΔA₀`, `ΔA₀ = −RV̂ᴴ − V̂Rᴴ`, with `‖ΔA₀‖₂ = ‖R‖₂`. The a priori bounds
//! applied to that pair, with the roles of exact and perturbed problem
//! swapped, bound the distance from `V̂` to the true solution.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{scaled_tol, spectral_norm, HermitianMatrix, OrthonormalBasis};
use crate::nepv::{residual, NepvProblem};
use crate::perturbation::{
    estimate_d, oriented_spectrum, tau_star, xi_star, Bound, Estimate, GapData, LipschitzEstimate, Reason, RootBound,
    SamplerConfig, MAX_SAMPLING_RADIUS, MIN_SAMPLING_RADIUS,
};
use crate::rng::Scalar;

/// Relative tolerance of the exactness check `(A(P̂)+ΔA₀)V̂ = V̂(V̂ᴴ(A(P̂)+ΔA₀)V̂)`.
pub const BACKWARD_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct BackwardPerturbation<T: Scalar = f64> {
    /// `R = A(P̂)V̂ − V̂(V̂ᴴA(P̂)V̂)`.
    pub residual: DMatrix<T>,
    /// `ΔA₀ = −RV̂ᴴ − V̂Rᴴ`.
    pub delta_a0: HermitianMatrix<T>,
    /// `‖R‖₂`.
    pub norm: f64,
    /// `A(P̂)`.
    pub operator: HermitianMatrix<T>,
}

impl<T: Scalar> BackwardPerturbation<T> {
    /// `Â(P̂) = A(P̂) + ΔA₀`, which has `R(V̂)` as an exact invariant subspace.
    pub fn backward_operator(&self) -> HermitianMatrix<T> {
        &self.operator + &self.delta_a0
    }

    /// The problem `(A₀ + ΔA₀, A₁, A₂)` solved exactly by `V̂`.
    pub fn backward_problem(&self, problem: &NepvProblem<T>) -> Result<NepvProblem<T>> {
        problem.with_a0(problem.a0() + &self.delta_a0)
    }
}

pub fn backward_perturbation<T: Scalar>(
    problem: &NepvProblem<T>,
    v_hat: &OrthonormalBasis<T>,
) -> Result<BackwardPerturbation<T>> {
    let res = residual(problem, v_hat)?;
    let rv = &res.r * v_hat.matrix().adjoint();
    let delta_a0 = HermitianMatrix::new(-(&rv + rv.adjoint()))?;
    let bp = BackwardPerturbation {
        residual: res.r,
        delta_a0,
        norm: res.norm,
        operator: res.operator,
    };
    let a_hat = bp.backward_operator();
    let av = a_hat.matrix() * v_hat.matrix();
    let defect = spectral_norm(&(&av - v_hat.matrix() * (v_hat.matrix().adjoint() * &av)))?;
    if defect > scaled_tol(BACKWARD_CHECK_TOL, res.operator_norm) {
        return Err(Error::ContractViolation(format!(
            "backward operator leaves a residual of {defect:e} (||A|| = {:e})",
            res.operator_norm
        )));
    }
    Ok(bp)
}

/// `ĝ, ĥ, ζ̂` from the oriented spectrum of `Â(P̂)`.
pub fn backward_gap<T: Scalar>(problem: &NepvProblem<T>, bp: &BackwardPerturbation<T>) -> Result<GapData> {
    let values = oriented_spectrum(&bp.backward_operator(), problem.sign())?;
    GapData::from_spectrum(&values, problem.subspace_dim())
}

/// Whether `R(V̂)` is the eigenspace of the k extreme eigenvalues of the
/// backward operator, the standing hypothesis of `ξ̂*` and `τ̂*`. `V̂` is an
/// exact invariant subspace of it, so its Ritz values are eigenvalues; they
/// are the k extreme ones iff the largest oriented Ritz value is `λ_k`.
pub fn spans_extreme_eigenspace<T: Scalar>(
    problem: &NepvProblem<T>,
    v_hat: &OrthonormalBasis<T>,
    bp: &BackwardPerturbation<T>,
) -> Result<bool> {
    let sign = problem.sign();
    let a_hat = bp.backward_operator();
    let values = oriented_spectrum(&a_hat, sign)?;
    let ritz = oriented_spectrum(&a_hat.compress(v_hat), sign)?;
    let k = problem.subspace_dim();
    let scale = values[0].abs().max(values[values.len() - 1].abs());
    Ok(ritz[k - 1] <= values[k - 1] + scaled_tol(BACKWARD_CHECK_TOL, scale))
}

struct BackwardState<T: Scalar> {
    bp: BackwardPerturbation<T>,
    gap: GapData,
    extreme: bool,
}

fn backward_state<T: Scalar>(problem: &NepvProblem<T>, v_hat: &OrthonormalBasis<T>) -> Result<BackwardState<T>> {
    let bp = backward_perturbation(problem, v_hat)?;
    let gap = backward_gap(problem, &bp)?;
    let extreme = spans_extreme_eigenspace(problem, v_hat, &bp)?;
    Ok(BackwardState { bp, gap, extreme })
}

/// Bound `ξ̂*` on `‖sin Θ(V*, V̂)‖₂`, available when `‖R‖₂ < ĝ/2 − d̂`.
pub fn error_bound_cor1<T: Scalar>(problem: &NepvProblem<T>, v_hat: &OrthonormalBasis<T>, d_hat: f64) -> Result<Bound> {
    let st = backward_state(problem, v_hat)?;
    if !st.extreme {
        return Ok(Bound::Unavailable(Reason::NotExtremeSubspace));
    }
    Ok(xi_star(st.gap.g, d_hat, st.bp.norm))
}

/// Bound `(η̂*, τ̂*)` from the smallest root of
/// `f̂(η) = ĝη − d̂η√(1+η²) − (1+η²)‖R‖₂` below `ζ̂`.
pub fn error_bound_cor2<T: Scalar>(
    problem: &NepvProblem<T>,
    v_hat: &OrthonormalBasis<T>,
    d_hat: f64,
    root_tol: f64,
) -> Result<Bound<RootBound>> {
    let st = backward_state(problem, v_hat)?;
    if !st.extreme {
        return Ok(Bound::Unavailable(Reason::NotExtremeSubspace));
    }
    Ok(tau_star(st.gap.g, d_hat, st.bp.norm, st.gap.zeta, root_tol))
}

/// Rule-of-thumb error estimate `γ̂* = ‖R‖₂/(ĝ − d̂)`, unclamped. It is not
/// a rigorous bound and is reported whenever `ĝ > d̂`.
pub fn error_bound_gamma<T: Scalar>(
    problem: &NepvProblem<T>,
    v_hat: &OrthonormalBasis<T>,
    d_hat: f64,
) -> Result<Bound> {
    let bp = backward_perturbation(problem, v_hat)?;
    let gap = backward_gap(problem, &bp)?;
    Ok(gamma_hat(gap.g, d_hat, bp.norm))
}

fn gamma_hat(g: f64, d: f64, r: f64) -> Bound {
    if g > d {
        Bound::Available(r / (g - d))
    } else {
        Bound::Unavailable(Reason::GapNotAboveD)
    }
}

/// `d̂`: the Lipschitz estimate of `A(·)` centered at `P̂`. The sampling radius
/// starts at 0.5 and is then reset `refinement_passes` times to the current
/// `γ̂*`.
pub fn estimate_d_hat<T: Scalar>(
    problem: &NepvProblem<T>,
    v_hat: &OrthonormalBasis<T>,
    g_hat: f64,
    residual_norm: f64,
    sampler: &SamplerConfig,
    refinement_passes: usize,
) -> Result<LipschitzEstimate> {
    let mut xi = MAX_SAMPLING_RADIUS;
    let mut est = estimate_d(problem, v_hat, xi, sampler)?;
    for _ in 0..refinement_passes {
        let d = est.d1.value + est.d2.value;
        let next = match gamma_hat(g_hat, d, residual_norm) {
            Bound::Available(gamma) => gamma.clamp(MIN_SAMPLING_RADIUS, MAX_SAMPLING_RADIUS),
            Bound::Unavailable(_) => MAX_SAMPLING_RADIUS,
        };
        if next == xi {
            break;
        }
        xi = next;
        est = estimate_d(problem, v_hat, xi, sampler)?;
    }
    Ok(est)
}

/// All a posteriori quantities at one approximate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBoundReport {
    pub gap: GapData,
    pub residual_norm: f64,
    pub d1: Estimate,
    pub d2: Estimate,
    /// `1/(ĝ − d̂)`, reported even when negative.
    pub kappa_raw: f64,
    /// Whether the eigenspace hypothesis of `ξ̂*` and `τ̂*` holds at `V̂`.
    pub spans_extreme: bool,
    pub xi_hat: Bound,
    pub tau_hat: Bound<RootBound>,
    pub gamma_hat: Bound,
}

impl ErrorBoundReport {
    pub fn d_hat(&self) -> f64 {
        self.d1.value + self.d2.value
    }

    pub fn g_over_d(&self) -> f64 {
        self.gap.g / self.d_hat()
    }
}

/// Estimates `d̂` around `V̂` and evaluates all three error bounds.
pub fn error_bounds<T: Scalar>(
    problem: &NepvProblem<T>,
    v_hat: &OrthonormalBasis<T>,
    sampler: &SamplerConfig,
    refinement_passes: usize,
    root_tol: f64,
) -> Result<ErrorBoundReport> {
    let st = backward_state(problem, v_hat)?;
    let d = estimate_d_hat(problem, v_hat, st.gap.g, st.bp.norm, sampler, refinement_passes)?;
    Ok(report_from(&st, d, root_tol))
}

/// Error bounds with a caller-supplied `d̂`.
pub fn error_bounds_with_d<T: Scalar>(
    problem: &NepvProblem<T>,
    v_hat: &OrthonormalBasis<T>,
    d_hat: f64,
    root_tol: f64,
) -> Result<ErrorBoundReport> {
    let st = backward_state(problem, v_hat)?;
    let d = LipschitzEstimate {
        d1: Estimate::analytic(d_hat),
        d2: Estimate::analytic(0.0),
    };
    Ok(report_from(&st, d, root_tol))
}

fn report_from<T: Scalar>(st: &BackwardState<T>, d: LipschitzEstimate, root_tol: f64) -> ErrorBoundReport {
    let d_hat = d.d1.value + d.d2.value;
    let (gap, r) = (st.gap, st.bp.norm);
    let rigorous = |b: Bound| {
        if st.extreme {
            b
        } else {
            Bound::Unavailable(Reason::NotExtremeSubspace)
        }
    };
    ErrorBoundReport {
        gap,
        residual_norm: r,
        d1: d.d1,
        d2: d.d2,
        kappa_raw: 1.0 / (gap.g - d_hat),
        spans_extreme: st.extreme,
        xi_hat: rigorous(xi_star(gap.g, d_hat, r)),
        tau_hat: if st.extreme {
            tau_star(gap.g, d_hat, r, gap.zeta, root_tol)
        } else {
            Bound::Unavailable(Reason::NotExtremeSubspace)
        },
        gamma_hat: gamma_hat(gap.g, d_hat, r),
    }
}
