//! A priori perturbation analysis of an NEPv solution: spectral gap data,
//! estimates of the perturbation size `δ` and local Lipschitz constant `d`,
//! the two subspace perturbation bounds, the condition number and the
//! rule-of-thumb bound.
//!
//! All spectral quantities are taken from the *oriented* operator
//! `sign·A(P)` so that largest-end problems reuse the smallest-end formulas.

use std::fmt;

use rand::Rng;

use crate::error::{mismatch, Error, Result};
use crate::linalg::{eigh_sorted, sin_theta_dist, spectral_norm, HermitianMatrix, OrthonormalBasis};
use crate::nepv::{residual, NepvProblem};
use crate::rng::{gaussian_matrix, prng, Scalar};
use crate::roots::smallest_root;

/// Default tolerance on `|f(η*)|` relative to `max(g, δ, 1)`.
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

/// Relative residual a basis must reach before its gap data is trusted.
pub const SOLUTION_TOL: f64 = 1e-12;

/// Sampling radii below this are raised to it.
pub const MIN_SAMPLING_RADIUS: f64 = 1e-8;

/// Upper end of the default sampling radius.
pub const MAX_SAMPLING_RADIUS: f64 = 0.5;

/// Why a bound is not returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    /// `δ < g/2 − d` does not hold.
    HypothesisFailed,
    /// `f(η)` has no sign change on `(0, ζ)`.
    NoRootBelowZeta,
    /// `g ≤ d`.
    GapNotAboveD,
    /// `V̂` does not span the extreme eigenspace of the backward operator.
    NotExtremeSubspace,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::HypothesisFailed => "hypothesis-failed",
            Reason::NoRootBelowZeta => "no-root-below-zeta",
            Reason::GapNotAboveD => "g-le-d",
            Reason::NotExtremeSubspace => "not-extreme-subspace",
        })
    }
}

/// A bound that is either available or absent for a stated reason.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound<T = f64> {
    Available(T),
    Unavailable(Reason),
}

impl<T: Copy> Bound<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Bound::Available(v) => Some(*v),
            Bound::Unavailable(_) => None,
        }
    }

    pub fn reason(&self) -> Option<Reason> {
        match self {
            Bound::Available(_) => None,
            Bound::Unavailable(r) => Some(*r),
        }
    }

    pub fn is_available(&self) -> bool {
        matches!(self, Bound::Available(_))
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Bound<U> {
        match self {
            Bound::Available(v) => Bound::Available(f(v)),
            Bound::Unavailable(r) => Bound::Unavailable(r),
        }
    }
}

/// Gap quantities of the oriented spectrum at a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapData {
    /// `λ_{k+1} − λ_k`.
    pub g: f64,
    /// `max_j (λ_{k+j} − λ_j)`, `j = 1..min(k, n−k)`.
    pub h: f64,
    /// `√g / (√g + √(2h))`.
    pub zeta: f64,
}

impl GapData {
    /// Gap data from a nondecreasing spectrum.
    pub fn from_spectrum(values: &[f64], k: usize) -> Result<Self> {
        let n = values.len();
        if k == 0 || k >= n {
            return Err(Error::Malformed(format!("need 0 < k < n, got k = {k}, n = {n}")));
        }
        let g = values[k] - values[k - 1];
        if !(g > 0.0) {
            return Err(Error::GapViolation(g));
        }
        let h = (0..k.min(n - k)).map(|j| values[k + j] - values[j]).fold(g, f64::max);
        let zeta = g.sqrt() / (g.sqrt() + (2.0 * h).sqrt());
        Ok(Self { g, h, zeta })
    }
}

/// Gap data of `sign·A(P*)` at a solution `V*` (relative residual must be
/// at most [`SOLUTION_TOL`]).
pub fn compute_gap<T: Scalar>(problem: &NepvProblem<T>, v_star: &OrthonormalBasis<T>) -> Result<GapData> {
    let res = residual(problem, v_star)?;
    if res.relative() > SOLUTION_TOL {
        return Err(Error::NotASolution {
            relative_residual: res.relative(),
            tolerance: SOLUTION_TOL,
        });
    }
    let values = res.operator.scale(problem.sign()).eigenvalues()?;
    GapData::from_spectrum(&values, problem.subspace_dim())
}

/// How a supremum estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exact value or closed-form upper bound.
    Analytic,
    /// Maximum over seeded random samples; a lower bound of the supremum.
    Sampled { samples: usize, seed: u64 },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Analytic => f.write_str("analytic"),
            Method::Sampled { samples, seed } => write!(f, "sampled(m={samples} seed={seed})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub method: Method,
}

impl Estimate {
    pub fn analytic(value: f64) -> Self {
        Self {
            value,
            method: Method::Analytic,
        }
    }
}

/// `δ₀, δ₁, δ₂, d₁, d₂` with provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationData {
    pub delta0: Estimate,
    pub delta1: Estimate,
    pub delta2: Estimate,
    pub d1: Estimate,
    pub d2: Estimate,
    /// Radius `ξ` of the sampling region `{P : ‖P − P*‖₂ ≤ ξ}`.
    pub xi_ball: f64,
}

impl PerturbationData {
    /// Data with analytic values only, for callers that know `δ` and `d`.
    pub fn from_values(delta: f64, d: f64) -> Self {
        let zero = Estimate::analytic(0.0);
        Self {
            delta0: Estimate::analytic(delta),
            delta1: zero,
            delta2: zero,
            d1: Estimate::analytic(d),
            d2: zero,
            xi_ball: 0.0,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta0.value + self.delta1.value + self.delta2.value
    }

    pub fn d(&self) -> f64 {
        self.d1.value + self.d2.value
    }

    /// Method tag of `d`: analytic only if both parts are.
    pub fn d_method(&self) -> Method {
        match (self.d1.method, self.d2.method) {
            (Method::Analytic, Method::Analytic) => Method::Analytic,
            (m @ Method::Sampled { .. }, _) | (_, m @ Method::Sampled { .. }) => m,
        }
    }
}

/// Monte-Carlo settings for the supremum estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub samples: usize,
    pub seed: u64,
    /// Use closed-form bounds registered on the problem when present.
    pub use_analytic: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            samples: 500,
            seed: 0,
            use_analytic: true,
        }
    }
}

/// Draws a basis `V` with `‖sin Θ(V, V*)‖₂ = r ≤ ξ`, `r` uniform on `(0, ξ]`.
///
/// `V = orth(V* + sG)` with `G` Gaussian, projected onto the complement of
/// `R(V*)`; the largest canonical angle is then `atan(s‖G‖₂)`, which fixes
/// `s`. Odd draws use a rank-one `G` so that a single direction carries the
/// whole perturbation.
pub fn sample_near<T: Scalar, R: Rng + ?Sized>(
    v_star: &OrthonormalBasis<T>,
    xi: f64,
    rank_one: bool,
    rng: &mut R,
) -> Result<OrthonormalBasis<T>> {
    let (n, k) = (v_star.rows(), v_star.cols());
    let radius = xi.min(1.0 - 1e-9);
    loop {
        let g = if rank_one {
            gaussian_matrix::<T, R>(n, 1, rng) * gaussian_matrix::<T, R>(1, k, rng)
        } else {
            gaussian_matrix::<T, R>(n, k, rng)
        };
        let vs = v_star.matrix();
        let g = &g - vs * (vs.adjoint() * &g);
        let g_norm = spectral_norm(&g)?;
        if g_norm == 0.0 {
            continue;
        }
        let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let r = radius * u;
        let s = r.asin().tan() / g_norm;
        let candidate = OrthonormalBasis::orthonormalize(vs + g * T::from_real(s))?;
        // rejection on overshoot
        if sin_theta_dist(&candidate, v_star)? <= xi * (1.0 + 1e-9) {
            return Ok(candidate);
        }
    }
}

fn sampled_bases<T: Scalar>(
    v_star: &OrthonormalBasis<T>,
    xi: f64,
    sampler: &SamplerConfig,
) -> Result<Vec<OrthonormalBasis<T>>> {
    let mut rng = prng(sampler.seed, crate::rng::STREAM_PERTURBATION + 16);
    (0..sampler.samples)
        .map(|i| sample_near(v_star, xi, i % 2 == 1, &mut rng))
        .collect()
}

fn check_radius(xi: f64) -> Result<()> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::Malformed(format!(
            "sampling radius xi = {xi} must lie in (0, 1]"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEstimate {
    pub delta0: Estimate,
    pub delta1: Estimate,
    pub delta2: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub d1: Estimate,
    pub d2: Estimate,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Part {
    Linear,
    Nonlinear,
}

fn part<T: Scalar>(problem: &NepvProblem<T>, which: Part, p: &nalgebra::DMatrix<T>) -> Result<HermitianMatrix<T>> {
    match which {
        Part::Linear => problem.linear_part(p),
        Part::Nonlinear => problem.nonlinear_part(p),
    }
}

/// `δ₀ = ‖Ã₀ − A₀‖₂` exactly; `δ₁`, `δ₂` as suprema of `‖Ã_i(P) − A_i(P)‖₂`
/// over the ball of radius `xi` about `P*`: closed form when the perturbed
/// problem registers one, otherwise the maximum over `P*` and the samples.
pub fn estimate_delta<T: Scalar>(
    problem: &NepvProblem<T>,
    perturbed: &NepvProblem<T>,
    v_star: &OrthonormalBasis<T>,
    xi: f64,
    sampler: &SamplerConfig,
) -> Result<DeltaEstimate> {
    check_radius(xi)?;
    if problem.dim() != perturbed.dim() || problem.subspace_dim() != perturbed.subspace_dim() {
        return Err(mismatch(
            format!("n={}, k={}", problem.dim(), problem.subspace_dim()),
            format!("n={}, k={}", perturbed.dim(), perturbed.subspace_dim()),
        ));
    }
    let delta0 = Estimate::analytic((perturbed.a0() - problem.a0()).spectral_norm()?);
    let known = perturbed.delta_bounds();
    let present = [
        problem.has_linear() || perturbed.has_linear(),
        problem.has_nonlinear() || perturbed.has_nonlinear(),
    ];
    let analytic = [known.delta1, known.delta2];
    let mut out = [Estimate::analytic(0.0); 2];
    let mut need_sampling = [false; 2];
    for i in 0..2 {
        if !present[i] {
            continue;
        }
        match analytic[i].filter(|_| sampler.use_analytic) {
            Some(v) => out[i] = Estimate::analytic(v),
            None => need_sampling[i] = true,
        }
    }
    if need_sampling.iter().any(|&b| b) {
        if sampler.samples == 0 {
            return Err(Error::Unavailable(
                "delta needs sampling but the sample budget is 0".into(),
            ));
        }
        let mut bases = sampled_bases(v_star, xi, sampler)?;
        bases.push(v_star.clone());
        let mut best = [0.0f64; 2];
        for v in &bases {
            let p = v.projector().dense();
            for (i, which) in [Part::Linear, Part::Nonlinear].into_iter().enumerate() {
                if need_sampling[i] {
                    let diff = &part(perturbed, which, &p)? - &part(problem, which, &p)?;
                    best[i] = best[i].max(diff.spectral_norm()?);
                }
            }
        }
        let method = Method::Sampled {
            samples: sampler.samples,
            seed: sampler.seed,
        };
        for i in 0..2 {
            if need_sampling[i] {
                out[i] = Estimate { value: best[i], method };
            }
        }
    }
    Ok(DeltaEstimate {
        delta0,
        delta1: out[0],
        delta2: out[1],
    })
}

/// `d₁`, `d₂`: suprema of `‖A_i(P) − A_i(P*)‖₂ / ‖P − P*‖₂` over the ball of
/// radius `xi` about `P* = V*V*ᴴ`, closed form when registered.
pub fn estimate_d<T: Scalar>(
    problem: &NepvProblem<T>,
    v_star: &OrthonormalBasis<T>,
    xi: f64,
    sampler: &SamplerConfig,
) -> Result<LipschitzEstimate> {
    check_radius(xi)?;
    if v_star.rows() != problem.dim() || v_star.cols() != problem.subspace_dim() {
        return Err(mismatch(
            format!("{}x{}", problem.dim(), problem.subspace_dim()),
            format!("{}x{}", v_star.rows(), v_star.cols()),
        ));
    }
    let known = problem.lipschitz_bounds();
    let present = [problem.has_linear(), problem.has_nonlinear()];
    let analytic = [known.d1, known.d2];
    let mut out = [Estimate::analytic(0.0); 2];
    let mut need_sampling = [false; 2];
    for i in 0..2 {
        if !present[i] {
            continue;
        }
        match analytic[i].filter(|_| sampler.use_analytic) {
            Some(v) => out[i] = Estimate::analytic(v),
            None => need_sampling[i] = true,
        }
    }
    if need_sampling.iter().any(|&b| b) {
        if sampler.samples == 0 {
            return Err(Error::Unavailable("d needs sampling but the sample budget is 0".into()));
        }
        let p_star = v_star.projector().dense();
        let centers = [
            part(problem, Part::Linear, &p_star)?,
            part(problem, Part::Nonlinear, &p_star)?,
        ];
        let mut best = [0.0f64; 2];
        for v in sampled_bases(v_star, xi, sampler)? {
            let dist = sin_theta_dist(&v, v_star)?;
            if dist == 0.0 {
                continue;
            }
            let p = v.projector().dense();
            for (i, which) in [Part::Linear, Part::Nonlinear].into_iter().enumerate() {
                if need_sampling[i] {
                    let diff = &part(problem, which, &p)? - &centers[i];
                    best[i] = best[i].max(diff.spectral_norm()? / dist);
                }
            }
        }
        let method = Method::Sampled {
            samples: sampler.samples,
            seed: sampler.seed,
        };
        for i in 0..2 {
            if need_sampling[i] {
                out[i] = Estimate { value: best[i], method };
            }
        }
    }
    Ok(LipschitzEstimate { d1: out[0], d2: out[1] })
}

/// Sampling radius for the next estimation pass: `min(2δ/(g − d), 0.5)`,
/// floored at [`MIN_SAMPLING_RADIUS`].
pub fn refined_radius(g: f64, delta: f64, d: f64) -> f64 {
    let xi = if g > d {
        2.0 * delta / (g - d)
    } else {
        MAX_SAMPLING_RADIUS
    };
    xi.clamp(MIN_SAMPLING_RADIUS, MAX_SAMPLING_RADIUS)
}

/// Full `δ`/`d` estimation with the self-referential radius resolved by
/// fixed-point passes: estimate at `ξ = 0.5`, then `refinement_passes`
/// times recompute `ξ` from the current `δ`, `d` and re-estimate.
pub fn estimate_perturbation<T: Scalar>(
    problem: &NepvProblem<T>,
    perturbed: &NepvProblem<T>,
    v_star: &OrthonormalBasis<T>,
    gap: &GapData,
    sampler: &SamplerConfig,
    refinement_passes: usize,
) -> Result<PerturbationData> {
    let mut xi = MAX_SAMPLING_RADIUS;
    let mut data = estimate_at(problem, perturbed, v_star, xi, sampler)?;
    for _ in 0..refinement_passes {
        let next = refined_radius(gap.g, data.delta(), data.d());
        if next == xi {
            break;
        }
        xi = next;
        data = estimate_at(problem, perturbed, v_star, xi, sampler)?;
    }
    Ok(data)
}

fn estimate_at<T: Scalar>(
    problem: &NepvProblem<T>,
    perturbed: &NepvProblem<T>,
    v_star: &OrthonormalBasis<T>,
    xi: f64,
    sampler: &SamplerConfig,
) -> Result<PerturbationData> {
    let delta = estimate_delta(problem, perturbed, v_star, xi, sampler)?;
    let d = estimate_d(problem, v_star, xi, sampler)?;
    Ok(PerturbationData {
        delta0: delta.delta0,
        delta1: delta.delta1,
        delta2: delta.delta2,
        d1: d.d1,
        d2: d.d2,
        xi_ball: xi,
    })
}

/// `2δ / (g − d − δ + √((g − d − δ)² − 4dδ))` when `δ < g/2 − d`.
pub fn xi_star(g: f64, d: f64, delta: f64) -> Bound {
    if !(delta < 0.5 * g - d) {
        return Bound::Unavailable(Reason::HypothesisFailed);
    }
    let a = g - d - delta;
    let disc = (a * a - 4.0 * d * delta).max(0.0);
    Bound::Available(2.0 * delta / (a + disc.sqrt()))
}

/// Smallest positive root `η*` of `f(η) = gη − dη√(1+η²) − (1+η²)δ` and the
/// bound `τ* = η*/√(1+η*²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBound {
    pub eta: f64,
    pub tau: f64,
}

pub fn f_eta(g: f64, d: f64, delta: f64, eta: f64) -> f64 {
    let s = 1.0 + eta * eta;
    g * eta - d * eta * s.sqrt() - s * delta
}

/// Root search for `f(η) = 0` on `(0, ζ)`.
pub fn tau_star(g: f64, d: f64, delta: f64, zeta: f64, root_tol: f64) -> Bound<RootBound> {
    if delta == 0.0 {
        return Bound::Available(RootBound { eta: 0.0, tau: 0.0 });
    }
    match smallest_root(|eta| f_eta(g, d, delta, eta), zeta) {
        Some(eta) if eta < zeta => {
            debug_assert!(f_eta(g, d, delta, eta).abs() <= root_tol * g.max(delta).max(1.0));
            Bound::Available(RootBound {
                eta,
                tau: eta / (1.0 + eta * eta).sqrt(),
            })
        }
        _ => Bound::Unavailable(Reason::NoRootBelowZeta),
    }
}

/// First subspace perturbation bound `ξ*` (requires `δ < g/2 − d`).
pub fn bound_thm1(gap: &GapData, pert: &PerturbationData) -> Bound {
    xi_star(gap.g, pert.d(), pert.delta())
}

/// Second subspace perturbation bound `(η*, τ*)` (requires a root of `f`
/// below `ζ`).
pub fn bound_thm2(gap: &GapData, pert: &PerturbationData, root_tol: f64) -> Bound<RootBound> {
    tau_star(gap.g, pert.d(), pert.delta(), gap.zeta, root_tol)
}

/// `κ = 1/(g − d)`.
pub fn condition_number(gap: &GapData, pert: &PerturbationData) -> Bound {
    let d = pert.d();
    if gap.g > d {
        Bound::Available(1.0 / (gap.g - d))
    } else {
        Bound::Unavailable(Reason::GapNotAboveD)
    }
}

/// `γ* = δ/(g − d)`: perturbation size times condition number.
pub fn rule_of_thumb_bound(gap: &GapData, pert: &PerturbationData) -> Bound {
    condition_number(gap, pert).map(|kappa| kappa * pert.delta())
}

/// `tan Θ` bound `2δ/(g + √(g² − 4δ²))` for the linear Hermitian case
/// (`d = 0`), valid when `δ ≤ g/2`.
pub fn hermitian_special_case_bound(g: f64, delta: f64) -> Bound {
    if delta <= 0.5 * g {
        let disc = (g * g - 4.0 * delta * delta).max(0.0);
        Bound::Available(2.0 * delta / (g + disc.sqrt()))
    } else {
        Bound::Unavailable(Reason::HypothesisFailed)
    }
}

/// Every a priori quantity for one perturbation instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub gap: GapData,
    pub pert: PerturbationData,
    pub kappa: Bound,
    pub xi_star: Bound,
    pub tau_star: Bound<RootBound>,
    pub gamma_star: Bound,
}

impl BoundReport {
    pub fn new(gap: GapData, pert: PerturbationData, root_tol: f64) -> Self {
        Self {
            kappa: condition_number(&gap, &pert),
            xi_star: bound_thm1(&gap, &pert),
            tau_star: bound_thm2(&gap, &pert, root_tol),
            gamma_star: rule_of_thumb_bound(&gap, &pert),
            gap,
            pert,
        }
    }

    pub fn g_over_d(&self) -> f64 {
        self.gap.g / self.pert.d()
    }
}

/// Spectrum of `sign·M`, used for gap data of perturbed or backward operators.
pub(crate) fn oriented_spectrum<T: Scalar>(m: &HermitianMatrix<T>, sign: f64) -> Result<Vec<f64>> {
    Ok(eigh_sorted(&m.scale(sign))?.values)
}
