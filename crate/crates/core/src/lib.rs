//! Eigenvector-dependent nonlinear eigenvalue problems (NEPv)
//! `A(P)V = VΛ`, `P = VVᴴ`: a plain SCF solver, a priori perturbation
//! bounds with a condition number, and residual-based a posteriori error
//! bounds. Two model problems are included: a discretized Kohn–Sham
//! Hamiltonian and the sum-of-trace-ratio maximization.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aposteriori;
pub mod error;
pub mod ks;
pub mod linalg;
pub mod nepv;
pub mod perturbation;
pub mod rng;
pub mod roots;
pub mod trace_ratio;

pub use error::{Error, Result};
pub use linalg::{
    canonical_angles, eigh_sorted, sin_theta_dist, spectral_norm, HermitianMatrix, OrderedEigensystem,
    OrthonormalBasis, Projector,
};
pub use nepv::{residual, scf_solve, NepvProblem, ScfOptions, ScfTrace, SpectralEnd};
pub use perturbation::{Bound, BoundReport, GapData, PerturbationData, Reason, SamplerConfig};
