//! Experiment configuration files.
//!
//! A config is TOML with a top-level `kind` and flat sections:
//!
//! ```toml
//! kind = "ks-perturb"
//!
//! [ks]
//! n = 50
//! k = 8
//! h = [0.05, 0.06]
//! eps = [1e-12, 1e-8]
//! seed = 42
//!
//! [estimator]
//! samples = 500
//! ```
//!
//! Scalars are accepted wherever a list is expected. Unknown keys are errors.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    KsPerturb,
    KsScfErrbounds,
    TrPerturb,
    TrScfErrbounds,
    SingleSolve,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::KsPerturb => "ks-perturb",
            Self::KsScfErrbounds => "ks-scf-errbounds",
            Self::TrPerturb => "tr-perturb",
            Self::TrScfErrbounds => "tr-scf-errbounds",
            Self::SingleSolve => "single-solve",
        })
    }
}

/// Starting basis for SCF runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    /// Eigenvectors of `A₀` at the problem's spectral end.
    #[default]
    A0,
    /// QR of a seeded Gaussian matrix.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum End {
    #[default]
    Smallest,
    Largest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    /// Samples per supremum estimate.
    pub samples: usize,
    /// Radius refinement passes after the initial `ξ = 0.5` estimate.
    pub refinement_passes: usize,
    /// Prefer registered closed-form bounds over sampling.
    pub use_analytic: bool,
    pub root_tol: f64,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            samples: 500,
            refinement_passes: 1,
            use_analytic: true,
            root_tol: nepv_core::perturbation::DEFAULT_ROOT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Relative residual at which SCF stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iter: 200,
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

fn opt_one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    one_or_many(d).map(Some)
}

fn default_gamma() -> f64 {
    1.0
}

fn default_replicates() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KsSection {
    pub n: usize,
    pub k: usize,
    #[serde(deserialize_with = "one_or_many")]
    pub h: Vec<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Sets both `eps1` and `eps2`.
    #[serde(
        default,
        deserialize_with = "opt_one_or_many",
        skip_serializing_if = "Option::is_none"
    )]
    pub eps: Option<Vec<f64>>,
    #[serde(
        default,
        deserialize_with = "opt_one_or_many",
        skip_serializing_if = "Option::is_none"
    )]
    pub eps1: Option<Vec<f64>>,
    #[serde(
        default,
        deserialize_with = "opt_one_or_many",
        skip_serializing_if = "Option::is_none"
    )]
    pub eps2: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial_guess: InitialGuess,
}

impl KsSection {
    /// `(ε₁, ε₂)` sweep values; a length-1 list is broadcast, a missing one is 0.
    pub fn eps_pairs(&self) -> Result<Vec<(f64, f64)>, String> {
        if let Some(eps) = &self.eps {
            if self.eps1.is_some() || self.eps2.is_some() {
                return Err("give either `eps` or `eps1`/`eps2`, not both".into());
            }
            return Ok(eps.iter().map(|&e| (e, e)).collect());
        }
        let e1 = self.eps1.clone().unwrap_or_else(|| vec![0.0]);
        let e2 = self.eps2.clone().unwrap_or_else(|| vec![0.0]);
        if self.eps1.is_none() && self.eps2.is_none() {
            return Ok(Vec::new());
        }
        let len = e1.len().max(e2.len());
        if (e1.len() != len && e1.len() != 1) || (e2.len() != len && e2.len() != 1) {
            return Err(format!(
                "`eps1` ({}) and `eps2` ({}) have incompatible lengths",
                e1.len(),
                e2.len()
            ));
        }
        let at = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };
        Ok((0..len).map(|i| (at(&e1, i), at(&e2, i))).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrSection {
    pub n: usize,
    pub k: usize,
    #[serde(deserialize_with = "one_or_many")]
    pub beta: Vec<f64>,
    #[serde(
        default,
        deserialize_with = "opt_one_or_many",
        skip_serializing_if = "Option::is_none"
    )]
    pub eps: Option<Vec<f64>>,
    /// Target perturbation sizes `δ`; `ε` is calibrated per instance.
    #[serde(
        default,
        deserialize_with = "opt_one_or_many",
        skip_serializing_if = "Option::is_none"
    )]
    pub delta_target: Option<Vec<f64>>,
    /// Independent random instances per sweep point.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial_guess: InitialGuess,
}

/// A linear eigenvalue problem (`A₁ ≡ A₂ ≡ 0`) with a seeded Gaussian `A₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSection {
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub end: End,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// CSV destination; the command line `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<KsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tr: Option<TrSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearSection>,
}

/// 1-based line of `key = ...` inside `[section]` (top level when `section` is empty).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|s| s.split(']').next()) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let spec: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
        spec.validate().map_err(|(section, key, msg)| {
            let at = match locate(text, section, key) {
                Some(line) => format!(" (line {line})"),
                None => String::new(),
            };
            let name = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            CliError::Config(format!("`{name}`{at}: {msg}"))
        })?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("specs always serialize")
    }

    /// The seed of whichever problem section the kind uses.
    pub fn seed(&self) -> u64 {
        match self.kind {
            ExperimentKind::KsPerturb | ExperimentKind::KsScfErrbounds => self.ks.as_ref().map_or(0, |s| s.seed),
            ExperimentKind::TrPerturb | ExperimentKind::TrScfErrbounds => self.tr.as_ref().map_or(0, |s| s.seed),
            ExperimentKind::SingleSolve => self
                .linear
                .as_ref()
                .map(|s| s.seed)
                .or(self.ks.as_ref().map(|s| s.seed))
                .or(self.tr.as_ref().map(|s| s.seed))
                .unwrap_or(0),
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        if let Some(s) = self.ks.as_mut() {
            s.seed = seed;
        }
        if let Some(s) = self.tr.as_mut() {
            s.seed = seed;
        }
        if let Some(s) = self.linear.as_mut() {
            s.seed = seed;
        }
    }

    /// Checks kind-required sections and value ranges; errors carry
    /// `(section, key, message)`.
    pub fn validate(&self) -> Result<(), (&'static str, &'static str, String)> {
        use ExperimentKind::*;
        let present = [self.ks.is_some(), self.tr.is_some(), self.linear.is_some()];
        let need = |ok: bool, section: &'static str| {
            if ok {
                Ok(())
            } else {
                Err(("", "kind", format!("`{}` needs a [{section}] section", self.kind)))
            }
        };
        match self.kind {
            KsPerturb | KsScfErrbounds => need(self.ks.is_some(), "ks")?,
            TrPerturb | TrScfErrbounds => need(self.tr.is_some(), "tr")?,
            SingleSolve => {
                if present.iter().filter(|&&p| p).count() != 1 {
                    return Err((
                        "",
                        "kind",
                        "`single-solve` needs exactly one of [ks], [tr], [linear]".into(),
                    ));
                }
            }
        }
        if self.solver.max_iter == 0 {
            return Err(("solver", "max_iter", "must be at least 1".into()));
        }
        if !(self.solver.tol > 0.0) {
            return Err(("solver", "tol", "must be positive".into()));
        }
        if !(self.estimator.root_tol > 0.0) {
            return Err(("estimator", "root_tol", "must be positive".into()));
        }
        let positive = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        let nonneg = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        if let Some(ks) = &self.ks {
            if ks.k == 0 || ks.n < 2 * ks.k {
                return Err(("ks", "k", format!("need 1 <= k <= n/2 (n = {}, k = {})", ks.n, ks.k)));
            }
            if ks.h.is_empty() || !positive(&ks.h) {
                return Err(("ks", "h", "must be a nonempty list of positive values".into()));
            }
            let pairs = ks.eps_pairs().map_err(|m| ("ks", "eps", m))?;
            if pairs.iter().any(|&(a, b)| !nonneg(&[a, b])) {
                return Err(("ks", "eps", "perturbation sizes must be nonnegative".into()));
            }
            if self.kind == KsPerturb && pairs.is_empty() {
                return Err((
                    "ks",
                    "eps",
                    "`ks-perturb` needs a nonempty `eps` (or `eps1`/`eps2`) sweep".into(),
                ));
            }
        }
        if let Some(tr) = &self.tr {
            if tr.k == 0 || tr.n <= tr.k {
                return Err(("tr", "k", format!("need 1 <= k < n (n = {}, k = {})", tr.n, tr.k)));
            }
            if tr.beta.is_empty() || !tr.beta.iter().all(|b| (0.0..50.0).contains(b)) {
                return Err(("tr", "beta", "must be a nonempty list of values in [0, 50)".into()));
            }
            if tr.replicates == 0 {
                return Err(("tr", "replicates", "must be at least 1".into()));
            }
            match (&tr.eps, &tr.delta_target) {
                (Some(_), Some(_)) => {
                    return Err((
                        "tr",
                        "delta_target",
                        "give either `eps` or `delta_target`, not both".into(),
                    ))
                }
                (Some(e), None) if e.is_empty() || !nonneg(e) => {
                    return Err(("tr", "eps", "must be a nonempty list of nonnegative values".into()))
                }
                (None, Some(d)) if d.is_empty() || !positive(d) => {
                    return Err((
                        "tr",
                        "delta_target",
                        "must be a nonempty list of positive values".into(),
                    ))
                }
                (None, None) if self.kind == TrPerturb => {
                    return Err(("tr", "eps", "`tr-perturb` needs `eps` or `delta_target`".into()))
                }
                _ => {}
            }
        }
        if let Some(lin) = &self.linear {
            if lin.k == 0 || lin.n <= lin.k {
                return Err(("linear", "k", format!("need 1 <= k < n (n = {}, k = {})", lin.n, lin.k)));
            }
        }
        Ok(())
    }
}
