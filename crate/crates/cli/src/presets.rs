//! Parameter grids of the three benchmark tables.

use crate::config::{
    EstimatorSection, ExperimentKind, ExperimentSpec, InitialGuess, KsSection, SolverSection, TrSection,
};

/// Master seed of the preset commands when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Kohn–Sham a priori bounds: n = 50, k = 8, h ∈ {0.05, …, 0.08}, ε = 10⁻³ … 10⁻¹².
    Table1,
    /// Trace-ratio a priori bounds: n = 100, k = 5, β ∈ {5, 8, 10, 12, 15}, δ ∈ {10⁻¹², 10⁻⁶, 10⁻⁴}.
    Table2,
    /// Trace-ratio error bounds along SCF from a random start, β ∈ {5, 10, 15}.
    Table3,
}

fn base(kind: ExperimentKind) -> ExperimentSpec {
    ExperimentSpec {
        kind,
        output: None,
        estimator: EstimatorSection::default(),
        solver: SolverSection::default(),
        ks: None,
        tr: None,
        linear: None,
    }
}

impl Preset {
    pub fn spec(self, seed: u64) -> ExperimentSpec {
        match self {
            Preset::Table1 => ExperimentSpec {
                ks: Some(KsSection {
                    n: 50,
                    k: 8,
                    h: vec![0.05, 0.06, 0.07, 0.08],
                    gamma: 1.0,
                    eps: Some((3..=12).map(|j| 10f64.powi(-j)).collect()),
                    eps1: None,
                    eps2: None,
                    seed,
                    initial_guess: InitialGuess::A0,
                }),
                ..base(ExperimentKind::KsPerturb)
            },
            Preset::Table2 => ExperimentSpec {
                tr: Some(TrSection {
                    n: 100,
                    k: 5,
                    beta: vec![5.0, 8.0, 10.0, 12.0, 15.0],
                    eps: None,
                    delta_target: Some(vec![1e-12, 1e-6, 1e-4]),
                    replicates: 1,
                    seed,
                    initial_guess: InitialGuess::A0,
                }),
                ..base(ExperimentKind::TrPerturb)
            },
            Preset::Table3 => ExperimentSpec {
                tr: Some(TrSection {
                    n: 100,
                    k: 5,
                    beta: vec![5.0, 10.0, 15.0],
                    eps: None,
                    delta_target: None,
                    replicates: 1,
                    seed,
                    initial_guess: InitialGuess::Random,
                }),
                ..base(ExperimentKind::TrScfErrbounds)
            },
        }
    }
}
