//! Seeded randomness.
//!
//! All random draws go through [`Prng`], a ChaCha8 stream generator from
//! `rand_chacha`. Independent consumers of one seed use distinct ChaCha
//! streams rather than re-seeding, so adding draws to one consumer never
//! shifts another.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// The pinned generator. Recorded in run metadata as [`PRNG_NAME`].
pub type Prng = ChaCha8Rng;

pub const PRNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";

/// Stream used for base-instance data (matrices of the unperturbed problem).
pub const STREAM_INSTANCE: u64 = 0;
/// Stream used for perturbation data.
pub const STREAM_PERTURBATION: u64 = 1;
/// Stream used for random initial guesses.
pub const STREAM_INITIAL_GUESS: u64 = 2;

pub fn prng(seed: u64, stream: u64) -> Prng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives the seed of replicate `index` from a master seed: the first
/// output of the pinned generator seeded with `master ^ index`.
pub fn split_seed(master: u64, index: u64) -> u64 {
    ChaCha8Rng::seed_from_u64(master ^ index).random()
}

/// Field scalars the library supports: `f64` and `Complex64`.
pub trait Scalar: nalgebra::ComplexField<RealField = f64> + Copy {
    fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f64 {
    fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Scalar for Complex64 {
    fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }
}

pub fn gaussian_matrix<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<T> {
    DMatrix::from_fn(rows, cols, |_, _| T::gaussian(rng))
}

/// Matrix with i.i.d. entries uniform on [0, 1).
pub fn uniform_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}
