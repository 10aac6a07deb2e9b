#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use opinf_core::fom::{random_polynomial_system, PolynomialSystem, RandomSystemSpec};
use opinf_core::subspace::Basis;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    low: f64,
    high: f64,
) -> DMatrix<f64> {
    let dist = Uniform::new(low, high).unwrap();
    DMatrix::from_fn(rows, cols, |_, _| dist.sample(rng))
}

pub fn uniform_vector(rng: &mut ChaCha8Rng, len: usize, low: f64, high: f64) -> DVector<f64> {
    let dist = Uniform::new(low, high).unwrap();
    DVector::from_fn(len, |_, _| dist.sample(rng))
}

pub fn random_basis(rng: &mut ChaCha8Rng, full_dim: usize, n: usize) -> Basis {
    let q = uniform_matrix(rng, full_dim, n, -1.0, 1.0).qr().q();
    Basis::from_orthonormal(q).unwrap()
}

pub fn system(state_dim: usize, degree: usize, input_dim: usize, seed: u64) -> PolynomialSystem {
    random_polynomial_system(&RandomSystemSpec {
        state_dim,
        input_dim,
        degree,
        seed,
        ..Default::default()
    })
    .unwrap()
}
