use nalgebra::DMatrix;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Inputs `u_0, ..., u_{K-1}` as the columns of a `p x K` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTrajectory {
    pub inputs: DMatrix<f64>,
    /// Seed the inputs were drawn with, if random.
    pub seed: Option<u64>,
}

impl InputTrajectory {
    pub fn steps(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.nrows()
    }
}

/// I.i.d. uniform inputs on `[low, high)` from a ChaCha8 stream seeded with
/// `seed`. Entries are drawn time step by time step, channel by channel.
pub fn random_input_trajectory(
    steps: usize,
    input_dim: usize,
    low: f64,
    high: f64,
    seed: u64,
) -> Result<InputTrajectory> {
    if !(low < high) || !low.is_finite() || !high.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "input range needs low < high, got [{low}, {high})"
        )));
    }
    let dist = Uniform::new(low, high).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = DMatrix::zeros(input_dim, steps);
    for k in 0..steps {
        for c in 0..input_dim {
            inputs[(c, k)] = dist.sample(&mut rng);
        }
    }
    Ok(InputTrajectory {
        inputs,
        seed: Some(seed),
    })
}

/// Inputs that are `value` in every channel and step.
pub fn constant_input_trajectory(steps: usize, input_dim: usize, value: f64) -> InputTrajectory {
    InputTrajectory {
        inputs: DMatrix::from_element(input_dim, steps, value),
        seed: None,
    }
}

/// Appends a row of ones to `inputs` (for models whose constant term is driven
/// through an input channel).
pub fn with_constant_channel(inputs: InputTrajectory) -> InputTrajectory {
    let (p, k) = inputs.inputs.shape();
    let mut out = DMatrix::from_element(p + 1, k, 1.0);
    out.rows_mut(0, p).copy_from(&inputs.inputs);
    InputTrajectory {
        inputs: out,
        seed: inputs.seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_stay_in_range_and_are_reproducible() {
        let a = random_input_trajectory(500, 2, 0.0, 10.0, 42).unwrap();
        assert!(a.inputs.iter().all(|&v| (0.0..10.0).contains(&v)));
        let b = random_input_trajectory(500, 2, 0.0, 10.0, 42).unwrap();
        assert_eq!(a, b);
        let c = random_input_trajectory(500, 2, 0.0, 10.0, 43).unwrap();
        assert_ne!(a.inputs, c.inputs);
        assert_eq!(a.seed, Some(42));
    }

    #[test]
    fn sample_mean_converges() {
        let a = random_input_trajectory(1_000_000, 1, 1.0, 3.0, 9).unwrap();
        let mean = a.inputs.mean();
        assert!((mean - 2.0).abs() < 0.01 * 2.0);
    }

    #[test]
    fn rejects_empty_range() {
        assert!(random_input_trajectory(3, 1, 1.0, 1.0, 0).is_err());
        assert!(random_input_trajectory(3, 1, 2.0, 1.0, 0).is_err());
    }

    #[test]
    fn constant_channel_is_appended() {
        let base = constant_input_trajectory(4, 1, 7.0);
        let aug = with_constant_channel(base);
        assert_eq!(aug.inputs.nrows(), 2);
        assert!(aug.inputs.row(0).iter().all(|&v| v == 7.0));
        assert!(aug.inputs.row(1).iter().all(|&v| v == 1.0));
    }
}
