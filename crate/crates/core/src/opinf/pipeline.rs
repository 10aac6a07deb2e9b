use nalgebra::{DMatrix, DVector};

use super::{project_trajectory, reproject_sample, Inference, LeastSquaresAccumulator};
use crate::error::{Error, Result};
use crate::fom::{simulate, FullOrderModel};
use crate::rom::Provenance;
use crate::subspace::{Basis, PodAccumulator};

/// Data generated for one training parameter.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub parameter: Vec<f64>,
    pub initial_state: DVector<f64>,
    /// Input trajectories whose full-model states form the POD snapshots.
    pub basis_inputs: Vec<DMatrix<f64>>,
    /// Input trajectories used for re-projection and plain sampling.
    pub learning_inputs: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct LearningConfig {
    /// Dimension of the reduced space used for re-projection.
    pub nbar: usize,
    /// Number of re-projection steps per input trajectory (`None`: all).
    pub horizon: Option<usize>,
    /// Also learn models from projected trajectories without re-projection.
    pub learn_plain: bool,
}

/// Models learned for one training parameter. Failures are kept per parameter.
#[derive(Debug)]
pub struct ParameterOutcome {
    pub parameter: Vec<f64>,
    pub reprojected: Result<Inference>,
    pub plain: Option<Result<Inference>>,
    /// Number of re-projected trajectories that diverged during sampling.
    pub diverged_samples: usize,
}

#[derive(Debug)]
pub struct LearningOutcome {
    pub basis: Basis,
    pub outcomes: Vec<ParameterOutcome>,
}

/// Simulates every training trajectory, builds a POD basis of dimension
/// `nbar` from the snapshots, then learns one model per parameter from
/// concatenated re-projected trajectories (and optionally from projected ones).
pub fn learn_with_reprojection<F, M>(
    factory: F,
    sets: &[TrainingSet],
    config: &LearningConfig,
) -> Result<LearningOutcome>
where
    F: Fn(&[f64]) -> Result<M>,
    M: FullOrderModel,
{
    let basis = training_basis(&factory, sets, config.nbar)?;
    let outcomes = learn_in_basis(&factory, sets, &basis, config)?;
    Ok(LearningOutcome { basis, outcomes })
}

/// POD basis of dimension `n` from the full-model states of every
/// `basis_inputs` trajectory. A diverging full model is an error.
pub fn training_basis<F, M>(factory: &F, sets: &[TrainingSet], n: usize) -> Result<Basis>
where
    F: Fn(&[f64]) -> Result<M>,
    M: FullOrderModel,
{
    if sets.is_empty() {
        return Err(Error::Empty("training parameters"));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("nbar must be positive".into()));
    }
    let mut pod: Option<PodAccumulator> = None;
    for set in sets {
        let fom = factory(&set.parameter)?;
        let acc = pod.get_or_insert_with(|| PodAccumulator::new(fom.state_dim()));
        for inputs in &set.basis_inputs {
            let traj = simulate(&fom, &set.initial_state, inputs, inputs.ncols())?;
            if traj.diverged() {
                return Err(Error::InvalidArgument(format!(
                    "full-order trajectory diverged for parameter {:?}",
                    set.parameter
                )));
            }
            acc.push(&traj.states)?;
        }
    }
    pod.ok_or(Error::Empty("snapshots"))?.finish(n)
}

/// Learns one model per parameter in a given basis. `config.nbar` must equal
/// the basis dimension.
pub fn learn_in_basis<F, M>(
    factory: &F,
    sets: &[TrainingSet],
    basis: &Basis,
    config: &LearningConfig,
) -> Result<Vec<ParameterOutcome>>
where
    F: Fn(&[f64]) -> Result<M>,
    M: FullOrderModel,
{
    if config.nbar != basis.reduced_dim() {
        return Err(Error::DimensionMismatch {
            context: "learn_in_basis: nbar",
            expected: basis.reduced_dim(),
            found: config.nbar,
        });
    }
    Ok(sets
        .iter()
        .map(|set| learn_one(factory, set, basis, config))
        .collect())
}

fn learn_one<F, M>(
    factory: &F,
    set: &TrainingSet,
    basis: &Basis,
    config: &LearningConfig,
) -> ParameterOutcome
where
    F: Fn(&[f64]) -> Result<M>,
    M: FullOrderModel,
{
    let mut diverged_samples = 0;
    let mut run = || -> Result<(Inference, Option<Result<Inference>>)> {
        let fom = factory(&set.parameter)?;
        let n = basis.reduced_dim();
        let (degree, p) = (fom.degree(), fom.input_dim());
        let mut reproj = LeastSquaresAccumulator::new(n, degree, p)?;
        let mut plain = if config.learn_plain {
            Some(LeastSquaresAccumulator::new(n, degree, p)?)
        } else {
            None
        };
        for inputs in &set.learning_inputs {
            let steps = config.horizon.unwrap_or(usize::MAX).min(inputs.ncols());
            let window = inputs.columns(0, steps).into_owned();
            let sample = reproject_sample(&fom, basis, &set.initial_state, &window)?;
            if sample.diverged_at.is_some() {
                diverged_samples += 1;
            }
            reproj.push_snapshots(&sample.snapshots)?;
            if let Some(acc) = plain.as_mut() {
                let traj = simulate(&fom, &set.initial_state, &window, steps)?;
                acc.push_snapshots(&project_trajectory(basis, &traj, &window)?)?;
            }
        }
        let learned = reproj.solve(Provenance::InferredReprojected)?;
        let plain = plain.map(|acc| {
            acc.solve(Provenance::InferredPlain)
                .map(|inf| with_parameter(inf, &set.parameter))
        });
        Ok((with_parameter(learned, &set.parameter), plain))
    };
    match run() {
        Ok((reprojected, plain)) => ParameterOutcome {
            parameter: set.parameter.clone(),
            reprojected: Ok(reprojected),
            plain,
            diverged_samples,
        },
        Err(e) => ParameterOutcome {
            parameter: set.parameter.clone(),
            reprojected: Err(e),
            plain: None,
            diverged_samples,
        },
    }
}

fn with_parameter(mut inference: Inference, parameter: &[f64]) -> Inference {
    inference.model = inference.model.with_parameter(parameter.to_vec());
    inference
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::{random_input_trajectory, PolynomialSystem};
    use crate::rom::{galerkin_project, reduced_simulate};

    /// Linear-quadratic system whose first three coordinates evolve on their
    /// own, so span(e_0, e_1, e_2) is invariant from x0 = 0.
    fn invariant_system(parameter: &[f64]) -> Result<PolynomialSystem> {
        let n = 6;
        let scale = parameter.first().copied().unwrap_or(1.0);
        let mut a1 = DMatrix::zeros(n, n);
        for i in 0..n {
            a1[(i, i)] = 0.5;
        }
        a1[(0, 1)] = 0.2 * scale;
        a1[(1, 2)] = -0.1;
        a1[(2, 0)] = 0.05;
        let cols = crate::polytensor::compressed_dim(n, 2)?;
        let mut a2 = DMatrix::zeros(n, cols);
        a2[(0, 1)] = 0.1;
        a2[(2, 0)] = -0.05;
        a2[(5, 3)] = 0.2;
        let mut b = DMatrix::zeros(n, 1);
        b[(0, 0)] = 1.0;
        b[(2, 0)] = 0.5;
        PolynomialSystem::new(vec![a1, a2], b, parameter.to_vec())
    }

    fn training_set(parameter: f64, seeds: &[u64]) -> TrainingSet {
        let inputs: Vec<_> = seeds
            .iter()
            .map(|&s| random_input_trajectory(40, 1, 0.0, 0.5, s).unwrap().inputs)
            .collect();
        TrainingSet {
            parameter: vec![parameter],
            initial_state: DVector::zeros(6),
            basis_inputs: inputs.clone(),
            learning_inputs: inputs,
        }
    }

    #[test]
    fn invariant_subspace_is_learned_exactly() {
        let sets = vec![training_set(1.0, &[1, 2, 3])];
        let config = LearningConfig {
            nbar: 3,
            horizon: None,
            learn_plain: true,
        };
        let out = learn_with_reprojection(invariant_system, &sets, &config).unwrap();
        let learned = out.outcomes[0].reprojected.as_ref().unwrap();
        assert!(learned.certificate.satisfied);
        let fom = invariant_system(&[1.0]).unwrap();
        let x0 = DVector::zeros(6);
        for inputs in &sets[0].learning_inputs {
            let full = simulate(&fom, &x0, inputs, 40).unwrap();
            let z = reduced_simulate(&learned.model, &DVector::zeros(3), inputs, 40).unwrap();
            let lifted = out.basis.matrix() * &z.states;
            let err = (&lifted - &full.states).norm() / full.states.norm();
            assert!(err < 1e-10, "{err}");
        }
        let intrusive = galerkin_project(&fom, &out.basis).unwrap();
        let gap = (learned.model.stacked() - intrusive.stacked()).norm();
        assert!(gap < 1e-8 * intrusive.stacked().norm());
    }

    #[test]
    fn fixed_seeds_are_deterministic() {
        let sets = vec![training_set(0.5, &[4, 5]), training_set(1.5, &[6, 7])];
        let config = LearningConfig {
            nbar: 3,
            horizon: Some(30),
            learn_plain: false,
        };
        let a = learn_with_reprojection(invariant_system, &sets, &config).unwrap();
        let b = learn_with_reprojection(invariant_system, &sets, &config).unwrap();
        assert_eq!(a.basis, b.basis);
        for (x, y) in a.outcomes.iter().zip(b.outcomes.iter()) {
            let (x, y) = (
                x.reprojected.as_ref().unwrap(),
                y.reprojected.as_ref().unwrap(),
            );
            assert_eq!(x.model, y.model);
            assert_eq!(x.certificate, y.certificate);
        }
    }

    #[test]
    fn failures_are_isolated_per_parameter() {
        let sets = vec![training_set(1.0, &[1, 2]), training_set(2.0, &[3])];
        let factory = |mu: &[f64]| -> Result<PolynomialSystem> { invariant_system(mu) };
        let config = LearningConfig {
            nbar: 3,
            horizon: None,
            learn_plain: false,
        };
        let mut bad = sets.clone();
        bad[1].learning_inputs.clear();
        let out = learn_with_reprojection(factory, &bad, &config).unwrap();
        assert!(out.outcomes[0].reprojected.is_ok());
        assert!(out.outcomes[1].reprojected.is_err());
    }
}
