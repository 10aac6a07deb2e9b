//! Shared runner for the burgers, chafee, reaction2d and custom benchmarks.

use nalgebra::{DMatrix, DVector};

use opinf_core::diagnostics::PairAccumulator;
use opinf_core::fom::{
    constant_input_trajectory, make_toy_linear, random_input_trajectory, random_polynomial_system,
    simulate, with_constant_channel, Burgers, BurgersConfig, ChafeeInfante, ChafeeInfanteConfig,
    FullOrderModel, InputTrajectory, RandomSystemSpec, ReactionDiffusion2d,
    ReactionDiffusionConfig,
};
use opinf_core::opinf::{learn_in_basis, training_basis, LearningConfig, TrainingSet};
use opinf_core::rom::{galerkin_project, interpolate, reduced_simulate, truncate, PolynomialModel};
use opinf_core::subspace::Basis;

use crate::config::{Benchmark, ExperimentConfig, TestInput};
use crate::error::{CliError, CliResult};
use crate::report::{CertificateRow, Method, MetricRow, Report, Split};

/// Seed offset of the inputs used only for the POD basis.
pub const BASIS_SEED_OFFSET: u64 = 1_000_000;
/// Seed offset of the test inputs.
pub const TEST_SEED_OFFSET: u64 = 2_000_000;

pub type BoxedModel = Box<dyn FullOrderModel>;

pub fn build_fom(config: &ExperimentConfig, mu: &[f64]) -> opinf_core::Result<BoxedModel> {
    let first = || {
        mu.first().copied().ok_or_else(|| {
            opinf_core::Error::InvalidArgument(format!(
                "{} needs a parameter value",
                config.benchmark.as_str()
            ))
        })
    };
    Ok(match config.benchmark {
        Benchmark::Burgers => Box::new(Burgers::new(
            BurgersConfig {
                grid_points: config.state_dim,
                dt: config.dt,
            },
            first()?,
        )?),
        Benchmark::Chafee => Box::new(ChafeeInfante::new(ChafeeInfanteConfig {
            grid_points: config.state_dim,
            dt: config.dt,
        })?),
        Benchmark::Reaction2d => Box::new(ReactionDiffusion2d::new(
            ReactionDiffusionConfig {
                points_per_dim: (config.state_dim as f64).sqrt().round() as usize,
                dt: config.dt,
                diffusivity: config.diffusivity,
                degree: config.reaction_degree,
            },
            first()?,
        )?),
        Benchmark::Custom => {
            let c = &config.custom;
            Box::new(random_polynomial_system(&RandomSystemSpec {
                state_dim: config.state_dim,
                input_dim: c.input_dim,
                degree: c.degree,
                linear_norm: c.linear_norm,
                nonlinear_norm: c.nonlinear_norm,
                density: c.density,
                seed: c.system_seed,
            })?)
        }
        Benchmark::Toy => Box::new(make_toy_linear(config.state_dim, config.toy.system_seed)?),
    })
}

/// Generates input trajectories in the layout the full model expects.
struct Inputs {
    raw_dim: usize,
    constant_channel: bool,
    low: f64,
    high: f64,
    steps: usize,
    dt: f64,
}

impl Inputs {
    fn new(config: &ExperimentConfig, fom: &dyn FullOrderModel) -> Self {
        let constant_channel = config.benchmark == Benchmark::Reaction2d;
        Self {
            raw_dim: fom.input_dim() - usize::from(constant_channel),
            constant_channel,
            low: config.input_range[0],
            high: config.input_range[1],
            steps: config.steps,
            dt: config.dt,
        }
    }

    fn finish(&self, t: InputTrajectory) -> DMatrix<f64> {
        if self.constant_channel {
            with_constant_channel(t).inputs
        } else {
            t.inputs
        }
    }

    fn random(&self, seed: u64) -> CliResult<DMatrix<f64>> {
        let t = random_input_trajectory(self.steps, self.raw_dim, self.low, self.high, seed)?;
        Ok(self.finish(t))
    }

    fn test(&self, kind: &TestInput, seed: u64) -> CliResult<DMatrix<f64>> {
        match kind {
            TestInput::Constant(c) => {
                Ok(self.finish(constant_input_trajectory(self.steps, self.raw_dim, *c)))
            }
            TestInput::Random => self.random(seed),
            TestInput::Sine => Ok(self.finish(InputTrajectory {
                inputs: DMatrix::from_fn(self.raw_dim, self.steps, |_, k| {
                    ChafeeInfante::test_input(k as f64 * self.dt)
                }),
                seed: None,
            })),
        }
    }
}

/// Training data for every training parameter, seeded deterministically.
pub fn training_sets(config: &ExperimentConfig) -> CliResult<Vec<TrainingSet>> {
    let params: Vec<Vec<f64>> = if config.benchmark.parameter_domain().is_some() {
        config
            .training_parameters()
            .into_iter()
            .map(|m| vec![m])
            .collect()
    } else {
        vec![Vec::new()]
    };
    let probe = build_fom(config, params[0].as_slice())?;
    let gen = Inputs::new(config, probe.as_ref());
    let m = config.inputs_per_parameter as u64;
    let mut sets = Vec::with_capacity(params.len());
    for (j, parameter) in params.into_iter().enumerate() {
        let j = j as u64;
        let learning_inputs = (0..m)
            .map(|l| gen.random(config.seed.wrapping_add(j * m + l)))
            .collect::<CliResult<Vec<_>>>()?;
        let basis_inputs = match config.basis_inputs_per_parameter {
            None => learning_inputs.clone(),
            Some(c) => {
                let c = c as u64;
                (0..c)
                    .map(|l| {
                        gen.random(
                            config
                                .seed
                                .wrapping_add(BASIS_SEED_OFFSET)
                                .wrapping_add(j * c + l),
                        )
                    })
                    .collect::<CliResult<Vec<_>>>()?
            }
        };
        sets.push(TrainingSet {
            parameter,
            initial_state: DVector::zeros(config.state_dim),
            basis_inputs,
            learning_inputs,
        });
    }
    Ok(sets)
}

/// Models of every method at one re-projection dimension.
struct Learned {
    nbar: usize,
    /// `[parameter][method]`.
    models: Vec<[Option<PolynomialModel>; 3]>,
    residuals: Vec<[Option<f64>; 3]>,
}

fn mu_of(parameter: &[f64]) -> Option<f64> {
    parameter.first().copied()
}

fn learn_all(
    config: &ExperimentConfig,
    sets: &[TrainingSet],
    basis: &Basis,
    report: &mut Report,
) -> CliResult<Vec<Learned>> {
    let factory = |mu: &[f64]| build_fom(config, mu);
    let mut all = Vec::with_capacity(config.nbar.len());
    for &nbar in &config.nbar {
        let basis = basis.leading(nbar)?;
        let learning = LearningConfig {
            nbar,
            horizon: config.horizon,
            learn_plain: true,
        };
        let outcomes = learn_in_basis(&factory, sets, &basis, &learning)?;
        let mut models = Vec::with_capacity(sets.len());
        let mut residuals = Vec::with_capacity(sets.len());
        for (set, outcome) in sets.iter().zip(outcomes) {
            let label = format!("nbar {nbar}, parameter {:?}", set.parameter);
            let mut slot: [Option<PolynomialModel>; 3] = [None, None, None];
            let mut res = [None; 3];
            match factory(&set.parameter).and_then(|fom| galerkin_project(&fom, &basis)) {
                Ok(m) => slot[0] = Some(m),
                Err(e) => report.failures.push(format!("intrusive, {label}: {e}")),
            }
            if outcome.diverged_samples > 0 {
                report.failures.push(format!(
                    "re-projection, {label}: {} trajectories diverged",
                    outcome.diverged_samples
                ));
            }
            match outcome.reprojected {
                Ok(inf) => {
                    report.certificates.push(CertificateRow {
                        nbar,
                        mu: mu_of(&set.parameter),
                        certificate: inf.certificate.clone(),
                    });
                    res[1] = Some(inf.residual);
                    slot[1] = Some(inf.model);
                }
                Err(e) => report.failures.push(format!("opinf-reproj, {label}: {e}")),
            }
            match outcome.plain {
                Some(Ok(inf)) => {
                    res[2] = Some(inf.residual);
                    slot[2] = Some(inf.model);
                }
                Some(Err(e)) => report.failures.push(format!("opinf-plain, {label}: {e}")),
                None => {}
            }
            models.push(slot);
            residuals.push(res);
        }
        all.push(Learned {
            nbar,
            models,
            residuals,
        });
    }
    Ok(all)
}

/// Certificates of the re-projected data only.
pub fn certify_benchmark(config: &ExperimentConfig) -> CliResult<Report> {
    let mut report = Report::new(config.benchmark);
    let sets = training_sets(config)?;
    let factory = |mu: &[f64]| build_fom(config, mu);
    let max = *config.nbar.iter().max().expect("validated nonempty");
    let basis = training_basis(&factory, &sets, max)?;
    for &nbar in &config.nbar {
        let basis = basis.leading(nbar)?;
        let learning = LearningConfig {
            nbar,
            horizon: config.horizon,
            learn_plain: false,
        };
        for (set, outcome) in sets
            .iter()
            .zip(learn_in_basis(&factory, &sets, &basis, &learning)?)
        {
            match outcome.reprojected {
                Ok(inf) => report.certificates.push(CertificateRow {
                    nbar,
                    mu: mu_of(&set.parameter),
                    certificate: inf.certificate,
                }),
                Err(e) => report
                    .failures
                    .push(format!("nbar {nbar}, parameter {:?}: {e}", set.parameter)),
            }
        }
    }
    Ok(report)
}

/// Models evaluated at one (nbar, n).
struct Target {
    nbar: usize,
    n: usize,
    models: [Option<PolynomialModel>; 3],
    residuals: [Option<f64>; 3],
}

#[derive(Default, Clone, Copy)]
struct MethodEval {
    error: PairAccumulator,
    diff: PairAccumulator,
    diverged: usize,
}

fn truncated_targets(
    config: &ExperimentConfig,
    nbar: usize,
    models: &[Option<PolynomialModel>; 3],
    residuals: [Option<f64>; 3],
) -> CliResult<Vec<Target>> {
    config
        .dims_for(nbar)
        .into_iter()
        .map(|n| {
            let mut out: [Option<PolynomialModel>; 3] = [None, None, None];
            for (slot, model) in out.iter_mut().zip(models) {
                if let Some(m) = model {
                    *slot = Some(truncate(m, n)?);
                }
            }
            Ok(Target {
                nbar,
                n,
                models: out,
                residuals,
            })
        })
        .collect()
}

/// Simulates the full model for every input and accumulates, per target and
/// method, the state error `||V_n z - x||` and the difference to the
/// intrusive reduced trajectory. All target bases are leading columns of
/// `basis`.
fn evaluate_case(
    fom: &dyn FullOrderModel,
    x0: &DVector<f64>,
    inputs: &[DMatrix<f64>],
    basis: &Basis,
    targets: &[Target],
) -> CliResult<Vec<[MethodEval; 3]>> {
    let v = basis.matrix();
    let mut evals = vec![[MethodEval::default(); 3]; targets.len()];
    for input in inputs {
        let steps = input.ncols();
        let traj = simulate(fom, x0, input, steps)?;
        if traj.diverged() {
            return Err(CliError::Numerical(format!(
                "full-order trajectory diverged at step {:?}",
                traj.diverged_at
            )));
        }
        let x = &traj.states;
        let p = v.tr_mul(x);
        let outside_sq = (x - v * &p).norm_squared();
        let row_sq: Vec<f64> = p.row_iter().map(|r| r.norm_squared()).collect();
        let x_sq = x.norm_squared();
        for (target, eval) in targets.iter().zip(evals.iter_mut()) {
            let n = target.n;
            let p_n = p.rows(0, n);
            let perp_sq = outside_sq + row_sq[n..].iter().sum::<f64>();
            let z0: DVector<f64> = p_n.column(0).into_owned();
            let mut sims = Vec::with_capacity(3);
            for model in &target.models {
                sims.push(match model {
                    Some(m) => Some(reduced_simulate(m, &z0, input, steps)?),
                    None => None,
                });
            }
            for (m, sim) in sims.iter().enumerate() {
                let Some(z) = sim else { continue };
                let e = &mut eval[m];
                if z.diverged() {
                    e.diverged += 1;
                    e.error.mark_diverged();
                    e.diff.mark_diverged();
                    continue;
                }
                e.error
                    .add_squares(perp_sq + (&z.states - p_n).norm_squared(), x_sq);
                match &sims[0] {
                    Some(zi) if !zi.diverged() => e.diff.add(&z.states, &zi.states)?,
                    _ => e.diff.mark_diverged(),
                }
            }
        }
    }
    Ok(evals)
}

fn push_rows(
    report: &mut Report,
    targets: &[Target],
    evals: &[[MethodEval; 3]],
    mu: Option<f64>,
    split: Split,
) -> CliResult<()> {
    for (target, eval) in targets.iter().zip(evals) {
        for (m, method) in Method::ALL.into_iter().enumerate() {
            let available = target.models[m].is_some();
            let e = &eval[m];
            let traj_diff = match method {
                Method::Intrusive => None,
                _ if available => e.diff.relative()?,
                _ => None,
            };
            report.metrics.push(MetricRow {
                nbar: target.nbar,
                n: target.n,
                mu,
                method,
                split,
                avg_rel_error: if available { e.error.relative()? } else { None },
                traj_diff,
                diverged: e.diverged,
                residual: target.residuals[m],
            });
        }
    }
    Ok(())
}

const METHOD_DIRS: [&str; 3] = ["intrusive", "opinf-reproj", "opinf-plain"];

/// Learns, evaluates and reports one benchmark.
pub fn run_benchmark(config: &ExperimentConfig) -> CliResult<Report> {
    let mut report = Report::new(config.benchmark);
    let sets = training_sets(config)?;
    let factory = |mu: &[f64]| build_fom(config, mu);
    let max = *config.nbar.iter().max().expect("validated nonempty");
    let basis = training_basis(&factory, &sets, max)?;
    let learned = learn_all(config, &sets, &basis, &mut report)?;

    if config.write_models {
        for l in &learned {
            for (j, slot) in l.models.iter().enumerate() {
                for (m, model) in slot.iter().enumerate() {
                    if let Some(model) = model {
                        report.models.push((
                            format!("models/nbar{}/{}/param{j}", l.nbar, METHOD_DIRS[m]),
                            model.clone(),
                        ));
                    }
                }
            }
        }
    }

    // Training split: the full-length trajectories the basis was built from.
    for (j, set) in sets.iter().enumerate() {
        let fom = factory(&set.parameter)?;
        let mut targets = Vec::new();
        for l in &learned {
            targets.extend(truncated_targets(
                config,
                l.nbar,
                &l.models[j],
                l.residuals[j],
            )?);
        }
        let evals = evaluate_case(
            fom.as_ref(),
            &set.initial_state,
            &set.basis_inputs,
            &basis,
            &targets,
        )?;
        push_rows(
            &mut report,
            &targets,
            &evals,
            mu_of(&set.parameter),
            Split::Train,
        )?;
    }

    // Test split: interpolated models for parametric benchmarks, the learned
    // models themselves otherwise.
    let gen = Inputs::new(config, factory(&sets[0].parameter)?.as_ref());
    let parametric = config.benchmark.parameter_domain().is_some();
    let test_params: Vec<Vec<f64>> = if parametric {
        config
            .test_parameter_values()
            .into_iter()
            .map(|m| vec![m])
            .collect()
    } else {
        vec![Vec::new()]
    };
    let train_params: Vec<f64> = sets.iter().filter_map(|s| mu_of(&s.parameter)).collect();
    for (i, parameter) in test_params.iter().enumerate() {
        let input = gen.test(
            &config.test_input,
            config
                .seed
                .wrapping_add(TEST_SEED_OFFSET)
                .wrapping_add(i as u64),
        )?;
        let mut targets = Vec::new();
        for l in &learned {
            let mut models: [Option<PolynomialModel>; 3] = [None, None, None];
            for (m, slot) in models.iter_mut().enumerate() {
                let column: Option<Vec<PolynomialModel>> =
                    l.models.iter().map(|s| s[m].clone()).collect();
                let Some(column) = column else {
                    report.failures.push(format!(
                        "{} test model at nbar {}, parameter {parameter:?}: missing training model",
                        Method::ALL[m].as_str(),
                        l.nbar
                    ));
                    continue;
                };
                *slot = if parametric {
                    match interpolate(&train_params, &column, parameter[0]) {
                        Ok(model) => Some(model),
                        Err(e) => {
                            report.failures.push(format!(
                                "{} interpolation at {parameter:?}: {e}",
                                Method::ALL[m].as_str()
                            ));
                            None
                        }
                    }
                } else {
                    column.into_iter().next()
                };
            }
            targets.extend(truncated_targets(config, l.nbar, &models, [None; 3])?);
        }
        let fom = factory(parameter)?;
        let x0 = DVector::zeros(config.state_dim);
        let evals = evaluate_case(fom.as_ref(), &x0, &[input], &basis, &targets)?;
        push_rows(&mut report, &targets, &evals, mu_of(parameter), Split::Test)?;
    }
    Ok(report)
}
