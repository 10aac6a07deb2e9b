//! Linear toy system: closure error, trajectory norms, conditioning and the
//! difference between learned and intrusive models.

use nalgebra::{DMatrix, DVector};

use opinf_core::diagnostics::closure_error_per_step;
use opinf_core::fom::{format_float, make_toy_linear, simulate, PolynomialSystem, Trajectory};
use opinf_core::opinf::{
    assemble_data_matrix, certify, infer_from_snapshots, project_trajectory, reproject_sample,
    DataSource, Inference,
};
use opinf_core::rom::{galerkin_project, reduced_simulate, PolynomialModel};
use opinf_core::subspace::Basis;

use crate::config::{Benchmark, ExperimentConfig};
use crate::error::CliResult;
use crate::report::{opt_float, CertificateRow, Method, MetricRow, Report, Split, Table};

/// Intrusive, re-projected and plain models at one reduced dimension, with
/// their reduced trajectories.
struct ToyModels {
    basis: Basis,
    intrusive: PolynomialModel,
    reproj: Inference,
    plain: Inference,
    trajectories: [Trajectory; 3],
}

fn toy_models(
    fom: &PolynomialSystem,
    full: &Trajectory,
    x0: &DVector<f64>,
    inputs: &DMatrix<f64>,
    n: usize,
) -> CliResult<ToyModels> {
    let steps = inputs.ncols();
    let basis = Basis::canonical(fom.operator(1).nrows(), n)?;
    let intrusive = galerkin_project(fom, &basis)?;
    let sample = reproject_sample(fom, &basis, x0, inputs)?;
    let reproj = infer_from_snapshots(&sample.snapshots, 1, DataSource::Reprojected)?;
    let plain = infer_from_snapshots(
        &project_trajectory(&basis, full, inputs)?,
        1,
        DataSource::Projected,
    )?;
    let z0 = basis.matrix().tr_mul(x0);
    let trajectories = [
        reduced_simulate(&intrusive, &z0, inputs, steps)?,
        reduced_simulate(&reproj.model, &z0, inputs, steps)?,
        reduced_simulate(&plain.model, &z0, inputs, steps)?,
    ];
    Ok(ToyModels {
        basis,
        intrusive,
        reproj,
        plain,
        trajectories,
    })
}

fn relative(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<f64> {
    let d = (a - b).norm() / b.norm();
    d.is_finite().then_some(d)
}

fn column_norm(t: &Trajectory, k: usize) -> Option<f64> {
    (k < t.len()).then(|| t.states.column(k).norm())
}

pub fn run_toy(config: &ExperimentConfig) -> CliResult<Report> {
    let mut report = Report::new(Benchmark::Toy);
    let n_full = config.state_dim;
    let steps = config.steps;
    let fom = make_toy_linear(n_full, config.toy.system_seed)?;
    let mut x0 = DVector::zeros(n_full);
    x0[0] = 1.0;
    let inputs = DMatrix::zeros(0, steps);
    let full = simulate(&fom, &x0, &inputs, steps)?;

    let r = config.toy.reference_dim;
    let reference = toy_models(&fom, &full, &x0, &inputs, r)?;
    let projected = reference.basis.matrix().tr_mul(&full.states);
    let [intr, reproj, plain] = &reference.trajectories;
    let mut closure = Table {
        file_name: "toy_closure.csv".into(),
        header: "k,closure_error".into(),
        rows: Vec::new(),
    };
    if !intr.diverged() {
        for (k, e) in closure_error_per_step(&projected, &intr.states)?
            .into_iter()
            .enumerate()
        {
            closure.rows.push(format!("{k},{}", format_float(e)));
        }
    }
    let mut norms = Table {
        file_name: "toy_norms.csv".into(),
        header: "k,projected,intrusive,opinf_reproj,opinf_plain".into(),
        rows: Vec::new(),
    };
    for k in 0..=steps {
        norms.rows.push(format!(
            "{k},{},{},{},{}",
            format_float(projected.column(k).norm()),
            opt_float(column_norm(intr, k)),
            opt_float(column_norm(reproj, k)),
            opt_float(column_norm(plain, k)),
        ));
    }
    report.tables.push(closure);
    report.tables.push(norms);

    for &n in &config.toy.dims {
        let models = toy_models(&fom, &full, &x0, &inputs, n)?;
        let v = models.basis.matrix();
        let zi = &models.trajectories[0];
        let residuals = [
            None,
            Some(models.reproj.residual),
            Some(models.plain.residual),
        ];
        for (m, method) in Method::ALL.into_iter().enumerate() {
            let z = &models.trajectories[m];
            let ok = !z.diverged();
            report.metrics.push(MetricRow {
                nbar: n,
                n,
                mu: None,
                method,
                split: Split::Train,
                avg_rel_error: if ok {
                    relative(&(v * &z.states), &full.states)
                } else {
                    None
                },
                traj_diff: match method {
                    Method::Intrusive => None,
                    _ if ok && !zi.diverged() => relative(&z.states, &zi.states),
                    _ => None,
                },
                diverged: usize::from(!ok),
                residual: residuals[m],
            });
        }
        report.certificates.push(CertificateRow {
            nbar: n,
            mu: None,
            certificate: models.reproj.certificate.clone(),
        });
        if config.write_models {
            for (name, model) in [
                ("intrusive", &models.intrusive),
                ("opinf-reproj", &models.reproj.model),
                ("opinf-plain", &models.plain.model),
            ] {
                report
                    .models
                    .push((format!("models/n{n}/{name}"), model.clone()));
            }
        }
    }

    let mut conditioning = Table {
        file_name: "toy_condition.csv".into(),
        header: "n,K,cond,rank,satisfied".into(),
        rows: Vec::new(),
    };
    for &n in &config.toy.dims {
        let basis = Basis::canonical(n_full, n)?;
        for &k in &config.toy.condition_steps {
            let sample = reproject_sample(&fom, &basis, &x0, &DMatrix::zeros(0, k))?;
            let s = &sample.snapshots;
            let d = assemble_data_matrix(&s.states, &s.inputs, 1, DataSource::Reprojected)?;
            let c = certify(&d)?;
            conditioning.rows.push(format!(
                "{n},{k},{},{},{}",
                format_float(c.condition_number),
                c.rank,
                c.satisfied
            ));
        }
    }
    report.tables.push(conditioning);
    Ok(report)
}

/// Certificates of the re-projected toy data at `steps` for every dimension.
pub fn certify_toy(config: &ExperimentConfig) -> CliResult<Report> {
    let mut report = Report::new(Benchmark::Toy);
    let fom = make_toy_linear(config.state_dim, config.toy.system_seed)?;
    let mut x0 = DVector::zeros(config.state_dim);
    x0[0] = 1.0;
    for &n in &config.toy.dims {
        let basis = Basis::canonical(config.state_dim, n)?;
        let sample = reproject_sample(&fom, &basis, &x0, &DMatrix::zeros(0, config.steps))?;
        let s = &sample.snapshots;
        let d = assemble_data_matrix(&s.states, &s.inputs, 1, DataSource::Reprojected)?;
        report.certificates.push(CertificateRow {
            nbar: n,
            mu: None,
            certificate: certify(&d)?,
        });
    }
    Ok(report)
}
