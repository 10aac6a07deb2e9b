use nalgebra::{DMatrix, DVector};

use super::Snapshots;
use crate::error::{check_dim, Error, Result};
use crate::fom::{FullOrderModel, Trajectory};
use crate::subspace::Basis;

/// Relative tolerance for the initial state to lie in the reduced space.
pub const SPAN_TOL: f64 = 1e-10;

/// Re-projected trajectory. When sampling diverged, `snapshots` holds the
/// finite transitions before the first non-finite state.
#[derive(Debug, Clone)]
pub struct Reprojected {
    pub snapshots: Snapshots,
    pub diverged_at: Option<usize>,
}

/// Samples `xbar_{k+1} = V^T f(V xbar_k, u_k)` from `xbar_0 = V^T x0` for
/// every column of `inputs`.
pub fn reproject_sample<M: FullOrderModel + ?Sized>(
    fom: &M,
    basis: &Basis,
    x0: &DVector<f64>,
    inputs: &DMatrix<f64>,
) -> Result<Reprojected> {
    check_dim(
        "reproject_sample: basis rows",
        fom.state_dim(),
        basis.full_dim(),
    )?;
    check_dim("reproject_sample: initial state", fom.state_dim(), x0.len())?;
    check_dim(
        "reproject_sample: input rows",
        fom.input_dim(),
        inputs.nrows(),
    )?;
    let v = basis.matrix();
    let n = basis.reduced_dim();
    let mut xbar = v.tr_mul(x0);
    let residual = (x0 - v * &xbar).norm();
    if residual > SPAN_TOL * x0.norm() {
        return Err(Error::NotInSubspace { residual });
    }
    let k = inputs.ncols();
    let mut states = DMatrix::zeros(n, k);
    let mut outputs = DMatrix::zeros(n, k);
    let mut diverged_at = None;
    let mut done = 0;
    for step in 0..k {
        let u = inputs.column(step).into_owned();
        let next = v.tr_mul(&fom.apply(&(v * &xbar), &u));
        if !next.iter().all(|x| x.is_finite()) {
            diverged_at = Some(step + 1);
            break;
        }
        states.set_column(step, &xbar);
        outputs.set_column(step, &next);
        xbar = next;
        done += 1;
    }
    let snapshots = Snapshots::new(
        states.columns(0, done).into_owned(),
        outputs.columns(0, done).into_owned(),
        inputs.columns(0, done).into_owned(),
    )?;
    Ok(Reprojected {
        snapshots,
        diverged_at,
    })
}

/// Projects the transitions of a full trajectory: `V^T x_k -> V^T x_{k+1}`.
/// Only the finite part of a diverged trajectory is used.
pub fn project_trajectory(
    basis: &Basis,
    trajectory: &Trajectory,
    inputs: &DMatrix<f64>,
) -> Result<Snapshots> {
    check_dim(
        "project_trajectory",
        basis.full_dim(),
        trajectory.state_dim(),
    )?;
    let k = trajectory.len().saturating_sub(1);
    if inputs.ncols() < k {
        return Err(Error::DimensionMismatch {
            context: "project_trajectory: input columns",
            expected: k,
            found: inputs.ncols(),
        });
    }
    let reduced = basis.matrix().tr_mul(&trajectory.states);
    let states = reduced.columns(0, k).into_owned();
    let outputs = reduced.columns(1.min(reduced.ncols()), k).into_owned();
    Snapshots::new(states, outputs, inputs.columns(0, k).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::{
        random_input_trajectory, random_polynomial_system, simulate, RandomSystemSpec,
    };
    use crate::rom::{galerkin_project, reduced_simulate};

    fn system(n: usize, degree: usize, seed: u64) -> crate::fom::PolynomialSystem {
        random_polynomial_system(&RandomSystemSpec {
            state_dim: n,
            input_dim: 1,
            degree,
            seed,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn full_basis_reproduces_full_trajectory() {
        let fom = system(6, 2, 1);
        let basis = Basis::canonical(6, 6).unwrap();
        let x0 = DVector::from_fn(6, |i, _| 0.1 * i as f64);
        let u = random_input_trajectory(20, 1, 0.0, 1.0, 2).unwrap().inputs;
        let sample = reproject_sample(&fom, &basis, &x0, &u).unwrap();
        let traj = simulate(&fom, &x0, &u, 20).unwrap();
        assert_eq!(sample.snapshots.states, traj.inputs_side());
        assert_eq!(sample.snapshots.outputs, traj.outputs_side());
    }

    #[test]
    fn matches_intrusive_reduced_trajectory() {
        let fom = system(10, 3, 4);
        let q = DMatrix::from_fn(10, 3, |r, c| (((r + 1) * (c + 2)) % 7) as f64 - 3.0);
        let basis = Basis::from_orthonormal(q.qr().q()).unwrap();
        let rom = galerkin_project(&fom, &basis).unwrap();
        let x0 = basis.matrix() * DVector::from_vec(vec![0.1, -0.2, 0.05]);
        let u = random_input_trajectory(50, 1, 0.0, 1.0, 3).unwrap().inputs;
        let sample = reproject_sample(&fom, &basis, &x0, &u).unwrap();
        let z = reduced_simulate(&rom, &basis.matrix().tr_mul(&x0), &u, 50).unwrap();
        let diff = (&sample.snapshots.states - z.inputs_side()).norm();
        assert!(diff <= 1e-11 * (1.0 + z.states.norm()), "{diff}");
    }

    #[test]
    fn single_query() {
        let fom = system(5, 2, 9);
        let basis = Basis::canonical(5, 2).unwrap();
        let x0 = DVector::from_vec(vec![0.3, -0.1, 0.0, 0.0, 0.0]);
        let u = DMatrix::from_element(1, 1, 0.5);
        let sample = reproject_sample(&fom, &basis, &x0, &u).unwrap();
        let expected = basis
            .matrix()
            .tr_mul(&fom.apply(&x0, &DVector::from_element(1, 0.5)));
        assert_eq!(sample.snapshots.outputs.column(0), expected.column(0));
    }

    #[test]
    fn rejects_initial_state_outside_span() {
        let fom = system(5, 2, 9);
        let basis = Basis::canonical(5, 2).unwrap();
        let x0 = DVector::from_element(5, 1.0);
        let u = DMatrix::zeros(1, 3);
        assert!(matches!(
            reproject_sample(&fom, &basis, &x0, &u),
            Err(Error::NotInSubspace { .. })
        ));
    }
}
