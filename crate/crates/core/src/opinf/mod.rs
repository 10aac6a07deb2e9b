//! Operator inference: fitting reduced operators to trajectory data by least
//! squares, with re-projected sampling so the data are exactly Markovian.

mod pipeline;
mod reproject;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{numerical_rank, sorted_svd, SortedSvd, TriangularAccumulator};
use crate::polytensor::{fill_compressed_power, total_compressed_dim};
use crate::rom::{PolynomialModel, Provenance};

pub use pipeline::{
    learn_in_basis, learn_with_reprojection, training_basis, LearningConfig, LearningOutcome,
    ParameterOutcome, TrainingSet,
};
pub use reproject::{project_trajectory, reproject_sample, Reprojected, SPAN_TOL};

/// Singular values below `RANK_TOL * sigma_max` count as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Where the states of a data matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Projected,
    Reprojected,
}

impl DataSource {
    fn provenance(self) -> Provenance {
        match self {
            DataSource::Projected => Provenance::InferredPlain,
            DataSource::Reprojected => Provenance::InferredReprojected,
        }
    }
}

/// `D = [X; X^2; ...; X^l; U]` with one column per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    matrix: DMatrix<f64>,
    degree: usize,
    reduced_dim: usize,
    input_dim: usize,
    source: DataSource,
}

impl DataMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn reduced_dim(&self) -> usize {
        self.reduced_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn source(&self) -> DataSource {
        self.source
    }

    /// Number of columns `K`.
    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    /// Row count `p + sum_i n_i`.
    pub fn required(&self) -> usize {
        self.matrix.nrows()
    }
}

fn feature_count(n: usize, degree: usize, p: usize) -> Result<usize> {
    if degree == 0 {
        return Err(Error::InvalidArgument(
            "polynomial degree must be >= 1".into(),
        ));
    }
    total_compressed_dim(n, degree)?
        .checked_add(p)
        .ok_or(Error::Overflow("data matrix row count"))
}

/// Writes the data-matrix column `[x; x^2; ...; x^l; u]` into `out`.
fn fill_feature_row(state: &[f64], input: &[f64], degree: usize, out: &mut [f64]) {
    let mut offset = 0;
    let n = state.len();
    let mut width = 1usize;
    for i in 1..=degree {
        // compressed_dim(n, i) = compressed_dim(n, i - 1) * (n + i - 1) / i
        width = width * (n + i - 1) / i;
        fill_compressed_power(state, i, &mut out[offset..offset + width]);
        offset += width;
    }
    out[offset..offset + input.len()].copy_from_slice(input);
}

/// Stacks the compressed powers of `states` and the inputs.
pub fn assemble_data_matrix(
    states: &DMatrix<f64>,
    inputs: &DMatrix<f64>,
    degree: usize,
    source: DataSource,
) -> Result<DataMatrix> {
    check_dim(
        "assemble_data_matrix: columns",
        states.ncols(),
        inputs.ncols(),
    )?;
    if !states.iter().chain(inputs.iter()).all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument(
            "data matrix entries must be finite".into(),
        ));
    }
    let (n, k) = states.shape();
    let p = inputs.nrows();
    let rows = feature_count(n, degree, p)?;
    let mut matrix = DMatrix::zeros(rows, k);
    let mut buf = vec![0.0; rows];
    for j in 0..k {
        let x: Vec<f64> = states.column(j).iter().copied().collect();
        let u: Vec<f64> = inputs.column(j).iter().copied().collect();
        fill_feature_row(&x, &u, degree, &mut buf);
        matrix.column_mut(j).copy_from_slice(&buf);
    }
    Ok(DataMatrix {
        matrix,
        degree,
        reduced_dim: n,
        input_dim: p,
        source,
    })
}

/// Paired snapshots `x_k -> y_k` under inputs `u_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    pub states: DMatrix<f64>,
    pub outputs: DMatrix<f64>,
    pub inputs: DMatrix<f64>,
}

impl Snapshots {
    pub fn new(states: DMatrix<f64>, outputs: DMatrix<f64>, inputs: DMatrix<f64>) -> Result<Self> {
        check_dim("Snapshots: output rows", states.nrows(), outputs.nrows())?;
        check_dim("Snapshots: output columns", states.ncols(), outputs.ncols())?;
        check_dim("Snapshots: input columns", states.ncols(), inputs.ncols())?;
        Ok(Self {
            states,
            outputs,
            inputs,
        })
    }

    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.states.ncols() == 0
    }
}

/// Concatenates snapshot pieces column-wise in the given order. Each piece
/// keeps its own `x -> y` pairs, so no transition across pieces is created.
pub fn concat_trajectories(pieces: &[Snapshots]) -> Result<Snapshots> {
    let first = pieces.first().ok_or(Error::Empty("trajectory pieces"))?;
    let n = first.states.nrows();
    let p = first.inputs.nrows();
    for piece in pieces {
        check_dim("concat_trajectories: state rows", n, piece.states.nrows())?;
        check_dim("concat_trajectories: input rows", p, piece.inputs.nrows())?;
    }
    let k: usize = pieces.iter().map(Snapshots::len).sum();
    let mut states = DMatrix::zeros(n, k);
    let mut outputs = DMatrix::zeros(n, k);
    let mut inputs = DMatrix::zeros(p, k);
    let mut offset = 0;
    for piece in pieces {
        let len = piece.len();
        states.columns_mut(offset, len).copy_from(&piece.states);
        outputs.columns_mut(offset, len).copy_from(&piece.outputs);
        inputs.columns_mut(offset, len).copy_from(&piece.inputs);
        offset += len;
    }
    Snapshots::new(states, outputs, inputs)
}

/// Checkable conditions for exact recovery from re-projected data.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryCertificate {
    /// Number of data columns.
    pub k: usize,
    /// `p + sum_i n_i`.
    pub required: usize,
    pub rank: usize,
    /// `cond(D^T D) = (sigma_max / sigma_min)^2`, infinite if `D` is singular.
    pub condition_number: f64,
    pub satisfied: bool,
    pub singular_values: Vec<f64>,
}

impl RecoveryCertificate {
    /// Builds a certificate from all `required` singular values of `D`
    /// (descending, zero-padded when `k < required`).
    pub fn from_singular_values(k: usize, singular_values: &DVector<f64>) -> Self {
        let required = singular_values.len();
        let rank = numerical_rank(singular_values, RANK_TOL);
        let condition_number = squared_condition(singular_values);
        Self {
            k,
            required,
            rank,
            condition_number,
            satisfied: k >= required && rank == required,
            singular_values: singular_values.iter().copied().collect(),
        }
    }
}

/// `(sigma_max / sigma_min)^2`, or infinity when the ratio is not
/// representable.
pub(crate) fn squared_condition(singular_values: &DVector<f64>) -> f64 {
    if singular_values.is_empty() {
        return f64::INFINITY;
    }
    let max = singular_values.max();
    let min = singular_values.min();
    if !(max > 0.0) || !(min > 0.0) {
        return f64::INFINITY;
    }
    let ratio = max / min;
    let squared = ratio * ratio;
    if squared.is_finite() {
        squared
    } else {
        f64::INFINITY
    }
}

/// Singular values of `D` via a triangular factor of `D^T`.
pub(crate) fn data_singular_values(d: &DMatrix<f64>) -> Result<DVector<f64>> {
    let mut acc = TriangularAccumulator::new(d.nrows());
    acc.push_columns(d)?;
    Ok(sorted_svd(&acc.finish())?.singular_values)
}

/// Recovery certificate of a data matrix.
pub fn certify(d: &DataMatrix) -> Result<RecoveryCertificate> {
    let sv = data_singular_values(d.matrix())?;
    Ok(RecoveryCertificate::from_singular_values(d.len(), &sv))
}

/// A learned model together with its fit diagnostics.
#[derive(Debug, Clone)]
pub struct Inference {
    pub model: PolynomialModel,
    /// `||D^T O^T - Y^T||_F`.
    pub residual: f64,
    pub certificate: RecoveryCertificate,
}

/// Streaming least-squares problem `min ||D^T O^T - Y^T||_F`: each time step
/// contributes the row `[d_k^T, y_k^T]` to one triangular factorization, so the
/// data matrix is never stored.
#[derive(Debug, Clone)]
pub struct LeastSquaresAccumulator {
    acc: TriangularAccumulator,
    reduced_dim: usize,
    degree: usize,
    input_dim: usize,
    features: usize,
    row: Vec<f64>,
}

impl LeastSquaresAccumulator {
    pub fn new(reduced_dim: usize, degree: usize, input_dim: usize) -> Result<Self> {
        let features = feature_count(reduced_dim, degree, input_dim)?;
        Ok(Self {
            acc: TriangularAccumulator::new(features + reduced_dim),
            reduced_dim,
            degree,
            input_dim,
            features,
            row: vec![0.0; features + reduced_dim],
        })
    }

    pub fn rows_seen(&self) -> usize {
        self.acc.rows_seen()
    }

    /// Adds one transition `x -> y` under input `u`.
    pub fn push(&mut self, state: &[f64], input: &[f64], output: &[f64]) -> Result<()> {
        check_dim(
            "LeastSquaresAccumulator: state",
            self.reduced_dim,
            state.len(),
        )?;
        check_dim(
            "LeastSquaresAccumulator: input",
            self.input_dim,
            input.len(),
        )?;
        check_dim(
            "LeastSquaresAccumulator: output",
            self.reduced_dim,
            output.len(),
        )?;
        let features = self.features;
        fill_feature_row(state, input, self.degree, &mut self.row[..features]);
        self.row[features..].copy_from_slice(output);
        if !self.row.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "least-squares data must be finite".into(),
            ));
        }
        self.acc.push_row(&self.row)
    }

    pub fn push_snapshots(&mut self, snapshots: &Snapshots) -> Result<()> {
        let mut x = vec![0.0; self.reduced_dim];
        let mut y = vec![0.0; self.reduced_dim];
        let mut u = vec![0.0; self.input_dim];
        check_dim(
            "push_snapshots: state rows",
            self.reduced_dim,
            snapshots.states.nrows(),
        )?;
        check_dim(
            "push_snapshots: input rows",
            self.input_dim,
            snapshots.inputs.nrows(),
        )?;
        for k in 0..snapshots.len() {
            x.iter_mut()
                .zip(snapshots.states.column(k).iter())
                .for_each(|(a, b)| *a = *b);
            y.iter_mut()
                .zip(snapshots.outputs.column(k).iter())
                .for_each(|(a, b)| *a = *b);
            u.iter_mut()
                .zip(snapshots.inputs.column(k).iter())
                .for_each(|(a, b)| *a = *b);
            self.push(&x, &u, &y)?;
        }
        Ok(())
    }

    /// Least-squares solution with rank tolerance [`RANK_TOL`].
    ///
    /// The solve runs on the column-equilibrated factor, which is accurate for
    /// graded data matrices whose columns differ by many orders of magnitude.
    /// If the equilibrated factor is rank deficient as well, the
    /// minimum-norm solution of the unscaled problem is returned.
    pub fn solve(self, provenance: Provenance) -> Result<Inference> {
        let k = self.acc.rows_seen();
        if k == 0 {
            return Err(Error::Empty("least-squares data"));
        }
        let (r, n) = (self.features, self.reduced_dim);
        let (degree, p) = (self.degree, self.input_dim);
        let full = self.acc.finish();
        let r11 = full.view((0, 0), (r, r)).into_owned();
        let r12 = full.view((0, r), (r, n)).into_owned();
        let r22 = full.view((r, r), (n, n));
        let svd = sorted_svd(&r11)?;
        let certificate = RecoveryCertificate::from_singular_values(k, &svd.singular_values);

        let scale: Vec<f64> = r11
            .column_iter()
            .map(|c| {
                let norm = c.norm();
                if norm > 0.0 {
                    norm
                } else {
                    1.0
                }
            })
            .collect();
        let mut scaled = r11.clone();
        for (j, s) in scale.iter().enumerate() {
            scaled.column_mut(j).iter_mut().for_each(|v| *v /= s);
        }
        let scaled_svd = sorted_svd(&scaled)?;
        let o_t = if numerical_rank(&scaled_svd.singular_values, RANK_TOL) == r {
            let mut w = truncated_solve(&scaled_svd, &r12, r);
            for (j, s) in scale.iter().enumerate() {
                w.row_mut(j).iter_mut().for_each(|v| *v /= s);
            }
            w
        } else {
            truncated_solve(&svd, &r12, certificate.rank)
        };
        let fit = &r11 * &o_t - &r12;
        let residual = (fit.norm_squared() + r22.norm_squared()).sqrt();
        let model = PolynomialModel::from_stacked(&o_t.transpose(), degree, p, provenance)?;
        Ok(Inference {
            model,
            residual,
            certificate,
        })
    }
}

/// `V_r S_r^{-1} U_r^T rhs` over the leading `rank` singular triplets.
fn truncated_solve(svd: &SortedSvd, rhs: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let mut coeffs = svd.u.columns(0, rank).tr_mul(rhs);
    for i in 0..rank {
        let s = svd.singular_values[i];
        coeffs.row_mut(i).iter_mut().for_each(|v| *v /= s);
    }
    svd.v_t.rows(0, rank).tr_mul(&coeffs)
}

/// Solves `min_O ||D^T O^T - Y^T||_F` for `O = [A_1, ..., A_l, B]`.
pub fn infer_operators(d: &DataMatrix, outputs: &DMatrix<f64>) -> Result<Inference> {
    check_dim(
        "infer_operators: output rows",
        d.reduced_dim(),
        outputs.nrows(),
    )?;
    check_dim("infer_operators: output columns", d.len(), outputs.ncols())?;
    if d.is_empty() {
        return Err(Error::Empty("data matrix"));
    }
    let mut ls = LeastSquaresAccumulator::new(d.reduced_dim(), d.degree(), d.input_dim())?;
    let mut row = vec![0.0; ls.acc.ncols()];
    let r = d.required();
    for k in 0..d.len() {
        row[..r].copy_from_slice(d.matrix().column(k).as_slice());
        for (dst, src) in row[r..].iter_mut().zip(outputs.column(k).iter()) {
            *dst = *src;
        }
        if !row.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("outputs must be finite".into()));
        }
        ls.acc.push_row(&row)?;
    }
    ls.solve(d.source().provenance())
}

/// Infers operators from paired snapshots.
pub fn infer_from_snapshots(
    snapshots: &Snapshots,
    degree: usize,
    source: DataSource,
) -> Result<Inference> {
    let mut ls =
        LeastSquaresAccumulator::new(snapshots.states.nrows(), degree, snapshots.inputs.nrows())?;
    ls.push_snapshots(snapshots)?;
    ls.solve(source.provenance())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::{random_input_trajectory, random_polynomial_system, RandomSystemSpec};
    use crate::rom::galerkin_project;
    use crate::subspace::Basis;
    use nalgebra::dmatrix;

    #[test]
    fn data_matrix_block_order() {
        let states = dmatrix![2.0, 3.0];
        let inputs = dmatrix![1.0, 1.0];
        let d = assemble_data_matrix(&states, &inputs, 2, DataSource::Projected).unwrap();
        assert_eq!(d.matrix(), &dmatrix![2.0, 3.0; 4.0, 9.0; 1.0, 1.0]);
        let plain =
            assemble_data_matrix(&states, &DMatrix::zeros(0, 2), 1, DataSource::Projected).unwrap();
        assert_eq!(plain.matrix(), &states);
    }

    #[test]
    fn data_matrix_row_count() {
        let d = assemble_data_matrix(
            &DMatrix::from_element(4, 3, 0.5),
            &DMatrix::zeros(2, 3),
            3,
            DataSource::Reprojected,
        )
        .unwrap();
        assert_eq!(d.required(), 4 + 10 + 20 + 2);
        assert!(assemble_data_matrix(
            &DMatrix::zeros(4, 3),
            &DMatrix::zeros(2, 2),
            1,
            DataSource::Projected
        )
        .is_err());
    }

    #[test]
    fn scalar_linear_recovery() {
        let a = 0.7;
        let states = dmatrix![1.0, a];
        let outputs = dmatrix![a, a * a];
        let d = assemble_data_matrix(&states, &DMatrix::zeros(0, 2), 1, DataSource::Reprojected)
            .unwrap();
        let fit = infer_operators(&d, &outputs).unwrap();
        assert!((fit.model.operator(1)[(0, 0)] - a).abs() < 1e-15);
        assert!(fit.residual < 1e-15);
        assert!(fit.certificate.satisfied);
        assert_eq!(fit.model.provenance(), Provenance::InferredReprojected);
    }

    #[test]
    fn concat_keeps_order() {
        let piece = |k: usize, base: f64| {
            Snapshots::new(
                DMatrix::from_fn(2, k, |r, c| base + (r * 10 + c) as f64),
                DMatrix::from_fn(2, k, |r, c| -base - (r * 10 + c) as f64),
                DMatrix::from_fn(1, k, |_, c| c as f64),
            )
            .unwrap()
        };
        let a = piece(3, 0.0);
        let b = piece(4, 100.0);
        assert_eq!(concat_trajectories(std::slice::from_ref(&a)).unwrap(), a);
        let both = concat_trajectories(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(both.len(), 7);
        assert_eq!(both.states.columns(0, 3), a.states.columns(0, 3));
        assert_eq!(both.outputs.columns(3, 4), b.outputs.columns(0, 4));
        assert!(concat_trajectories(&[]).is_err());
    }

    #[test]
    fn certificate_basics() {
        let d = assemble_data_matrix(
            &DMatrix::identity(3, 3),
            &DMatrix::zeros(0, 3),
            1,
            DataSource::Reprojected,
        )
        .unwrap();
        let c = certify(&d).unwrap();
        assert!(c.satisfied);
        assert!((c.condition_number - 1.0).abs() < 1e-14);

        let short = assemble_data_matrix(
            &DMatrix::identity(3, 2),
            &DMatrix::zeros(0, 2),
            1,
            DataSource::Reprojected,
        )
        .unwrap();
        let c = certify(&short).unwrap();
        assert!(!c.satisfied);
        assert_eq!(c.rank, 2);
        assert!(c.condition_number > 1e20);

        let scaled = assemble_data_matrix(
            &dmatrix![1.0, 0.0; 0.0, 1e-3],
            &DMatrix::zeros(0, 2),
            1,
            DataSource::Reprojected,
        )
        .unwrap();
        let c = certify(&scaled).unwrap();
        assert!((c.condition_number / 1e6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_data_gives_minimum_norm_solution() {
        // two identical state rows: x and a copy through the quadratic block
        let states = dmatrix![1.0, 1.0, 1.0];
        let outputs = dmatrix![2.0, 2.0, 2.0];
        let d =
            assemble_data_matrix(&states, &DMatrix::zeros(0, 3), 2, DataSource::Projected).unwrap();
        let fit = infer_operators(&d, &outputs).unwrap();
        assert!(!fit.certificate.satisfied);
        assert_eq!(fit.certificate.rank, 1);
        assert!((fit.model.operator(1)[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((fit.model.operator(2)[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    fn fixture() -> (crate::fom::PolynomialSystem, Basis) {
        let fom = random_polynomial_system(&RandomSystemSpec {
            state_dim: 12,
            input_dim: 1,
            degree: 2,
            seed: 11,
            ..Default::default()
        })
        .unwrap();
        let q = nalgebra::DMatrix::from_fn(12, 3, |r, c| ((r * 7 + c * 13) % 11) as f64 - 5.0);
        let basis = Basis::from_orthonormal(q.qr().q()).unwrap();
        (fom, basis)
    }

    #[test]
    fn reprojected_data_recovers_intrusive_operators() {
        let (fom, basis) = fixture();
        let intrusive = galerkin_project(&fom, &basis).unwrap();
        let x0 = DVector::zeros(12);
        let inputs = random_input_trajectory(60, 1, 0.0, 1.0, 5).unwrap().inputs;
        let sample = reproject_sample(&fom, &basis, &x0, &inputs).unwrap();
        assert!(sample.diverged_at.is_none());
        let fit = infer_from_snapshots(&sample.snapshots, 2, DataSource::Reprojected).unwrap();
        assert!(fit.certificate.satisfied);
        let err = (fit.model.stacked() - intrusive.stacked()).norm() / intrusive.stacked().norm();
        assert!(err < 1e-8, "recovery error {err}");
        assert!(fit.residual < 1e-10, "residual {}", fit.residual);
    }

    #[test]
    fn plain_projected_data_does_not_recover() {
        let (fom, basis) = fixture();
        let intrusive = galerkin_project(&fom, &basis).unwrap();
        let x0 = DVector::zeros(12);
        let inputs = random_input_trajectory(60, 1, 0.0, 1.0, 5).unwrap().inputs;
        let traj = crate::fom::simulate(&fom, &x0, &inputs, 60).unwrap();
        let snaps = project_trajectory(&basis, &traj, &inputs).unwrap();
        let fit = infer_from_snapshots(&snaps, 2, DataSource::Projected).unwrap();
        assert!(fit.residual > 0.0);
        let err = (fit.model.stacked() - intrusive.stacked()).norm() / intrusive.stacked().norm();
        assert!(err >= 1e-3, "plain recovery error {err}");
    }

    #[test]
    fn least_squares_solution_is_locally_optimal() {
        let (fom, basis) = fixture();
        let x0 = DVector::zeros(12);
        let inputs = random_input_trajectory(40, 1, 0.0, 1.0, 8).unwrap().inputs;
        let traj = crate::fom::simulate(&fom, &x0, &inputs, 40).unwrap();
        let snaps = project_trajectory(&basis, &traj, &inputs).unwrap();
        let d =
            assemble_data_matrix(&snaps.states, &snaps.inputs, 2, DataSource::Projected).unwrap();
        let fit = infer_operators(&d, &snaps.outputs).unwrap();
        let o = fit.model.stacked();
        let residual = |o: &DMatrix<f64>| {
            (d.matrix().transpose() * o.transpose() - snaps.outputs.transpose()).norm()
        };
        let base = residual(&o);
        assert!((base - fit.residual).abs() <= 1e-10 * (1.0 + base));
        for idx in 0..o.len() {
            for delta in [1e-3, -1e-3] {
                let mut probe = o.clone();
                probe[idx] += delta;
                assert!(residual(&probe) >= base);
            }
        }
    }
}
