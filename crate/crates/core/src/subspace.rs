//! POD bases and projection between the full and the reduced space.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::fom::{format_float, parse_float};
use crate::linalg::{fix_column_signs, numerical_rank, sorted_svd, TriangularAccumulator};

/// Relative singular value threshold below which a POD mode is rejected.
pub const POD_RANK_TOL: f64 = 1e-13;

/// An orthonormal `N x n` basis, columns ordered by decreasing singular value.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    matrix: DMatrix<f64>,
    singular_values: DVector<f64>,
}

impl Basis {
    /// Wraps a matrix with orthonormal columns (checked to `1e-10`).
    pub fn from_orthonormal(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.ncols();
        if n == 0 || n > matrix.nrows() {
            return Err(Error::InvalidArgument(format!(
                "basis must have 1 <= n <= N columns, got {}x{}",
                matrix.nrows(),
                n
            )));
        }
        let defect = (matrix.transpose() * &matrix - DMatrix::identity(n, n)).amax();
        if defect > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "basis columns are not orthonormal (defect {defect:e})"
            )));
        }
        Ok(Self {
            matrix,
            singular_values: DVector::zeros(0),
        })
    }

    /// The first `n` canonical unit vectors of `R^N`.
    pub fn canonical(full_dim: usize, n: usize) -> Result<Self> {
        Self::from_orthonormal(DMatrix::identity(full_dim, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn full_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn reduced_dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Full singular spectrum of the snapshot matrix (empty for bases not
    /// built by POD).
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    /// The basis spanned by the first `n` columns.
    pub fn leading(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.reduced_dim() {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {n} of {} basis vectors",
                self.reduced_dim()
            )));
        }
        Ok(Self {
            matrix: self.matrix.columns(0, n).into_owned(),
            singular_values: self.singular_values.clone(),
        })
    }

    pub fn column(&self, i: usize) -> DVector<f64> {
        self.matrix.column(i).into_owned()
    }

    /// Writes `V` column-major: line `j` holds the entries of basis vector `j`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for col in self.matrix.column_iter() {
            let line: Vec<String> = col.iter().map(|v| format_float(*v)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Reads a basis written by [`Basis::write_csv`].
    pub fn read_csv(text: &str) -> Result<Self> {
        let mut data = Vec::new();
        let mut cols = 0;
        let mut rows = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let values = line
                .split(',')
                .map(parse_float)
                .collect::<Result<Vec<f64>>>()?;
            match rows {
                None => rows = Some(values.len()),
                Some(r) => check_dim("basis CSV line", r, values.len())?,
            }
            data.extend(values);
            cols += 1;
        }
        let rows = rows.ok_or(Error::Empty("basis CSV"))?;
        Self::from_orthonormal(DMatrix::from_vec(rows, cols, data))
    }
}

/// Streaming POD: snapshots are folded into a triangular factor of the
/// transposed snapshot matrix, whose SVD gives the left singular vectors.
#[derive(Debug, Clone)]
pub struct PodAccumulator {
    acc: TriangularAccumulator,
}

impl PodAccumulator {
    pub fn new(full_dim: usize) -> Self {
        Self {
            acc: TriangularAccumulator::new(full_dim),
        }
    }

    /// Adds the columns of `snapshots` (`N x M`).
    pub fn push(&mut self, snapshots: &DMatrix<f64>) -> Result<()> {
        if snapshots.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("snapshots must be finite".into()));
        }
        self.acc.push_columns(snapshots)
    }

    pub fn snapshot_count(&self) -> usize {
        self.acc.rows_seen()
    }

    /// Basis of the leading `n` left singular vectors.
    pub fn finish(self, n: usize) -> Result<Basis> {
        let count = self.acc.rows_seen();
        let full_dim = self.acc.ncols();
        if count == 0 {
            return Err(Error::Empty("snapshot matrix"));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("POD needs n >= 1".into()));
        }
        let r = self.acc.finish();
        // S^T = Q R, so S = R^T Q^T and the left singular vectors of S are the
        // right singular vectors of R.
        let svd = sorted_svd(&r)?;
        let keep = count.min(full_dim);
        let singular_values = svd.singular_values.rows(0, keep).into_owned();
        let rank = numerical_rank(&singular_values, POD_RANK_TOL);
        if n > rank {
            return Err(Error::RankTooLow { requested: n, rank });
        }
        let mut matrix = svd.v_t.rows(0, n).transpose();
        fix_column_signs(&mut matrix);
        Ok(Basis {
            matrix,
            singular_values,
        })
    }
}

/// POD basis of dimension `n` from an `N x M` snapshot matrix.
pub fn pod_basis(snapshots: &DMatrix<f64>, n: usize) -> Result<Basis> {
    let mut acc = PodAccumulator::new(snapshots.nrows());
    acc.push(snapshots)?;
    acc.finish(n)
}

/// `V^T X`.
pub fn project(basis: &Basis, states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim("project", basis.full_dim(), states.nrows())?;
    Ok(basis.matrix.tr_mul(states))
}

/// `V^T x`.
pub fn project_vec(basis: &Basis, state: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim("project_vec", basis.full_dim(), state.len())?;
    Ok(basis.matrix.tr_mul(state))
}

/// `V Z`.
pub fn lift(basis: &Basis, reduced: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim("lift", basis.reduced_dim(), reduced.nrows())?;
    Ok(&basis.matrix * reduced)
}

/// `V z`.
pub fn lift_vec(basis: &Basis, reduced: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim("lift_vec", basis.reduced_dim(), reduced.len())?;
    Ok(&basis.matrix * reduced)
}
