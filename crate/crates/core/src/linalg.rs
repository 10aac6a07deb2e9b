//! Dense linear algebra shared by POD and least squares.
//!
//! Both consumers see data as a long stream of rows (snapshots, or the
//! transposed columns of a data matrix). [`TriangularAccumulator`] folds such
//! a stream into an upper-triangular `R` with `AᵀA = RᵀR` by Householder
//! reflections, so `A` is never materialized and its condition number is
//! never squared.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{check_dim, Error, Result};

/// Streaming Householder triangularization of a tall matrix given row by row.
///
/// Pending rows and the factor are stored transposed (one data row per
/// column), so every update in [`TriangularAccumulator::flush`] is a
/// contiguous axpy.
#[derive(Debug, Clone)]
pub struct TriangularAccumulator {
    r_t: DMatrix<f64>,
    rows_seen: usize,
    block_t: DMatrix<f64>,
    fill: usize,
    work: Vec<f64>,
}

const BLOCK_ROWS: usize = 128;

impl TriangularAccumulator {
    pub fn new(ncols: usize) -> Self {
        Self {
            r_t: DMatrix::zeros(ncols, ncols),
            rows_seen: 0,
            block_t: DMatrix::zeros(ncols, BLOCK_ROWS),
            fill: 0,
            work: vec![0.0; ncols],
        }
    }

    pub fn ncols(&self) -> usize {
        self.r_t.nrows()
    }

    pub fn rows_seen(&self) -> usize {
        self.rows_seen
    }

    /// Appends one row; `row` must have `ncols` entries.
    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        check_dim("TriangularAccumulator::push_row", self.ncols(), row.len())?;
        self.block_t.column_mut(self.fill).copy_from_slice(row);
        self.advance();
        Ok(())
    }

    /// Appends every column of `columns` as a row.
    pub fn push_columns(&mut self, columns: &DMatrix<f64>) -> Result<()> {
        check_dim(
            "TriangularAccumulator::push_columns",
            self.ncols(),
            columns.nrows(),
        )?;
        for col in columns.column_iter() {
            self.block_t.column_mut(self.fill).copy_from(&col);
            self.advance();
        }
        Ok(())
    }

    fn advance(&mut self) {
        self.fill += 1;
        self.rows_seen += 1;
        if self.fill == BLOCK_ROWS {
            self.flush();
        }
    }

    /// Folds the pending rows into `R`.
    fn flush(&mut self) {
        let b = self.fill;
        if b == 0 {
            return;
        }
        let c = self.ncols();
        let r_t = self.r_t.as_mut_slice();
        let block = self.block_t.as_mut_slice();
        let w = &mut self.work;
        for j in 0..c {
            // Householder on [r_jj; pending rows in column j]; rows of R below
            // j are zero in column j and stay untouched.
            let tail_sq: f64 = (0..b).map(|r| block[r * c + j].powi(2)).sum();
            if tail_sq == 0.0 {
                continue;
            }
            let r_row = &mut r_t[j * c..(j + 1) * c];
            let head = r_row[j];
            let norm = (head * head + tail_sq).sqrt();
            let alpha = if head > 0.0 { -norm } else { norm };
            let v0 = head - alpha;
            let scale = 2.0 / (v0 * v0 + tail_sq);
            r_row[j] = alpha;
            let w = &mut w[j + 1..c];
            for (wk, &rk) in w.iter_mut().zip(&r_row[j + 1..c]) {
                *wk = v0 * rk;
            }
            for r in 0..b {
                let row = &block[r * c..(r + 1) * c];
                let vr = row[j];
                if vr != 0.0 {
                    for (wk, &x) in w.iter_mut().zip(&row[j + 1..c]) {
                        *wk += vr * x;
                    }
                }
            }
            w.iter_mut().for_each(|wk| *wk *= scale);
            for (rk, &wk) in r_row[j + 1..c].iter_mut().zip(w.iter()) {
                *rk -= v0 * wk;
            }
            for r in 0..b {
                let row = &mut block[r * c..(r + 1) * c];
                let vr = row[j];
                if vr != 0.0 {
                    for (x, &wk) in row[j + 1..c].iter_mut().zip(w.iter()) {
                        *x -= vr * wk;
                    }
                    row[j] = 0.0;
                }
            }
        }
        self.fill = 0;
    }

    /// The triangular factor after folding all pushed rows.
    pub fn finish(mut self) -> DMatrix<f64> {
        self.flush();
        self.r_t.transpose()
    }

    /// Current factor without consuming the accumulator.
    pub fn factor(&mut self) -> DMatrix<f64> {
        self.flush();
        self.r_t.transpose()
    }
}

/// Thin SVD with singular values sorted in descending order.
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub fn sorted_svd(m: &DMatrix<f64>) -> Result<SortedSvd> {
    if m.is_empty() {
        return Err(Error::Empty("matrix for SVD"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "matrix for SVD has non-finite entries".into(),
        ));
    }
    let svd = SVD::try_new(m.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::InvalidArgument("SVD did not converge".into()))?;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let u_sorted = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let vt_sorted = DMatrix::from_fn(order.len(), v_t.ncols(), |r, c| v_t[(order[r], c)]);
    let sv_sorted = DVector::from_iterator(order.len(), order.iter().map(|&i| sv[i]));
    Ok(SortedSvd {
        u: u_sorted,
        singular_values: sv_sorted,
        v_t: vt_sorted,
    })
}

/// Number of singular values above `rel_tol * s_max`.
pub fn numerical_rank(singular_values: &DVector<f64>, rel_tol: f64) -> usize {
    let Some(&largest) = singular_values.iter().max_by(|a, b| a.total_cmp(b)) else {
        return 0;
    };
    if largest <= 0.0 {
        return 0;
    }
    singular_values
        .iter()
        .filter(|&&s| s > rel_tol * largest)
        .count()
}

/// Orthonormal basis of the orthogonal complement of the (orthonormal)
/// columns of `v`; `N x (N - n)`.
pub fn orthonormal_complement(v: &DMatrix<f64>) -> DMatrix<f64> {
    let n_full = v.nrows();
    let n = v.ncols();
    if n >= n_full {
        return DMatrix::zeros(n_full, 0);
    }
    // QR of [V | I] yields a square orthogonal Q whose leading n columns span
    // range(V); the remaining columns complete the basis.
    let mut aug = DMatrix::zeros(n_full, n + n_full);
    aug.columns_mut(0, n).copy_from(v);
    aug.columns_mut(n, n_full).fill_with_identity();
    let q = aug.qr().q();
    q.columns(n, n_full - n).into_owned()
}

/// Sets the sign of each column so that its largest-magnitude entry is
/// positive (first occurrence wins ties).
pub fn fix_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}
