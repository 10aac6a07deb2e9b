//! Reduced polynomial models
//! `z_{k+1} = sum_i A_i z_k^i + B u_k` with `A_i in R^{n x n_i}`.

mod galerkin;
mod interpolate;
mod io;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fom::{run_steps, Trajectory};
use crate::polytensor::{compressed_dim, enumerate_multisets, fill_compressed_power};

pub use galerkin::galerkin_project;
pub use interpolate::{interpolate, spline_weights};
pub use io::{read_bundle, write_bundle, BundleManifest};

/// How a reduced model was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Intrusive,
    InferredReprojected,
    InferredPlain,
    Interpolated,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Intrusive => "intrusive",
            Provenance::InferredReprojected => "inferred-reprojected",
            Provenance::InferredPlain => "inferred-plain",
            Provenance::Interpolated => "interpolated",
        }
    }
}

/// Reduced operators `A_1, ..., A_l` and `B` of a polynomial model.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialModel {
    operators: Vec<DMatrix<f64>>,
    input: DMatrix<f64>,
    provenance: Provenance,
    parameter: Option<Vec<f64>>,
}

impl PolynomialModel {
    pub fn new(
        operators: Vec<DMatrix<f64>>,
        input: DMatrix<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = input.nrows();
        if operators.is_empty() {
            return Err(Error::Empty("operator list of a reduced model"));
        }
        for (idx, op) in operators.iter().enumerate() {
            check_dim("PolynomialModel: operator rows", n, op.nrows())?;
            check_dim(
                "PolynomialModel: operator columns",
                compressed_dim(n, idx + 1)?,
                op.ncols(),
            )?;
        }
        let finite = operators
            .iter()
            .chain(std::iter::once(&input))
            .all(|m| m.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::InvalidArgument(
                "reduced operators must be finite".into(),
            ));
        }
        Ok(Self {
            operators,
            input,
            provenance,
            parameter: None,
        })
    }

    pub fn with_parameter(mut self, parameter: Vec<f64>) -> Self {
        self.parameter = Some(parameter);
        self
    }

    pub fn degree(&self) -> usize {
        self.operators.len()
    }

    pub fn reduced_dim(&self) -> usize {
        self.input.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.input.ncols()
    }

    pub fn operator(&self, degree: usize) -> &DMatrix<f64> {
        &self.operators[degree - 1]
    }

    pub fn operators(&self) -> &[DMatrix<f64>] {
        &self.operators
    }

    pub fn input_matrix(&self) -> &DMatrix<f64> {
        &self.input
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn parameter(&self) -> Option<&[f64]> {
        self.parameter.as_deref()
    }

    /// `[A_1, ..., A_l, B]`, the operator matrix acting on a data-matrix column.
    pub fn stacked(&self) -> DMatrix<f64> {
        let n = self.reduced_dim();
        let total: usize =
            self.operators.iter().map(|m| m.ncols()).sum::<usize>() + self.input.ncols();
        let mut out = DMatrix::zeros(n, total);
        let mut offset = 0;
        for m in self.operators.iter().chain(std::iter::once(&self.input)) {
            out.columns_mut(offset, m.ncols()).copy_from(m);
            offset += m.ncols();
        }
        out
    }

    /// Splits an operator matrix `[A_1, ..., A_l, B]` back into its blocks.
    pub fn from_stacked(
        stacked: &DMatrix<f64>,
        degree: usize,
        input_dim: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = stacked.nrows();
        let mut offset = 0;
        let mut operators = Vec::with_capacity(degree);
        for i in 1..=degree {
            let cols = compressed_dim(n, i)?;
            if offset + cols > stacked.ncols() {
                return Err(Error::DimensionMismatch {
                    context: "PolynomialModel::from_stacked",
                    expected: offset + cols,
                    found: stacked.ncols(),
                });
            }
            operators.push(stacked.columns(offset, cols).into_owned());
            offset += cols;
        }
        check_dim(
            "PolynomialModel::from_stacked",
            offset + input_dim,
            stacked.ncols(),
        )?;
        let input = stacked.columns(offset, input_dim).into_owned();
        Self::new(operators, input, provenance)
    }

    /// One step of the reduced model.
    pub fn apply(&self, z: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.input * u;
        let mut buf = Vec::new();
        for (idx, op) in self.operators.iter().enumerate() {
            buf.resize(op.ncols(), 0.0);
            fill_compressed_power(z.as_slice(), idx + 1, &mut buf);
            out.gemv(1.0, op, &DVector::from_column_slice(&buf), 1.0);
        }
        out
    }

    /// Checked single step.
    pub fn step(&self, z: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("PolynomialModel::step: state", self.reduced_dim(), z.len())?;
        check_dim("PolynomialModel::step: input", self.input_dim(), u.len())?;
        Ok(self.apply(z, u))
    }
}

/// Time steps a reduced model; divergence is flagged as in
/// [`crate::fom::simulate`].
pub fn reduced_simulate(
    model: &PolynomialModel,
    z0: &DVector<f64>,
    inputs: &DMatrix<f64>,
    steps: usize,
) -> Result<Trajectory> {
    check_dim(
        "reduced_simulate: initial state",
        model.reduced_dim(),
        z0.len(),
    )?;
    check_dim(
        "reduced_simulate: input rows",
        model.input_dim(),
        inputs.nrows(),
    )?;
    if inputs.ncols() < steps {
        return Err(Error::DimensionMismatch {
            context: "reduced_simulate: input columns",
            expected: steps,
            found: inputs.ncols(),
        });
    }
    run_steps(z0, inputs, steps, |z, u| model.apply(z, u))
}

/// Keeps the leading `n_new` modes: rows `0..n_new` of every operator and the
/// columns whose monomials only involve modes `< n_new`.
pub fn truncate(model: &PolynomialModel, n_new: usize) -> Result<PolynomialModel> {
    let n = model.reduced_dim();
    if n_new == 0 || n_new > n {
        return Err(Error::InvalidArgument(format!(
            "cannot truncate a {n}-dimensional model to {n_new} modes"
        )));
    }
    let mut operators = Vec::with_capacity(model.degree());
    for (idx, op) in model.operators.iter().enumerate() {
        let degree = idx + 1;
        let kept = enumerate_multisets(n_new, degree)?;
        let mut out = DMatrix::zeros(n_new, kept.len());
        for (new_col, alpha) in kept.iter().enumerate() {
            let old_col = alpha.rank(n)?;
            out.set_column(new_col, &op.column(old_col).rows(0, n_new));
        }
        operators.push(out);
    }
    let input = model.input.rows(0, n_new).into_owned();
    let mut out = PolynomialModel::new(operators, input, model.provenance)?;
    out.parameter = model.parameter.clone();
    Ok(out)
}
