use nalgebra::{DMatrix, DVector};

use super::{PolynomialModel, Provenance};
use crate::error::{check_dim, Result};
use crate::fom::FullOrderModel;
use crate::polytensor::enumerate_multisets;
use crate::subspace::Basis;

/// Intrusive Galerkin projection of `fom` onto `basis`.
///
/// Column `alpha = (a_1, ..., a_i)` of `A_i` is
/// `mult(alpha) * V^T L_i(v_{a_1}, ..., v_{a_i})`: expanding
/// `L_i(Vz, ..., Vz)` over all ordered index tuples and collecting equal
/// multisets gives exactly this coefficient of `z^alpha`.
pub fn galerkin_project<M: FullOrderModel + ?Sized>(
    fom: &M,
    basis: &Basis,
) -> Result<PolynomialModel> {
    check_dim("galerkin_project", fom.state_dim(), basis.full_dim())?;
    let v = basis.matrix();
    let n = basis.reduced_dim();
    let columns: Vec<DVector<f64>> = (0..n).map(|i| basis.column(i)).collect();
    let mut operators = Vec::with_capacity(fom.degree());
    for degree in 1..=fom.degree() {
        let monomials = enumerate_multisets(n, degree)?;
        let mut op = DMatrix::zeros(n, monomials.len());
        for (col, alpha) in monomials.iter().enumerate() {
            let args: Vec<&DVector<f64>> = alpha.entries().iter().map(|&a| &columns[a]).collect();
            let image = fom.multilinear(degree, &args);
            let projected = v.tr_mul(&image) * alpha.multiplicity() as f64;
            op.set_column(col, &projected);
        }
        operators.push(op);
    }
    let p = fom.input_dim();
    let mut input = DMatrix::zeros(n, p);
    for c in 0..p {
        let mut e = DVector::zeros(p);
        e[c] = 1.0;
        input.set_column(c, &v.tr_mul(&fom.input_action(&e)));
    }
    let model = PolynomialModel::new(operators, input, Provenance::Intrusive)?;
    Ok(model.with_parameter(fom.parameter().to_vec()))
}
