use nalgebra::DMatrix;

use super::{PolynomialModel, Provenance};
use crate::error::{Error, Result};

/// Weights `w_j` such that the natural cubic spline through `(nodes_j, y_j)`
/// evaluates to `sum_j w_j y_j` at `x`. `nodes` must be strictly increasing.
pub fn spline_weights(nodes: &[f64], x: f64) -> Result<Vec<f64>> {
    let m = nodes.len();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "spline interpolation needs at least 2 nodes".into(),
        ));
    }
    if nodes.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "spline nodes must be strictly increasing".into(),
        ));
    }
    let (low, high) = (nodes[0], nodes[m - 1]);
    if !(low..=high).contains(&x) {
        return Err(Error::Extrapolation {
            value: x,
            low,
            high,
        });
    }
    let seg = nodes[..m - 1]
        .iter()
        .rposition(|&t| t <= x)
        .unwrap_or(0)
        .min(m - 2);
    let h = nodes[seg + 1] - nodes[seg];
    let a = (nodes[seg + 1] - x) / h;
    let b = (x - nodes[seg]) / h;
    let mut weights = vec![0.0; m];
    weights[seg] += a;
    weights[seg + 1] += b;
    if m == 2 {
        return Ok(weights);
    }
    // second-derivative contributions; `moments[j][i]` is M_i for data e_j
    let ca = (a * a * a - a) * h * h / 6.0;
    let cb = (b * b * b - b) * h * h / 6.0;
    if ca == 0.0 && cb == 0.0 {
        return Ok(weights);
    }
    for (j, w) in weights.iter_mut().enumerate() {
        let mut unit = vec![0.0; m];
        unit[j] = 1.0;
        let moments = natural_moments(nodes, &unit);
        *w += ca * moments[seg] + cb * moments[seg + 1];
    }
    Ok(weights)
}

/// Second derivatives of the natural cubic spline through `(nodes, values)`.
fn natural_moments(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let m = nodes.len();
    let mut moments = vec![0.0; m];
    if m < 3 {
        return moments;
    }
    let inner = m - 2;
    let h: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    let mut diag = vec![0.0; inner];
    let mut upper = vec![0.0; inner];
    let mut rhs = vec![0.0; inner];
    for k in 0..inner {
        let i = k + 1;
        diag[k] = 2.0 * (h[i - 1] + h[i]);
        upper[k] = h[i];
        rhs[k] =
            6.0 * ((values[i + 1] - values[i]) / h[i] - (values[i] - values[i - 1]) / h[i - 1]);
    }
    // Thomas algorithm; the sub-diagonal entry of row k is h[k]
    for k in 1..inner {
        let factor = h[k] / diag[k - 1];
        diag[k] -= factor * upper[k - 1];
        rhs[k] -= factor * rhs[k - 1];
    }
    moments[inner] = rhs[inner - 1] / diag[inner - 1];
    for k in (0..inner - 1).rev() {
        moments[k + 1] = (rhs[k] - upper[k] * moments[k + 2]) / diag[k];
    }
    moments
}

/// Entry-wise natural cubic spline interpolation of reduced models over a
/// scalar parameter.
pub fn interpolate(
    params: &[f64],
    models: &[PolynomialModel],
    target: f64,
) -> Result<PolynomialModel> {
    if params.len() != models.len() {
        return Err(Error::DimensionMismatch {
            context: "interpolate: parameters vs models",
            expected: params.len(),
            found: models.len(),
        });
    }
    let first = models.first().ok_or(Error::Empty("model list"))?;
    for m in models {
        if m.degree() != first.degree()
            || m.reduced_dim() != first.reduced_dim()
            || m.input_dim() != first.input_dim()
        {
            return Err(Error::InvalidArgument(
                "interpolated models must share degree, dimension and input size".into(),
            ));
        }
    }
    let mut order: Vec<usize> = (0..params.len()).collect();
    order.sort_by(|&a, &b| params[a].total_cmp(&params[b]));
    let nodes: Vec<f64> = order.iter().map(|&i| params[i]).collect();
    let weights = spline_weights(&nodes, target)?;

    let blend = |pick: &dyn Fn(&PolynomialModel) -> &DMatrix<f64>| -> DMatrix<f64> {
        let shape = pick(first).shape();
        let mut out = DMatrix::zeros(shape.0, shape.1);
        for (&idx, &w) in order.iter().zip(weights.iter()) {
            if w != 0.0 {
                out += pick(&models[idx]) * w;
            }
        }
        out
    };
    let operators = (1..=first.degree())
        .map(|d| blend(&|m: &PolynomialModel| m.operator(d)))
        .collect();
    let input = blend(&|m: &PolynomialModel| m.input_matrix());
    Ok(
        PolynomialModel::new(operators, input, Provenance::Interpolated)?
            .with_parameter(vec![target]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine_model(mu: f64) -> PolynomialModel {
        let a1 = DMatrix::from_fn(2, 2, |r, c| (2.0 + r as f64) * mu + 1.0 + c as f64);
        let a2 = DMatrix::from_fn(2, 3, |r, c| -(r as f64 + 1.0) * mu + c as f64);
        let b = DMatrix::from_element(2, 1, 2.0 * mu + 1.0);
        PolynomialModel::new(vec![a1, a2], b, Provenance::Intrusive).unwrap()
    }

    #[test]
    fn reproduces_nodes_exactly() {
        let params = [0.1, 0.3, 0.45, 0.8, 1.0];
        let models: Vec<_> = params
            .iter()
            .map(|&mu| {
                let m = affine_model(mu);
                let bumped = m.operator(1).map(|v| v * v * mu.sin());
                PolynomialModel::new(
                    vec![bumped, m.operator(2).clone()],
                    m.input_matrix().clone(),
                    Provenance::Intrusive,
                )
                .unwrap()
            })
            .collect();
        for (i, &mu) in params.iter().enumerate() {
            let out = interpolate(&params, &models, mu).unwrap();
            assert_eq!(out.operator(1), models[i].operator(1));
            assert_eq!(out.input_matrix(), models[i].input_matrix());
            assert_eq!(out.provenance(), Provenance::Interpolated);
        }
    }

    #[test]
    fn affine_entries_are_recovered() {
        let params = [0.1, 0.2, 0.5, 0.7, 1.0];
        let models: Vec<_> = params.iter().map(|&mu| affine_model(mu)).collect();
        for mid in [0.15, 0.35, 0.6, 0.85] {
            let out = interpolate(&params, &models, mid).unwrap();
            let exact = affine_model(mid);
            assert!((out.stacked() - exact.stacked()).amax() < 1e-10);
        }
    }

    #[test]
    fn two_nodes_blend_linearly() {
        let lo = affine_model(0.0);
        let hi = PolynomialModel::new(
            vec![DMatrix::from_element(2, 2, 5.0), DMatrix::zeros(2, 3)],
            DMatrix::zeros(2, 1),
            Provenance::Intrusive,
        )
        .unwrap();
        let out = interpolate(&[1.0, 2.0], &[lo.clone(), hi.clone()], 1.25).unwrap();
        let expected = lo.stacked() * 0.75 + hi.stacked() * 0.25;
        assert!((out.stacked() - expected).amax() < 1e-15);
    }

    #[test]
    fn unsorted_grids_are_sorted() {
        let params = [1.0, 0.1, 0.5];
        let models: Vec<_> = params.iter().map(|&mu| affine_model(mu)).collect();
        let out = interpolate(&params, &models, 0.3).unwrap();
        assert!((out.stacked() - affine_model(0.3).stacked()).amax() < 1e-12);
    }

    #[test]
    fn spline_matches_known_natural_spline() {
        // natural spline through (0,0), (1,1), (2,0): M_1 = -3, S(0.5) = 0.6875
        let w = spline_weights(&[0.0, 1.0, 2.0], 0.5).unwrap();
        let value = w[1];
        assert!((value - 0.6875).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_requests() {
        let models = vec![affine_model(0.1), affine_model(0.2)];
        assert!(matches!(
            interpolate(&[0.1, 0.2], &models, 0.3),
            Err(Error::Extrapolation { .. })
        ));
        assert!(interpolate(&[0.1, 0.1], &models, 0.1).is_err());
        assert!(interpolate(&[0.1], &models[..1], 0.1).is_err());
        let other = PolynomialModel::new(
            vec![DMatrix::zeros(1, 1)],
            DMatrix::zeros(1, 1),
            Provenance::Intrusive,
        )
        .unwrap();
        assert!(interpolate(&[0.1, 0.2], &[models[0].clone(), other], 0.15).is_err());
    }
}
