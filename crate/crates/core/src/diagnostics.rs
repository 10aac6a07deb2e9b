//! Error metrics, closure error, conditioning and the Mori-Zwanzig split of
//! projected linear dynamics.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::fom::Trajectory;
use crate::linalg::orthonormal_complement;
use crate::opinf::{data_singular_values, squared_condition, DataMatrix};
use crate::subspace::Basis;

/// `||X_breve - X_tilde||_F`.
pub fn closure_error(projected: &DMatrix<f64>, intrusive: &DMatrix<f64>) -> Result<f64> {
    check_shape("closure_error", projected, intrusive)?;
    Ok((projected - intrusive).norm())
}

/// `||x_breve_k - x_tilde_k||_2` for every column `k`.
pub fn closure_error_per_step(
    projected: &DMatrix<f64>,
    intrusive: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    check_shape("closure_error_per_step", projected, intrusive)?;
    Ok((projected - intrusive)
        .column_iter()
        .map(|c| c.norm())
        .collect())
}

fn check_shape(context: &'static str, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    check_dim(context, a.nrows(), b.nrows())?;
    check_dim(context, a.ncols(), b.ncols())
}

/// Mean of per-pair relative errors, with diverged pairs left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedMetric {
    /// Mean over finite pairs; `None` when every pair diverged.
    pub value: Option<f64>,
    pub counted: usize,
    pub diverged: usize,
}

impl PairedMetric {
    fn from_terms(terms: Vec<Option<f64>>) -> Self {
        let diverged = terms.iter().filter(|t| t.is_none()).count();
        let finite: Vec<f64> = terms.into_iter().flatten().collect();
        let counted = finite.len();
        let value = (counted > 0).then(|| finite.iter().sum::<f64>() / counted as f64);
        Self {
            value,
            counted,
            diverged,
        }
    }
}

/// Squared norms of one (candidate, reference) pair assembled from
/// concatenated pieces, so long trajectories never need to be stored.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairAccumulator {
    diff_sq: f64,
    reference_sq: f64,
    diverged: bool,
}

impl PairAccumulator {
    /// Adds `||candidate - reference||_F^2` and `||reference||_F^2`.
    pub fn add(&mut self, candidate: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<()> {
        check_shape("PairAccumulator::add", candidate, reference)?;
        self.add_squares(
            (candidate - reference).norm_squared(),
            reference.norm_squared(),
        );
        Ok(())
    }

    pub fn add_squares(&mut self, diff_sq: f64, reference_sq: f64) {
        self.diff_sq += diff_sq;
        self.reference_sq += reference_sq;
        if !diff_sq.is_finite() {
            self.diverged = true;
        }
    }

    pub fn mark_diverged(&mut self) {
        self.diverged = true;
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    /// Relative error of the concatenated pair, `None` if diverged.
    pub fn relative(&self) -> Result<Option<f64>> {
        if self.diverged {
            return Ok(None);
        }
        if self.reference_sq == 0.0 {
            return Err(Error::ZeroNorm("reference trajectory"));
        }
        Ok(Some((self.diff_sq / self.reference_sq).sqrt()))
    }
}

/// Mean relative error over pairs, leaving diverged pairs out.
pub fn average_pairs(pairs: &[PairAccumulator]) -> Result<PairedMetric> {
    if pairs.is_empty() {
        return Err(Error::Empty("trajectory pairs"));
    }
    let terms = pairs
        .iter()
        .map(PairAccumulator::relative)
        .collect::<Result<Vec<_>>>()?;
    Ok(PairedMetric::from_terms(terms))
}

/// `(1/m) sum_i ||V Z_i - X_i||_F / ||X_i||_F` over pairs whose reduced
/// trajectory did not diverge.
pub fn avg_rel_state_error(
    full: &[DMatrix<f64>],
    reduced: &[Trajectory],
    basis: &Basis,
) -> Result<PairedMetric> {
    check_dim("avg_rel_state_error: pair count", full.len(), reduced.len())?;
    if full.is_empty() {
        return Err(Error::Empty("trajectory pairs"));
    }
    let mut terms = Vec::with_capacity(full.len());
    for (x, z) in full.iter().zip(reduced) {
        check_dim(
            "avg_rel_state_error: full state",
            basis.full_dim(),
            x.nrows(),
        )?;
        let norm = x.norm();
        if norm == 0.0 {
            return Err(Error::ZeroNorm("full-order trajectory"));
        }
        if z.diverged() {
            terms.push(None);
            continue;
        }
        check_dim(
            "avg_rel_state_error: reduced state",
            basis.reduced_dim(),
            z.state_dim(),
        )?;
        check_dim("avg_rel_state_error: columns", x.ncols(), z.len())?;
        let err = (basis.matrix() * &z.states - x).norm() / norm;
        terms.push(err.is_finite().then_some(err));
    }
    Ok(PairedMetric::from_terms(terms))
}

/// `(1/m) sum_i ||Z_i - X_tilde_i||_F / ||X_tilde_i||_F`; a pair counts as
/// diverged when either trajectory diverged.
pub fn rel_trajectory_difference(
    candidate: &[Trajectory],
    reference: &[Trajectory],
) -> Result<PairedMetric> {
    check_dim(
        "rel_trajectory_difference: pair count",
        reference.len(),
        candidate.len(),
    )?;
    if reference.is_empty() {
        return Err(Error::Empty("trajectory pairs"));
    }
    let mut terms = Vec::with_capacity(reference.len());
    for (z, x) in candidate.iter().zip(reference) {
        if z.diverged() || x.diverged() {
            terms.push(None);
            continue;
        }
        check_shape("rel_trajectory_difference", &z.states, &x.states)?;
        let norm = x.states.norm();
        if norm == 0.0 {
            return Err(Error::ZeroNorm("reference trajectory"));
        }
        let diff = (&z.states - &x.states).norm() / norm;
        terms.push(diff.is_finite().then_some(diff));
    }
    Ok(PairedMetric::from_terms(terms))
}

/// `cond(D^T D)` from the singular values of `D`; infinite when `D` is
/// numerically singular.
pub fn condition_number(d: &DataMatrix) -> Result<f64> {
    if d.matrix().iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroNorm("data matrix"));
    }
    Ok(squared_condition(&data_singular_values(d.matrix())?))
}

/// Split of the projected dynamics `x_breve_{k+1}` of a linear system into a
/// Markovian term, a memory term and an initial-condition term.
#[derive(Debug, Clone)]
pub struct MZDecomposition {
    pub markovian: DMatrix<f64>,
    pub memory: DMatrix<f64>,
    pub initial: DMatrix<f64>,
    /// `V^T x_k` for `k = 0..=K`.
    pub projected: DMatrix<f64>,
    pub a_par_par: DMatrix<f64>,
    pub a_par_perp: DMatrix<f64>,
    pub a_perp_par: DMatrix<f64>,
    pub a_perp_perp: DMatrix<f64>,
}

impl MZDecomposition {
    /// `markovian + memory + initial`, which equals `projected[:, 1..]`.
    pub fn sum(&self) -> DMatrix<f64> {
        &self.markovian + &self.memory + &self.initial
    }
}

/// Mori-Zwanzig decomposition of `x_{k+1} = A x_k` projected onto `basis`.
/// All terms are evaluated by recurrences, without matrix powers.
pub fn mori_zwanzig_decompose(
    a: &DMatrix<f64>,
    basis: &Basis,
    x0: &DVector<f64>,
    steps: usize,
) -> Result<MZDecomposition> {
    check_dim(
        "mori_zwanzig_decompose: square operator",
        a.nrows(),
        a.ncols(),
    )?;
    check_dim(
        "mori_zwanzig_decompose: basis rows",
        a.nrows(),
        basis.full_dim(),
    )?;
    check_dim("mori_zwanzig_decompose: initial state", a.nrows(), x0.len())?;
    let v = basis.matrix();
    let v_perp = orthonormal_complement(v);
    let n = basis.reduced_dim();
    let a_v = a * v;
    let a_vp = a * &v_perp;
    let a_par_par = v.tr_mul(&a_v);
    let a_par_perp = v.tr_mul(&a_vp);
    let a_perp_par = v_perp.tr_mul(&a_v);
    let a_perp_perp = v_perp.tr_mul(&a_vp);

    let mut projected = DMatrix::zeros(n, steps + 1);
    let mut x = x0.clone();
    projected.set_column(0, &v.tr_mul(&x));
    for k in 0..steps {
        x = a * &x;
        projected.set_column(k + 1, &v.tr_mul(&x));
    }

    let mut markovian = DMatrix::zeros(n, steps);
    let mut memory = DMatrix::zeros(n, steps);
    let mut initial = DMatrix::zeros(n, steps);
    let mut m = DVector::zeros(v_perp.ncols());
    let mut z = v_perp.tr_mul(x0);
    for k in 0..steps {
        let x_par = projected.column(k).into_owned();
        markovian.set_column(k, &(&a_par_par * &x_par));
        memory.set_column(k, &(&a_par_perp * &m));
        initial.set_column(k, &(&a_par_perp * &z));
        m = &a_perp_perp * &m + &a_perp_par * &x_par;
        z = &a_perp_perp * &z;
    }
    Ok(MZDecomposition {
        markovian,
        memory,
        initial,
        projected,
        a_par_par,
        a_par_perp,
        a_perp_par,
        a_perp_perp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::make_toy_linear;
    use crate::opinf::{assemble_data_matrix, DataSource};
    use nalgebra::dmatrix;

    fn traj(m: DMatrix<f64>) -> Trajectory {
        Trajectory::new(m)
    }

    #[test]
    fn closure_error_basics() {
        let a = dmatrix![1.0, 2.0; 3.0, 4.0];
        assert_eq!(closure_error(&a, &a).unwrap(), 0.0);
        let col = dmatrix![3.0; 4.0];
        assert_eq!(closure_error(&col, &DMatrix::zeros(2, 1)).unwrap(), 5.0);
        assert_eq!(
            closure_error_per_step(&a, &DMatrix::zeros(2, 2)).unwrap(),
            vec![10f64.sqrt(), 20f64.sqrt()]
        );
        assert!(closure_error(&a, &col).is_err());
    }

    #[test]
    fn state_error_is_zero_inside_span() {
        let basis = Basis::canonical(4, 2).unwrap();
        let x = DMatrix::from_fn(4, 5, |r, c| if r < 2 { (r + c + 1) as f64 } else { 0.0 });
        let z = basis.matrix().tr_mul(&x);
        let metric =
            avg_rel_state_error(std::slice::from_ref(&x), &[traj(z.clone())], &basis).unwrap();
        assert_eq!(metric.value, Some(0.0));
        let shifted = z.map(|v| v * 1.1);
        let metric =
            avg_rel_state_error(std::slice::from_ref(&x), &[traj(shifted)], &basis).unwrap();
        assert!((metric.value.unwrap() - 0.1).abs() < 1e-14);
    }

    #[test]
    fn diverged_pairs_are_counted_not_averaged() {
        let a = traj(dmatrix![1.0, 2.0]);
        let b = traj(dmatrix![1.0, 2.5]);
        let broken = Trajectory {
            states: dmatrix![1.0],
            diverged_at: Some(1),
        };
        let m = rel_trajectory_difference(&[a.clone(), broken], &[a.clone(), b.clone()]).unwrap();
        assert_eq!(m.value, Some(0.0));
        assert_eq!((m.counted, m.diverged), (1, 1));
        let swapped =
            rel_trajectory_difference(&[b.clone(), a.clone()], &[a.clone(), b.clone()]).unwrap();
        let forward = rel_trajectory_difference(&[a.clone(), b.clone()], &[b, a]).unwrap();
        assert!(swapped.value.unwrap() > 0.0);
        assert_eq!(swapped.counted, forward.counted);
    }

    #[test]
    fn pair_accumulator_matches_concatenation() {
        let x1 = dmatrix![1.0, 2.0; 0.5, 0.0];
        let x2 = dmatrix![3.0; -1.0];
        let z1 = x1.map(|v| v + 0.1);
        let z2 = x2.map(|v| v * 0.9);
        let mut acc = PairAccumulator::default();
        acc.add(&z1, &x1).unwrap();
        acc.add(&z2, &x2).unwrap();
        let cat = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
            DMatrix::from_fn(2, 3, |r, c| if c < 2 { a[(r, c)] } else { b[(r, 0)] })
        };
        let direct =
            rel_trajectory_difference(&[traj(cat(&z1, &z2))], &[traj(cat(&x1, &x2))]).unwrap();
        let streamed = average_pairs(&[acc]).unwrap();
        assert!((direct.value.unwrap() - streamed.value.unwrap()).abs() < 1e-15);
        let mut broken = acc;
        broken.mark_diverged();
        let m = average_pairs(&[acc, broken]).unwrap();
        assert_eq!((m.counted, m.diverged), (1, 1));
    }

    #[test]
    fn metrics_reject_empty_and_zero() {
        assert!(rel_trajectory_difference(&[], &[]).is_err());
        let zero = traj(DMatrix::zeros(1, 2));
        assert!(rel_trajectory_difference(
            std::slice::from_ref(&zero),
            std::slice::from_ref(&zero)
        )
        .is_err());
    }

    #[test]
    fn condition_number_examples() {
        let d = assemble_data_matrix(
            &dmatrix![1.0, 0.0; 0.0, 1e-3],
            &DMatrix::zeros(0, 2),
            1,
            DataSource::Projected,
        )
        .unwrap();
        assert!((condition_number(&d).unwrap() / 1e6 - 1.0).abs() < 1e-12);
        let zero = assemble_data_matrix(
            &DMatrix::zeros(2, 2),
            &DMatrix::zeros(0, 2),
            1,
            DataSource::Projected,
        )
        .unwrap();
        assert!(condition_number(&zero).is_err());
    }

    #[test]
    fn mz_identity_on_toy_system() {
        let fom = make_toy_linear(10, 0).unwrap();
        let basis = Basis::canonical(10, 2).unwrap();
        let x0 = DVector::from_fn(10, |i, _| 1.0 / (i + 1) as f64);
        let mz = mori_zwanzig_decompose(fom.operator(1), &basis, &x0, 100).unwrap();
        let target = mz.projected.columns(1, 100).into_owned();
        let err = (mz.sum() - &target).norm() / target.norm();
        assert!(err < 1e-11, "{err}");
        assert!(mz.memory.column(0).iter().all(|&v| v == 0.0));
        assert!(mz.initial.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn initial_term_vanishes_inside_span() {
        let fom = make_toy_linear(10, 3).unwrap();
        let basis = Basis::canonical(10, 2).unwrap();
        let mut x0 = DVector::zeros(10);
        x0[0] = 1.0;
        let mz = mori_zwanzig_decompose(fom.operator(1), &basis, &x0, 30).unwrap();
        assert!(mz.initial.amax() < 1e-15);
        assert!(mz.memory.column(0).amax() == 0.0);
        let k0 = &mz.a_par_par * mz.projected.column(0);
        assert!((mz.sum().column(0) - k0).amax() < 1e-15);
    }

    #[test]
    fn full_basis_has_no_memory() {
        let fom = make_toy_linear(5, 1).unwrap();
        let basis = Basis::canonical(5, 5).unwrap();
        let x0 = DVector::from_element(5, 1.0);
        let mz = mori_zwanzig_decompose(fom.operator(1), &basis, &x0, 10).unwrap();
        assert_eq!(mz.memory.amax(), 0.0);
        assert_eq!(mz.initial.amax(), 0.0);
    }
}
