//! Full-order polynomial dynamical systems.
//!
//! A model is a discrete map `x_{k+1} = f(x_k, u_k; mu)` that is polynomial
//! of degree `l` in the state:
//!
//! ```text
//! f(x, u) = L_1(x) + L_2(x, x) + ... + L_l(x, ..., x) + B u
//! ```
//!
//! where each `L_i` is a symmetric multilinear form. Exposing the forms rather
//! than the matrices `A_i` keeps Galerkin projection cheap for stencil and
//! pointwise nonlinearities, where `A_i` would have `binomial(N+i-1, i)`
//! columns.

mod burgers;
mod chafee;
mod inputs;
mod polynomial;
mod reaction;

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

pub use burgers::{Burgers, BurgersConfig};
pub use chafee::{ChafeeInfante, ChafeeInfanteConfig};
pub use inputs::{
    constant_input_trajectory, random_input_trajectory, with_constant_channel, InputTrajectory,
};
pub use polynomial::{
    make_toy_linear, random_polynomial_system, spectral_radius, PolynomialSystem, RandomSystemSpec,
    TOY_SCALE, TOY_STATE_DIM, TOY_STEPS,
};
pub use reaction::{reaction_taylor_coefficients, ReactionDiffusion2d, ReactionDiffusionConfig};

/// A discrete-time polynomial system.
pub trait FullOrderModel: Send + Sync {
    fn state_dim(&self) -> usize;

    fn input_dim(&self) -> usize;

    /// Polynomial degree `l`.
    fn degree(&self) -> usize;

    /// Parameter vector `mu` the model was built for (empty if none).
    fn parameter(&self) -> &[f64];

    /// One time step `f(x, u)`. Dimensions are assumed valid; use [`step`] for
    /// a checked call.
    fn apply(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// Symmetric multilinear form `L_degree(args[0], ..., args[degree-1])`.
    fn multilinear(&self, degree: usize, args: &[&DVector<f64>]) -> DVector<f64>;

    /// Input operator action `B u`.
    fn input_action(&self, u: &DVector<f64>) -> DVector<f64>;
}

impl<T: FullOrderModel + ?Sized> FullOrderModel for Box<T> {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }

    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn degree(&self) -> usize {
        (**self).degree()
    }

    fn parameter(&self) -> &[f64] {
        (**self).parameter()
    }

    fn apply(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        (**self).apply(x, u)
    }

    fn multilinear(&self, degree: usize, args: &[&DVector<f64>]) -> DVector<f64> {
        (**self).multilinear(degree, args)
    }

    fn input_action(&self, u: &DVector<f64>) -> DVector<f64> {
        (**self).input_action(u)
    }
}

/// Checked single step of `model`.
pub fn step<M: FullOrderModel + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim("step: state", model.state_dim(), x.len())?;
    check_dim("step: input", model.input_dim(), u.len())?;
    Ok(model.apply(x, u))
}

/// `sum_i L_i(x, ..., x) + B u`, the step evaluated through the multilinear
/// forms.
pub fn polynomial_step<M: FullOrderModel + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim("polynomial_step: state", model.state_dim(), x.len())?;
    check_dim("polynomial_step: input", model.input_dim(), u.len())?;
    let mut out = model.input_action(u);
    for degree in 1..=model.degree() {
        let args = vec![x; degree];
        out += model.multilinear(degree, &args);
    }
    Ok(out)
}

/// A state trajectory stored column by column.
///
/// A simulation of `K` steps holds `K + 1` columns `x_0, ..., x_K`. When a
/// non-finite state is produced at index `k`, only `x_0, ..., x_{k-1}` are
/// kept and `diverged_at = Some(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: DMatrix<f64>,
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn new(states: DMatrix<f64>) -> Self {
        Self {
            states,
            diverged_at: None,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.states.nrows()
    }

    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.states.ncols() == 0
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// `[x_0, ..., x_{K-1}]` for a trajectory with `K + 1` columns.
    pub fn inputs_side(&self) -> DMatrix<f64> {
        let k = self.len().saturating_sub(1);
        self.states.columns(0, k).into_owned()
    }

    /// `[x_1, ..., x_K]` for a trajectory with `K + 1` columns.
    pub fn outputs_side(&self) -> DMatrix<f64> {
        let k = self.len().saturating_sub(1);
        self.states.columns(1.min(self.len()), k).into_owned()
    }

    /// Writes the trajectory as CSV with header `k,x0,...,x{N-1}`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = String::from("k");
        for i in 0..self.state_dim() {
            header.push_str(&format!(",x{i}"));
        }
        writeln!(out, "{header}")?;
        for (k, col) in self.states.column_iter().enumerate() {
            let mut line = k.to_string();
            for v in col.iter() {
                line.push(',');
                line.push_str(&format_float(*v));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Reads a trajectory written by [`Trajectory::write_csv`].
    pub fn read_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Empty("trajectory CSV"))?;
        let dim = header.split(',').count().saturating_sub(1);
        let mut values = Vec::new();
        let mut count = 0;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            check_dim("trajectory CSV row", dim + 1, fields.len())?;
            for f in &fields[1..] {
                values.push(parse_float(f)?);
            }
            count += 1;
        }
        Ok(Self::new(DMatrix::from_vec(dim, count, values)))
    }
}

/// Formats a float with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn parse_float(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

/// Time steps `model` for `steps` steps from `x0` with inputs `inputs`
/// (`p x >= steps`). Stops at the first non-finite state.
pub fn simulate<M: FullOrderModel + ?Sized>(
    model: &M,
    x0: &DVector<f64>,
    inputs: &DMatrix<f64>,
    steps: usize,
) -> Result<Trajectory> {
    check_dim("simulate: initial state", model.state_dim(), x0.len())?;
    check_dim("simulate: input rows", model.input_dim(), inputs.nrows())?;
    if inputs.ncols() < steps {
        return Err(Error::DimensionMismatch {
            context: "simulate: input columns",
            expected: steps,
            found: inputs.ncols(),
        });
    }
    run_steps(x0, inputs, steps, |x, u| model.apply(x, u))
}

/// Shared time-stepping loop with divergence detection.
pub(crate) fn run_steps<F>(
    x0: &DVector<f64>,
    inputs: &DMatrix<f64>,
    steps: usize,
    mut advance: F,
) -> Result<Trajectory>
where
    F: FnMut(&DVector<f64>, &DVector<f64>) -> DVector<f64>,
{
    let dim = x0.len();
    let mut states = DMatrix::zeros(dim, steps + 1);
    if !x0.iter().all(|v| v.is_finite()) {
        return Ok(Trajectory {
            states: DMatrix::zeros(dim, 0),
            diverged_at: Some(0),
        });
    }
    states.set_column(0, x0);
    let mut current = x0.clone();
    for k in 0..steps {
        let u = inputs.column(k).into_owned();
        let next = advance(&current, &u);
        if !next.iter().all(|v| v.is_finite()) {
            return Ok(Trajectory {
                states: states.columns(0, k + 1).into_owned(),
                diverged_at: Some(k + 1),
            });
        }
        states.set_column(k + 1, &next);
        current = next;
    }
    Ok(Trajectory::new(states))
}

/// All permutations of `0..len` (used to symmetrize multilinear forms).
pub(crate) fn permutations(len: usize) -> Vec<Vec<usize>> {
    if len == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(len - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, len - 1);
            out.push(p);
        }
    }
    out
}
