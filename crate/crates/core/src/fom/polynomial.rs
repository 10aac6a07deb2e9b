use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{permutations, FullOrderModel};
use crate::error::{check_dim, Error, Result};
use crate::polytensor::{compressed_dim, enumerate_multisets, fill_compressed_power};

/// Default state dimension of the toy linear system.
pub const TOY_STATE_DIM: usize = 10;
/// Default number of time steps of the toy linear system.
pub const TOY_STEPS: usize = 100;
/// Spectral radius the toy operator is rescaled to.
pub const TOY_SCALE: f64 = 0.95;

/// A polynomial system given by explicit compressed operators
/// `A_i in R^{N x N_i}` and `B in R^{N x p}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSystem {
    operators: Vec<DMatrix<f64>>,
    input: DMatrix<f64>,
    parameter: Vec<f64>,
    /// Per degree, the multisets over `N` modes in canonical order.
    monomials: Vec<Vec<Vec<usize>>>,
}

impl PolynomialSystem {
    pub fn new(
        operators: Vec<DMatrix<f64>>,
        input: DMatrix<f64>,
        parameter: Vec<f64>,
    ) -> Result<Self> {
        let first = operators
            .first()
            .ok_or(Error::Empty("operator list of a polynomial system"))?;
        let n = first.nrows();
        let mut monomials = Vec::with_capacity(operators.len());
        for (idx, op) in operators.iter().enumerate() {
            let degree = idx + 1;
            check_dim("PolynomialSystem: operator rows", n, op.nrows())?;
            check_dim(
                "PolynomialSystem: operator columns",
                compressed_dim(n, degree)?,
                op.ncols(),
            )?;
            monomials.push(
                enumerate_multisets(n, degree)?
                    .into_iter()
                    .map(|m| m.entries().to_vec())
                    .collect(),
            );
        }
        check_dim("PolynomialSystem: input rows", n, input.nrows())?;
        Ok(Self {
            operators,
            input,
            parameter,
            monomials,
        })
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
}

impl FullOrderModel for PolynomialSystem {
    fn state_dim(&self) -> usize {
        self.input.nrows()
    }

    fn input_dim(&self) -> usize {
        self.input.ncols()
    }

    fn degree(&self) -> usize {
        self.operators.len()
    }

    fn parameter(&self) -> &[f64] {
        &self.parameter
    }

    fn apply(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.input * u;
        let mut power = Vec::new();
        for (idx, op) in self.operators.iter().enumerate() {
            power.resize(op.ncols(), 0.0);
            fill_compressed_power(x.as_slice(), idx + 1, &mut power);
            out.gemv(1.0, op, &DVector::from_column_slice(&power), 1.0);
        }
        out
    }

    fn multilinear(&self, degree: usize, args: &[&DVector<f64>]) -> DVector<f64> {
        assert_eq!(
            args.len(),
            degree,
            "multilinear form needs one argument per degree"
        );
        let op = &self.operators[degree - 1];
        let perms = permutations(degree);
        let weight = 1.0 / perms.len() as f64;
        let mut out = DVector::zeros(self.state_dim());
        // polarization: the monomial x_a1 ... x_ai becomes the average over
        // assignments of the indices a_j to the arguments
        for (col, alpha) in self.monomials[degree - 1].iter().enumerate() {
            let coeff: f64 = perms
                .iter()
                .map(|perm| {
                    perm.iter()
                        .enumerate()
                        .map(|(slot, &which)| args[slot][alpha[which]])
                        .product::<f64>()
                })
                .sum::<f64>()
                * weight;
            if coeff != 0.0 {
                out.axpy(coeff, &op.column(col), 1.0);
            }
        }
        out
    }

    fn input_action(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.input * u
    }
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// The toy autonomous linear system: `A_1` has entries drawn uniformly from
/// `[0, 1]` and is rescaled so that its spectral radius is [`TOY_SCALE`].
pub fn make_toy_linear(state_dim: usize, seed: u64) -> Result<PolynomialSystem> {
    if state_dim == 0 {
        return Err(Error::InvalidArgument("toy system needs N >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let raw = DMatrix::from_fn(state_dim, state_dim, |_, _| unit.sample(&mut rng));
    let rho = spectral_radius(&raw);
    let a1 = raw * (TOY_SCALE / rho);
    PolynomialSystem::new(vec![a1], DMatrix::zeros(state_dim, 0), Vec::new())
}

/// Shape and scaling of a random polynomial system.
#[derive(Debug, Clone)]
pub struct RandomSystemSpec {
    pub state_dim: usize,
    pub input_dim: usize,
    pub degree: usize,
    /// Spectral norm of the linear operator.
    pub linear_norm: f64,
    /// Frobenius norm of each higher-degree operator.
    pub nonlinear_norm: f64,
    /// Fraction of nonzero entries in the higher-degree operators.
    pub density: f64,
    pub seed: u64,
}

impl Default for RandomSystemSpec {
    fn default() -> Self {
        Self {
            state_dim: 8,
            input_dim: 1,
            degree: 2,
            linear_norm: 0.9,
            nonlinear_norm: 0.3,
            density: 1.0,
            seed: 0,
        }
    }
}

/// A random polynomial system with a contractive linear part.
pub fn random_polynomial_system(spec: &RandomSystemSpec) -> Result<PolynomialSystem> {
    if spec.state_dim == 0 || spec.degree == 0 {
        return Err(Error::InvalidArgument(
            "random system needs N >= 1 and degree >= 1".into(),
        ));
    }
    let n = spec.state_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sym = Uniform::new(-1.0, 1.0).expect("valid range");
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let mut operators = Vec::with_capacity(spec.degree);
    let linear = DMatrix::from_fn(n, n, |_, _| sym.sample(&mut rng));
    let norm = linear.clone().svd(false, false).singular_values.max();
    operators.push(linear * (spec.linear_norm / norm));
    for degree in 2..=spec.degree {
        let cols = compressed_dim(n, degree)?;
        let mut op = DMatrix::from_fn(n, cols, |_, _| {
            let keep = unit.sample(&mut rng) < spec.density;
            let value = sym.sample(&mut rng);
            if keep {
                value
            } else {
                0.0
            }
        });
        let fro = op.norm();
        if fro > 0.0 {
            op *= spec.nonlinear_norm / fro;
        }
        operators.push(op);
    }
    let input = DMatrix::from_fn(n, spec.input_dim, |_, _| sym.sample(&mut rng));
    PolynomialSystem::new(operators, input, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::{polynomial_step, simulate};

    #[test]
    fn toy_is_stable_and_deterministic() {
        let a = make_toy_linear(TOY_STATE_DIM, 7).unwrap();
        let b = make_toy_linear(TOY_STATE_DIM, 7).unwrap();
        assert_eq!(a, b);
        let rho = spectral_radius(a.operator(1));
        assert!(rho < 1.0);
        assert!((rho - TOY_SCALE).abs() < 1e-12);
        assert!(a.operator(1).iter().all(|&v| v >= 0.0));
        assert_ne!(a, make_toy_linear(TOY_STATE_DIM, 8).unwrap());
    }

    #[test]
    fn toy_origin_is_fixed() {
        let a = make_toy_linear(TOY_STATE_DIM, 1).unwrap();
        let out = a.apply(&DVector::zeros(TOY_STATE_DIM), &DVector::zeros(0));
        assert_eq!(out, DVector::zeros(TOY_STATE_DIM));
    }

    #[test]
    fn toy_norm_bounded_by_power_iteration_estimate() {
        // ||A^k x0|| <= ||A^k|| ||x0||; the bound uses the exact matrix power
        // norms, an independent route from the time-stepping loop.
        let sys = make_toy_linear(TOY_STATE_DIM, 3).unwrap();
        let mut x0 = DVector::zeros(TOY_STATE_DIM);
        x0[0] = 1.0;
        let traj = simulate(&sys, &x0, &DMatrix::zeros(0, TOY_STEPS), TOY_STEPS).unwrap();
        let a = sys.operator(1);
        let mut power = DMatrix::identity(TOY_STATE_DIM, TOY_STATE_DIM);
        for k in 0..=TOY_STEPS {
            let bound = power.clone().svd(false, false).singular_values.max();
            assert!(traj.states.column(k).norm() <= bound * (1.0 + 1e-12) + 1e-300);
            power = a * power;
        }
        // eventually decays with rate rho
        assert!(traj.states.column(TOY_STEPS).norm() < 1.0);
    }

    #[test]
    fn multilinear_forms_are_symmetric_and_consistent() {
        let sys = random_polynomial_system(&RandomSystemSpec {
            state_dim: 5,
            degree: 3,
            input_dim: 2,
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        let a = DVector::from_vec(vec![0.3, -0.2, 0.9, 0.1, -0.5]);
        let b = DVector::from_vec(vec![-0.7, 0.4, 0.2, 0.8, 0.05]);
        let c = DVector::from_vec(vec![0.6, 0.6, -0.1, 0.3, 0.2]);
        let abc = sys.multilinear(3, &[&a, &b, &c]);
        for args in [[&b, &a, &c], [&c, &b, &a], [&a, &c, &b]] {
            let other = sys.multilinear(3, &args);
            assert!((&abc - other).norm() <= 1e-14 * abc.norm());
        }
        let u = DVector::from_vec(vec![0.5, -1.0]);
        let direct = sys.apply(&a, &u);
        let forms = polynomial_step(&sys, &a, &u).unwrap();
        assert!((&direct - forms).norm() <= 1e-12 * (1.0 + direct.norm()));
    }

    #[test]
    fn rejects_misshaped_operators() {
        let bad = PolynomialSystem::new(
            vec![DMatrix::zeros(3, 3), DMatrix::zeros(3, 5)],
            DMatrix::zeros(3, 1),
            Vec::new(),
        );
        assert!(bad.is_err());
    }
}
