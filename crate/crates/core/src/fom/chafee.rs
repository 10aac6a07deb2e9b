use nalgebra::DVector;

use super::FullOrderModel;
use crate::error::{Error, Result};

/// Forward-Euler discretization of the Chafee-Infante equation
/// `x_t - x_xixi + x^3 - x = 0` on `(0, 1)` with `x(0) = u` and
/// `x_xi(1) = 0`.
///
/// Unknowns sit at `xi_j = (j + 1) h`, `h = 1 / N`, so the Dirichlet node is
/// eliminated into `B` and the last unknown is the Neumann node, handled with
/// a mirrored ghost value. The quadratic form exists but is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ChafeeInfante {
    grid_points: usize,
    mesh_width: f64,
    dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChafeeInfanteConfig {
    pub grid_points: usize,
    pub dt: f64,
}

impl Default for ChafeeInfanteConfig {
    fn default() -> Self {
        Self {
            grid_points: ChafeeInfante::STATE_DIM,
            dt: ChafeeInfante::DT,
        }
    }
}

impl ChafeeInfante {
    pub const STATE_DIM: usize = 128;
    pub const DT: f64 = 1e-5;
    pub const STEPS: usize = 400_000;
    pub const INPUT_RANGE: (f64, f64) = (0.0, 10.0);

    pub fn new(config: ChafeeInfanteConfig) -> Result<Self> {
        if config.grid_points < 2 {
            return Err(Error::InvalidArgument(
                "Chafee-Infante grid needs at least 2 unknowns".into(),
            ));
        }
        if !(config.dt > 0.0) {
            return Err(Error::InvalidArgument("time step must be positive".into()));
        }
        Ok(Self {
            grid_points: config.grid_points,
            mesh_width: 1.0 / config.grid_points as f64,
            dt: config.dt,
        })
    }

    /// The test input `u(t) = 25 (sin(pi t) + 1)`.
    pub fn test_input(t: f64) -> f64 {
        25.0 * ((std::f64::consts::PI * t).sin() + 1.0)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn diffusion(&self) -> f64 {
        self.dt / (self.mesh_width * self.mesh_width)
    }

    /// Linear part with the Dirichlet value `left` at the eliminated node.
    fn linear(&self, w: &DVector<f64>, left: f64) -> DVector<f64> {
        let n = self.grid_points;
        let d = self.diffusion();
        DVector::from_fn(n, |j, _| {
            let west = if j == 0 { left } else { w[j - 1] };
            let east = if j + 1 == n { w[n - 2] } else { w[j + 1] };
            w[j] + d * (east - 2.0 * w[j] + west) + self.dt * w[j]
        })
    }
}

impl FullOrderModel for ChafeeInfante {
    fn state_dim(&self) -> usize {
        self.grid_points
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn degree(&self) -> usize {
        3
    }

    fn parameter(&self) -> &[f64] {
        &[]
    }

    fn apply(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut out = self.linear(x, u[0]);
        for (o, &v) in out.iter_mut().zip(x.iter()) {
            *o -= self.dt * v * v * v;
        }
        out
    }

    fn multilinear(&self, degree: usize, args: &[&DVector<f64>]) -> DVector<f64> {
        match degree {
            1 => self.linear(args[0], 0.0),
            3 => DVector::from_fn(self.grid_points, |j, _| {
                -self.dt * args[0][j] * args[1][j] * args[2][j]
            }),
            _ => DVector::zeros(self.grid_points),
        }
    }

    fn input_action(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.grid_points);
        out[0] = self.diffusion() * u[0];
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::polynomial_step;

    #[test]
    fn cubic_form_is_pointwise() {
        let m = ChafeeInfante::new(ChafeeInfanteConfig::default()).unwrap();
        let w = DVector::from_fn(ChafeeInfante::STATE_DIM, |j, _| (j as f64 * 0.37).sin());
        let cubic = m.multilinear(3, &[&w, &w, &w]);
        for j in 0..ChafeeInfante::STATE_DIM {
            assert_eq!(cubic[j], -m.dt() * w[j] * w[j] * w[j]);
        }
        assert_eq!(
            m.multilinear(2, &[&w, &w]),
            DVector::zeros(ChafeeInfante::STATE_DIM)
        );
    }

    #[test]
    fn stencil_matches_multilinear_forms() {
        let m = ChafeeInfante::new(ChafeeInfanteConfig::default()).unwrap();
        for seed in 0..100u32 {
            let x = DVector::from_fn(ChafeeInfante::STATE_DIM, |j, _| {
                ((j as f64 + 1.0) * (seed as f64 + 0.5) * 0.731).sin() * 3.0
            });
            let u = DVector::from_vec(vec![seed as f64 / 10.0]);
            let f = m.apply(&x, &u);
            let g = polynomial_step(&m, &x, &u).unwrap();
            assert!((&f - &g).norm() <= 1e-12 * (1.0 + f.norm()));
        }
    }

    #[test]
    fn neumann_end_is_flat_for_constant_state() {
        // a constant state has zero discrete Laplacian away from the Dirichlet node
        let m = ChafeeInfante::new(ChafeeInfanteConfig::default()).unwrap();
        let x = DVector::from_element(ChafeeInfante::STATE_DIM, 0.5);
        let u = DVector::from_vec(vec![0.5]);
        let out = m.apply(&x, &u);
        let expected = 0.5 + m.dt() * (0.5 - 0.125);
        for v in out.iter() {
            assert!((v - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn test_input_values() {
        assert_eq!(ChafeeInfante::test_input(0.0), 25.0);
        assert!((ChafeeInfante::test_input(0.5) - 50.0).abs() < 1e-12);
    }
}
