use nalgebra::DVector;

use super::FullOrderModel;
use crate::error::{Error, Result};

/// Forward-Euler finite-difference discretization of the viscous Burgers
/// equation `x_t + x x_xi - mu x_xixi = 0` on `(-1, 1)` with Dirichlet data
/// `x(-1) = u`, `x(1) = -u`.
///
/// The grid has `grid_points` equidistant nodes including both boundary
/// nodes. The boundary nodes are states whose update is `x_0 <- u`,
/// `x_{N-1} <- -u`; interior nodes read them through the stencil. This keeps
/// the map exactly polynomial with `A_2` and `B` independent of `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct Burgers {
    grid_points: usize,
    mesh_width: f64,
    dt: f64,
    parameter: [f64; 1],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersConfig {
    pub grid_points: usize,
    pub dt: f64,
}

impl Default for BurgersConfig {
    fn default() -> Self {
        Self {
            grid_points: Burgers::STATE_DIM,
            dt: Burgers::DT,
        }
    }
}

impl Burgers {
    pub const STATE_DIM: usize = 128;
    pub const DT: f64 = 1e-4;
    pub const STEPS: usize = 10_000;
    pub const PARAM_RANGE: (f64, f64) = (0.1, 1.0);
    pub const INPUT_RANGE: (f64, f64) = (0.0, 10.0);

    pub fn new(config: BurgersConfig, mu: f64) -> Result<Self> {
        let (low, high) = Self::PARAM_RANGE;
        if !(low..=high).contains(&mu) {
            return Err(Error::ParameterOutOfRange {
                value: mu,
                low,
                high,
            });
        }
        if config.grid_points < 3 {
            return Err(Error::InvalidArgument(
                "Burgers grid needs at least 3 nodes".into(),
            ));
        }
        if !(config.dt > 0.0) {
            return Err(Error::InvalidArgument("time step must be positive".into()));
        }
        Ok(Self {
            grid_points: config.grid_points,
            mesh_width: 2.0 / (config.grid_points - 1) as f64,
            dt: config.dt,
            parameter: [mu],
        })
    }

    pub fn mu(&self) -> f64 {
        self.parameter[0]
    }

    pub fn mesh_width(&self) -> f64 {
        self.mesh_width
    }

    fn diffusion(&self) -> f64 {
        self.dt * self.mu() / (self.mesh_width * self.mesh_width)
    }

    fn convection(&self) -> f64 {
        self.dt / (2.0 * self.mesh_width)
    }
}

impl FullOrderModel for Burgers {
    fn state_dim(&self) -> usize {
        self.grid_points
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn degree(&self) -> usize {
        2
    }

    fn parameter(&self) -> &[f64] {
        &self.parameter
    }

    fn apply(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let n = self.grid_points;
        let d = self.diffusion();
        let c = self.convection();
        let mut out = DVector::zeros(n);
        for j in 1..n - 1 {
            let (left, mid, right) = (x[j - 1], x[j], x[j + 1]);
            out[j] = mid + d * (right - 2.0 * mid + left) - c * mid * (right - left);
        }
        out[0] = u[0];
        out[n - 1] = -u[0];
        out
    }

    fn multilinear(&self, degree: usize, args: &[&DVector<f64>]) -> DVector<f64> {
        let n = self.grid_points;
        let mut out = DVector::zeros(n);
        match degree {
            1 => {
                let w = args[0];
                let d = self.diffusion();
                for j in 1..n - 1 {
                    out[j] = w[j] + d * (w[j + 1] - 2.0 * w[j] + w[j - 1]);
                }
            }
            2 => {
                let (a, b) = (args[0], args[1]);
                let c = 0.5 * self.convection();
                for j in 1..n - 1 {
                    out[j] = -c * (a[j] * (b[j + 1] - b[j - 1]) + b[j] * (a[j + 1] - a[j - 1]));
                }
            }
            _ => {}
        }
        out
    }

    fn input_action(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.grid_points;
        let mut out = DVector::zeros(n);
        out[0] = u[0];
        out[n - 1] = -u[0];
        out
    }
}
