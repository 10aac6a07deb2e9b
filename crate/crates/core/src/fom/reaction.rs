use nalgebra::DVector;

use super::FullOrderModel;
use crate::error::{Error, Result};

const REACTION_A: f64 = 0.1;
const REACTION_B: f64 = 2.7;
const REACTION_C: f64 = 1.8;

/// Taylor coefficients `[g0, g1, g2, g3]` about 0 of
/// `x -> -(a sin(mu) + 2) exp(-mu^2 b) exp(mu c x)`.
pub fn reaction_taylor_coefficients(mu: f64) -> [f64; 4] {
    let scale = -(REACTION_A * mu.sin() + 2.0) * (-(mu * mu) * REACTION_B).exp();
    let rate = mu * REACTION_C;
    [
        scale,
        scale * rate,
        scale * rate * rate / 2.0,
        scale * rate * rate * rate / 6.0,
    ]
}

/// Forward-Euler finite-difference discretization of the 2-D
/// diffusion-reaction problem on the unit square with homogeneous Neumann
/// boundaries:
///
/// ```text
/// x_t = kappa Lap(x) + s(xi) u(t) + g(x)
/// ```
///
/// with `s(xi) = 0.1 sin(2 pi xi_1) sin(2 pi xi_2)` and `g` the truncated
/// Taylor expansion from [`reaction_taylor_coefficients`]. The constant Taylor
/// term is driven by a second input channel that is held at one, so the input
/// is `[u(t), 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionDiffusion2d {
    points_per_dim: usize,
    mesh_width: f64,
    dt: f64,
    diffusivity: f64,
    degree: usize,
    coefficients: [f64; 4],
    source: DVector<f64>,
    parameter: [f64; 1],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionDiffusionConfig {
    pub points_per_dim: usize,
    pub dt: f64,
    /// Diffusion coefficient in front of the discrete Laplacian.
    pub diffusivity: f64,
    /// Truncation degree of the reaction term, 2 or 3.
    pub degree: usize,
}

impl Default for ReactionDiffusionConfig {
    fn default() -> Self {
        Self {
            points_per_dim: ReactionDiffusion2d::POINTS_PER_DIM,
            dt: ReactionDiffusion2d::DT,
            diffusivity: ReactionDiffusion2d::DIFFUSIVITY,
            degree: 3,
        }
    }
}

impl ReactionDiffusion2d {
    pub const POINTS_PER_DIM: usize = 64;
    pub const DT: f64 = 1e-2;
    pub const STEPS: usize = 10_000;
    /// Largest diffusivity for which forward Euler with `DT` is stable on the
    /// 64 x 64 grid is about 6.3e-3.
    pub const DIFFUSIVITY: f64 = 4e-3;
    pub const PARAM_RANGE: (f64, f64) = (1.0, 1.5);
    pub const INPUT_RANGE: (f64, f64) = (1.0, 1000.0);

    pub fn new(config: ReactionDiffusionConfig, mu: f64) -> Result<Self> {
        let (low, high) = Self::PARAM_RANGE;
        if !(low..=high).contains(&mu) {
            return Err(Error::ParameterOutOfRange {
                value: mu,
                low,
                high,
            });
        }
        if !(2..=3).contains(&config.degree) {
            return Err(Error::InvalidArgument(format!(
                "reaction degree must be 2 or 3, got {}",
                config.degree
            )));
        }
        if config.points_per_dim < 2 {
            return Err(Error::InvalidArgument(
                "diffusion-reaction grid needs at least 2 points per dimension".into(),
            ));
        }
        if !(config.dt > 0.0) || !(config.diffusivity >= 0.0) {
            return Err(Error::InvalidArgument(
                "time step must be positive and diffusivity non-negative".into(),
            ));
        }
        let g = config.points_per_dim;
        let h = 1.0 / (g - 1) as f64;
        let two_pi = 2.0 * std::f64::consts::PI;
        let source = DVector::from_fn(g * g, |idx, _| {
            let (i, j) = (idx % g, idx / g);
            0.1 * (two_pi * i as f64 * h).sin() * (two_pi * j as f64 * h).sin()
        });
        Ok(Self {
            points_per_dim: g,
            mesh_width: h,
            dt: config.dt,
            diffusivity: config.diffusivity,
            degree: config.degree,
            coefficients: reaction_taylor_coefficients(mu),
            source,
            parameter: [mu],
        })
    }

    pub fn coefficients(&self) -> [f64; 4] {
        self.coefficients
    }

    pub fn source(&self) -> &DVector<f64> {
        &self.source
    }

    /// Neumann Laplacian via mirrored ghost nodes.
    fn laplacian(&self, w: &DVector<f64>) -> DVector<f64> {
        let g = self.points_per_dim;
        let inv_h2 = 1.0 / (self.mesh_width * self.mesh_width);
        let mirror = |k: isize| -> usize {
            if k < 0 {
                (-k) as usize
            } else if k as usize >= g {
                2 * (g - 1) - k as usize
            } else {
                k as usize
            }
        };
        DVector::from_fn(g * g, |idx, _| {
            let (i, j) = ((idx % g) as isize, (idx / g) as isize);
            let at = |ii: isize, jj: isize| w[mirror(ii) + g * mirror(jj)];
            (at(i + 1, j) + at(i - 1, j) + at(i, j + 1) + at(i, j - 1) - 4.0 * w[idx]) * inv_h2
        })
    }

    fn linear(&self, w: &DVector<f64>) -> DVector<f64> {
        let lap = self.laplacian(w);
        let g1 = self.coefficients[1];
        DVector::from_fn(w.len(), |k, _| {
            w[k] + self.dt * (self.diffusivity * lap[k] + g1 * w[k])
        })
    }
}

impl FullOrderModel for ReactionDiffusion2d {
    fn state_dim(&self) -> usize {
        self.points_per_dim * self.points_per_dim
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn degree(&self) -> usize {
        self.degree
    }

    fn parameter(&self) -> &[f64] {
        &self.parameter
    }

    fn apply(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut out = self.linear(x);
        let [g0, _, g2, g3] = self.coefficients;
        let g3 = if self.degree >= 3 { g3 } else { 0.0 };
        for k in 0..out.len() {
            let v = x[k];
            out[k] += self.dt * (v * v * (g2 + g3 * v) + self.source[k] * u[0] + g0 * u[1]);
        }
        out
    }

    fn multilinear(&self, degree: usize, args: &[&DVector<f64>]) -> DVector<f64> {
        let n = self.state_dim();
        match degree {
            1 => self.linear(args[0]),
            2 => {
                let c = self.dt * self.coefficients[2];
                DVector::from_fn(n, |k, _| c * args[0][k] * args[1][k])
            }
            3 if self.degree >= 3 => {
                let c = self.dt * self.coefficients[3];
                DVector::from_fn(n, |k, _| c * args[0][k] * args[1][k] * args[2][k])
            }
            _ => DVector::zeros(n),
        }
    }

    fn input_action(&self, u: &DVector<f64>) -> DVector<f64> {
        let g0 = self.coefficients[0];
        DVector::from_fn(self.state_dim(), |k, _| {
            self.dt * (self.source[k] * u[0] + g0 * u[1])
        })
    }
}
