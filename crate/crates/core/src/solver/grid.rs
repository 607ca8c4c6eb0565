use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::math::{cos, sin, sqrt, TAU};
use crate::{Error, Result};

/// Cell-centered polar grid on the disk `|x'| < R0`: ring centers
/// `r_i = (i + ½)h_r`, angular centers `θ_j = (j + ½)h_θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    pub n_r: usize,
    pub n_theta: usize,
    #[serde(rename = "R0")]
    pub r0: f64,
}

impl PolarGrid {
    pub fn new(n_r: usize, n_theta: usize, r0: f64) -> Result<Self> {
        if n_r < 32 || n_theta < 32 {
            return Err(invalid!(
                "polar grid needs n_r, n_theta ≥ 32 (got {n_r} × {n_theta})"
            ));
        }
        if !n_theta.is_multiple_of(2) {
            return Err(invalid!("n_theta = {n_theta} must be even"));
        }
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(invalid!("R0 = {r0} must be positive"));
        }
        Ok(Self { n_r, n_theta, r0 })
    }

    pub fn radius(&self) -> f64 {
        self.r0
    }

    pub fn h_r(&self) -> f64 {
        self.radius() / self.n_r as f64
    }

    pub fn h_theta(&self) -> f64 {
        TAU / self.n_theta as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h_r()
    }

    /// Outer face of ring `i`.
    pub fn r_face(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.h_r()
    }

    pub fn theta(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h_theta()
    }

    /// Face between angular cells `j` and `j + 1`.
    pub fn theta_face(&self, j: usize) -> f64 {
        (j as f64 + 1.0) * self.h_theta()
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n_theta).map(|j| self.theta(j)).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.n_r).map(|i| self.r(i)).collect()
    }
}

/// Discrete solution on a polar grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskField {
    pub grid: PolarGrid,
    /// Row-major `values[i * n_theta + j]`.
    pub values: Vec<f64>,
    pub eps: f64,
    /// Dirichlet data at `(R0, θ_j)`.
    pub boundary: Vec<f64>,
    pub solve_residual: f64,
    pub iterations: usize,
}

impl DiskField {
    /// Samples `f(r, θ)` at cell centers and `g(θ) = f(R0, θ)` on the boundary.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: PolarGrid, f: F) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_r {
            for j in 0..grid.n_theta {
                values.push(f(grid.r(i), grid.theta(j)));
            }
        }
        let boundary = (0..grid.n_theta)
            .map(|j| f(grid.radius(), grid.theta(j)))
            .collect();
        Self {
            grid,
            values,
            eps: 0.0,
            boundary,
            solve_residual: 0.0,
            iterations: 0,
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn ring(&self, i: usize) -> &[f64] {
        let n = self.grid.n_theta;
        &self.values[i * n..(i + 1) * n]
    }

    /// Values on the circle of radius `rho`, linearly interpolated between
    /// ring centers (and the boundary data beyond the last ring).
    pub fn circle(&self, rho: f64) -> Result<Vec<f64>> {
        let g = &self.grid;
        let first = g.r(0);
        let last = g.r(g.n_r - 1);
        let outer = g.radius();
        if !(rho >= first * (1.0 - 1e-12) && rho <= outer * (1.0 + 1e-12)) {
            return Err(Error::Domain(alloc::format!(
                "radius {rho} outside the resolved range [{first}, {outer}]"
            )));
        }
        if rho >= last {
            let t = ((rho - last) / (outer - last)).min(1.0);
            return Ok(self
                .ring(g.n_r - 1)
                .iter()
                .zip(&self.boundary)
                .map(|(a, b)| a + t * (b - a))
                .collect());
        }
        let x = (rho / g.h_r() - 0.5).max(0.0);
        let i = (libm::floor(x) as usize).min(g.n_r - 2);
        let t = x - i as f64;
        Ok(self
            .ring(i)
            .iter()
            .zip(self.ring(i + 1))
            .map(|(a, b)| a + t * (b - a))
            .collect())
    }

    /// Cell-centered gradient `(∂_r v, r⁻¹∂_θ v)` at `(r_i, θ_j)`.
    ///
    /// The radial derivative at ring 0 uses the value across the origin.
    pub fn gradient(&self, i: usize, j: usize) -> [f64; 2] {
        let g = &self.grid;
        let n = g.n_theta;
        let h = g.h_r();
        let dr = if i == 0 {
            let across = self.at(0, (j + n / 2) % n);
            if g.n_r > 1 {
                (self.at(1, j) - across) / (2.0 * h)
            } else {
                0.0
            }
        } else if i + 1 < g.n_r {
            (self.at(i + 1, j) - self.at(i - 1, j)) / (2.0 * h)
        } else {
            // Nodes at r − h, r, r + h/2 (the boundary).
            let (a, b, c) = (self.at(i - 1, j), self.at(i, j), self.boundary[j]);
            (-a / 3.0 - b + 4.0 * c / 3.0) / h
        };
        let jp = (j + 1) % n;
        let jm = (j + n - 1) % n;
        let dt = (self.at(i, jp) - self.at(i, jm)) / (2.0 * g.r(i) * g.h_theta());
        [dr, dt]
    }

    pub fn gradient_norm(&self, i: usize, j: usize) -> f64 {
        let [a, b] = self.gradient(i, j);
        sqrt(a * a + b * b)
    }

    /// Cartesian position of a cell center.
    pub fn position(&self, i: usize, j: usize) -> [f64; 2] {
        let (r, t) = (self.grid.r(i), self.grid.theta(j));
        [r * cos(t), r * sin(t)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
