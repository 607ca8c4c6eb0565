use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::grid::{DiskField, PolarGrid};
use crate::error::invalid;
use crate::geometry::WeightSpec;
use crate::linalg::{conjugate_gradient, Jacobi, LinearOperator, Preconditioner};
use crate::math::{cos, powf, sin};
use crate::spectral::{assemble_operator, solve_spectrum, CircleGrid};
use crate::{Error, Result};

/// Dirichlet data on `|x'| = R0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryData {
    Constant {
        value: f64,
    },
    /// The coordinate function `ξ_j` (1-based).
    Coordinate {
        j: usize,
    },
    Cosine {
        k: usize,
    },
    Sine {
        k: usize,
    },
    /// The `k`-th discrete eigenfunction of the angular operator on the
    /// same angular grid (`k = 1` is `Y₁`).
    Eigenmode {
        k: usize,
    },
    Samples {
        values: Vec<f64>,
    },
}

impl BoundaryData {
    /// Values at the angular cell centers of `grid`.
    pub fn sample(&self, spec: &WeightSpec, grid: &PolarGrid) -> Result<Vec<f64>> {
        let thetas = grid.thetas();
        Ok(match self {
            BoundaryData::Constant { value } => vec![*value; grid.n_theta],
            BoundaryData::Coordinate { j } => match j {
                1 => thetas.iter().map(|&t| cos(t)).collect(),
                2 => thetas.iter().map(|&t| sin(t)).collect(),
                _ => return Err(invalid!("coordinate index {j} must be 1 or 2 on the disk")),
            },
            BoundaryData::Cosine { k } => thetas.iter().map(|&t| cos(*k as f64 * t)).collect(),
            BoundaryData::Sine { k } => thetas.iter().map(|&t| sin(*k as f64 * t)).collect(),
            BoundaryData::Eigenmode { k } => {
                let circle = CircleGrid::new(grid.n_theta)?;
                let op = assemble_operator(spec, &circle)?;
                let spectrum = solve_spectrum(&op, k + 1)?;
                spectrum.eigenfunctions[*k].clone()
            }
            BoundaryData::Samples { values } => {
                if values.len() != grid.n_theta {
                    return Err(invalid!(
                        "{} boundary samples for {} angular cells",
                        values.len(),
                        grid.n_theta
                    ));
                }
                values.clone()
            }
        })
    }
}

/// The right-hand side field `F` of `div(δ∇v) = div F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Forcing {
    Zero,
    /// `amplitude · |x'|^exponent · e_component` (component 1-based).
    CartesianPower {
        component: usize,
        exponent: f64,
        amplitude: f64,
    },
    /// `amplitude · |x'|^exponent · ξ_coordinate · e_r`.
    RadialOdd {
        coordinate: usize,
        exponent: f64,
        amplitude: f64,
    },
}

impl Forcing {
    pub fn is_zero(&self) -> bool {
        match self {
            Forcing::Zero => true,
            Forcing::CartesianPower { amplitude, .. } | Forcing::RadialOdd { amplitude, .. } => {
                *amplitude == 0.0
            }
        }
    }

    /// Polar components `(F·e_r, F·e_θ)` at `(r, θ)`.
    pub fn polar(&self, r: f64, theta: f64) -> [f64; 2] {
        let (c, s) = (cos(theta), sin(theta));
        match *self {
            Forcing::Zero => [0.0, 0.0],
            Forcing::CartesianPower {
                component,
                exponent,
                amplitude,
            } => {
                let mag = amplitude * powf(r, exponent);
                if component == 1 {
                    [mag * c, -mag * s]
                } else {
                    [mag * s, mag * c]
                }
            }
            Forcing::RadialOdd {
                coordinate,
                exponent,
                amplitude,
            } => {
                let xi = if coordinate == 1 { c } else { s };
                [amplitude * powf(r, exponent) * xi, 0.0]
            }
        }
    }

    /// `|F|` at radius `r` and angle `θ`.
    pub fn magnitude(&self, r: f64, theta: f64) -> f64 {
        let [a, b] = self.polar(r, theta);
        libm::hypot(a, b)
    }

    /// Same field with the amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Forcing {
        let mut f = self.clone();
        match &mut f {
            Forcing::Zero => {}
            Forcing::CartesianPower { amplitude, .. } | Forcing::RadialOdd { amplitude, .. } => {
                *amplitude *= factor
            }
        }
        f
    }

    fn validate(&self) -> Result<()> {
        match self {
            Forcing::CartesianPower { component, .. }
            | Forcing::RadialOdd {
                coordinate: component,
                ..
            } if !(1..=2).contains(component) => {
                Err(invalid!("forcing component {component} must be 1 or 2"))
            }
            _ => Ok(()),
        }
    }
}

/// Finite-volume discretization of `div(δ∇v) = div F` with Dirichlet data.
///
/// Faces carry `coef · (v − v_neighbor)`; the outer boundary face couples
/// ring `n_r − 1` to the data at distance `h_r/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskSystem {
    pub grid: PolarGrid,
    pub eps: f64,
    /// Radial face between rings `i` and `i + 1`, `(n_r − 1) × n_theta`.
    pub radial: Vec<f64>,
    /// Angular face between cells `j` and `j + 1` of ring `i`.
    pub angular: Vec<f64>,
    /// Outer boundary face coefficient per angle.
    pub outer: Vec<f64>,
    pub boundary: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `−Σ F·n · area` per cell (already included in `rhs`).
    pub forcing_terms: Vec<f64>,
    /// `F·e_r · area` on the outer boundary faces.
    pub forcing_outer: Vec<f64>,
    pub diag: Vec<f64>,
    /// Smallest face value of `δ`.
    pub min_face_delta: f64,
}

pub fn assemble_disk_system(
    spec: &WeightSpec,
    eps: f64,
    grid: &PolarGrid,
    forcing: &Forcing,
    boundary: &[f64],
) -> Result<DiskSystem> {
    if spec.d != 3 {
        return Err(Error::UnsupportedDimension(spec.d));
    }
    if !(eps >= 0.0) {
        return Err(invalid!("eps = {eps} must be nonnegative"));
    }
    if boundary.len() != grid.n_theta {
        return Err(invalid!(
            "{} boundary values for {} angles",
            boundary.len(),
            grid.n_theta
        ));
    }
    forcing.validate()?;
    let (nr, nt) = (grid.n_r, grid.n_theta);
    let (hr, ht) = (grid.h_r(), grid.h_theta());
    let m = spec.m;
    let kc: Vec<f64> = (0..nt).map(|j| spec.angular(grid.theta(j))).collect();
    let kf: Vec<f64> = (0..nt).map(|j| spec.angular(grid.theta_face(j))).collect();
    let mut min_face = f64::INFINITY;

    let mut radial = vec![0.0; (nr - 1) * nt];
    for i in 0..nr - 1 {
        let rf = grid.r_face(i);
        let rm = powf(rf, m);
        for j in 0..nt {
            let delta = eps + kc[j] * rm;
            min_face = min_face.min(delta);
            radial[i * nt + j] = delta * rf * ht / hr;
        }
    }
    let r0 = grid.radius();
    let outer: Vec<f64> = (0..nt)
        .map(|j| {
            let delta = eps + kc[j] * powf(r0, m);
            min_face = min_face.min(delta);
            delta * r0 * ht / (0.5 * hr)
        })
        .collect();
    let mut angular = vec![0.0; nr * nt];
    for i in 0..nr {
        let r = grid.r(i);
        let rm = powf(r, m);
        for j in 0..nt {
            let delta = eps + kf[j] * rm;
            min_face = min_face.min(delta);
            angular[i * nt + j] = delta * hr / (r * ht);
        }
    }

    let mut forcing_terms = vec![0.0; nr * nt];
    let mut forcing_outer = vec![0.0; nt];
    if !forcing.is_zero() {
        for i in 0..nr {
            let r = grid.r(i);
            for j in 0..nt {
                let p = grid.index(i, j);
                let t = grid.theta(j);
                // Outward normal fluxes F·n·area through the four faces.
                let outer_r = grid.r_face(i);
                let out = forcing.polar(outer_r, t)[0] * outer_r * ht;
                let inner = if i == 0 {
                    0.0
                } else {
                    let ri = grid.r_face(i - 1);
                    forcing.polar(ri, t)[0] * ri * ht
                };
                let plus = forcing.polar(r, grid.theta_face(j))[1] * hr;
                let minus = forcing.polar(r, grid.theta_face((j + nt - 1) % nt))[1] * hr;
                forcing_terms[p] = -(out - inner + plus - minus);
                if i == nr - 1 {
                    forcing_outer[j] = out;
                }
            }
        }
    }

    let mut diag = vec![0.0; nr * nt];
    for i in 0..nr {
        for j in 0..nt {
            let p = grid.index(i, j);
            let mut d = angular[p] + angular[i * nt + (j + nt - 1) % nt];
            if i + 1 < nr {
                d += radial[i * nt + j];
            } else {
                d += outer[j];
            }
            if i > 0 {
                d += radial[(i - 1) * nt + j];
            }
            diag[p] = d;
        }
    }
    let mut rhs = forcing_terms.clone();
    for j in 0..nt {
        rhs[grid.index(nr - 1, j)] += outer[j] * boundary[j];
    }
    Ok(DiskSystem {
        grid: *grid,
        eps,
        radial,
        angular,
        outer,
        boundary: boundary.to_vec(),
        rhs,
        forcing_terms,
        forcing_outer,
        diag,
        min_face_delta: min_face,
    })
}

impl LinearOperator for DiskSystem {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (nr, nt) = (self.grid.n_r, self.grid.n_theta);
        for i in 0..nr {
            let row = i * nt;
            for j in 0..nt {
                let p = row + j;
                let jp = row + (j + 1) % nt;
                let jm = row + (j + nt - 1) % nt;
                let xp = x[p];
                let mut acc = self.diag[p] * xp;
                acc -= self.angular[p] * x[jp];
                acc -= self.angular[jm] * x[jm];
                if i + 1 < nr {
                    acc -= self.radial[p] * x[p + nt];
                }
                if i > 0 {
                    acc -= self.radial[p - nt] * x[p - nt];
                }
                y[p] = acc;
            }
        }
    }
}

impl DiskSystem {
    /// Net flux `Σ outer_j (g_j − v_j)` through the outer boundary.
    pub fn boundary_flux(&self, field: &DiskField) -> f64 {
        let last = self.grid.n_r - 1;
        (0..self.grid.n_theta)
            .map(|j| self.outer[j] * (self.boundary[j] - field.at(last, j)))
            .sum()
    }

    /// `∫_{∂B'} F·n`, the total source implied by the forcing.
    pub fn forcing_flux(&self) -> f64 {
        self.forcing_outer.iter().sum()
    }

    /// Coefficients as a dense matrix (tests and tiny grids only).
    pub fn dense(&self) -> Vec<f64> {
        let n = self.grid.len();
        let mut a = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for c in 0..n {
            e[c] = 1.0;
            self.apply(&e, &mut col);
            for r in 0..n {
                a[r * n + c] = col[r];
            }
            e[c] = 0.0;
        }
        a
    }
}

/// A linear solver for [`DiskSystem`].
pub trait DiskSolver {
    fn solve_system(&self, system: &DiskSystem, initial: Option<&[f64]>) -> Result<DiskField>;

    fn name(&self) -> String {
        String::from("cg")
    }
}

/// Conjugate gradients with a caller-supplied preconditioner.
pub fn solve_with<P: Preconditioner + ?Sized>(
    system: &DiskSystem,
    pc: &P,
    tol: f64,
    max_iter: usize,
    initial: Option<&[f64]>,
) -> Result<DiskField> {
    let n = system.grid.len();
    let mut x = match initial {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => {
            return Err(invalid!(
                "initial guess has {} entries, expected {n}",
                x0.len()
            ))
        }
        None => {
            // Extend the boundary data radially.
            let mut x = vec![0.0; n];
            for i in 0..system.grid.n_r {
                for j in 0..system.grid.n_theta {
                    x[system.grid.index(i, j)] = system.boundary[j];
                }
            }
            x
        }
    };
    let out = conjugate_gradient(system, pc, &system.rhs, &mut x, tol, max_iter)?;
    Ok(DiskField {
        grid: system.grid,
        values: x,
        eps: system.eps,
        boundary: system.boundary.clone(),
        solve_residual: out.relative_residual,
        iterations: out.iterations,
    })
}

/// CG with the diagonal preconditioner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiCg {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for JacobiCg {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200_000,
        }
    }
}

impl DiskSolver for JacobiCg {
    fn solve_system(&self, system: &DiskSystem, initial: Option<&[f64]>) -> Result<DiskField> {
        solve_with(
            system,
            &Jacobi::new(&system.diag),
            self.tol,
            self.max_iter,
            initial,
        )
    }

    fn name(&self) -> String {
        String::from("cg+jacobi")
    }
}

/// Solves with diagonal preconditioning (`tol` on the relative residual).
pub fn solve_disk(system: &DiskSystem, tol: f64, max_iter: usize) -> Result<DiskField> {
    JacobiCg { tol, max_iter }.solve_system(system, None)
}

/// Assembles and solves in one call.
pub fn solve_problem<S: DiskSolver + ?Sized>(
    solver: &S,
    spec: &WeightSpec,
    eps: f64,
    grid: &PolarGrid,
    forcing: &Forcing,
    boundary: &[f64],
) -> Result<DiskField> {
    let system = assemble_disk_system(spec, eps, grid, forcing, boundary)?;
    solver.solve_system(&system, None)
}
