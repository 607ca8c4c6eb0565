use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::grid::PolarGrid;
use super::measure::{max_gradient_within, omega_profile, verify_oscillation_decay, DecayProfile};
use super::system::{assemble_disk_system, BoundaryData, DiskSolver, Forcing};
use crate::error::invalid;
use crate::exponents::alpha_pm;
use crate::geometry::{weighted_norm, NormSpec, WeightSpec};
use crate::linalg::jacobi_eigen;
use crate::math::{cos, ln, powf, sin, sqrt, TAU};
use crate::radial::fit_leading_coefficient;
use crate::regression::{fit_loglog, RateFit};
use crate::spectral::{
    assemble_operator, parity_analysis, solve_spectrum, CircleGrid, ParityReport,
};
use crate::{Error, Result};

/// `n` log-spaced values from `a` to `b` inclusive.
pub fn log_spaced(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (ln(a), ln(b));
    (0..n)
        .map(|i| libm::exp(la + (lb - la) * i as f64 / (n - 1) as f64))
        .collect()
}

/// `(λ_k, α₊(λ_k))` from the angular operator on `cells` cells.
pub fn mode_exponent(spec: &WeightSpec, k: usize, cells: usize) -> Result<(f64, f64)> {
    let op = assemble_operator(spec, &CircleGrid::new(cells)?)?;
    let s = solve_spectrum(&op, k + 1)?;
    let lambda = s.eigenvalues[k];
    Ok((lambda, alpha_pm(lambda, spec.d, spec.m)?.1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub eps: f64,
    pub profile: DecayProfile,
    pub fit: RateFit,
    pub predicted_alpha: f64,
    pub solve_residual: f64,
    pub iterations: usize,
}

/// Solves with homogeneous forcing and fits `ω(ρ)` on `rho`.
pub fn decay_experiment<S: DiskSolver + ?Sized>(
    solver: &S,
    spec: &WeightSpec,
    eps: f64,
    grid: &PolarGrid,
    boundary: &BoundaryData,
    rho: &[f64],
    predicted_alpha: f64,
) -> Result<DecayReport> {
    let g = boundary.sample(spec, grid)?;
    let system = assemble_disk_system(spec, eps, grid, &Forcing::Zero, &g)?;
    let field = solver.solve_system(&system, None)?;
    let profile = omega_profile(&field, spec, rho, None)?;
    let fit = verify_oscillation_decay(&profile, predicted_alpha)?;
    Ok(DecayReport {
        eps,
        profile,
        fit,
        predicted_alpha,
        solve_residual: field.solve_residual,
        iterations: field.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eps: f64,
    /// `probe · ε^{1/m}`.
    pub probe_radius: f64,
    pub max_gradient: f64,
    pub solve_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub fit: RateFit,
    pub predicted_slope: f64,
    /// Set when some `ε` is too large for the thin-gap regime.
    pub out_of_regime: bool,
    pub notes: Vec<String>,
}

/// Validates an `ε` list for a gradient sweep on `grid`.
pub fn check_sweep(eps_list: &[f64], grid: &PolarGrid, m: f64, probe: f64) -> Result<()> {
    if eps_list.len() < 5 {
        return Err(invalid!(
            "a gradient sweep needs at least 5 eps values, got {}",
            eps_list.len()
        ));
    }
    if eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(invalid!("eps values must be positive"));
    }
    if eps_list.windows(2).any(|w| !(w[1] > w[0])) && eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid!("eps values must be sorted"));
    }
    if !(probe > 0.0) {
        return Err(invalid!("probe radius factor {probe} must be positive"));
    }
    let smallest = eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    let radius = probe * powf(smallest, 1.0 / m);
    let cells = radius / grid.h_r();
    if cells < 8.0 {
        return Err(Error::GridTooCoarse(alloc::format!(
            "probe radius {radius:.3e} at eps = {smallest:.1e} spans {cells:.1} cells; need n_r ≥ {}",
            libm::ceil(8.0 * grid.radius() / radius) as usize
        )));
    }
    Ok(())
}

/// One sweep point: solve at `eps` and record `max |∇v|` on the probe disk.
pub fn gradient_probe<S: DiskSolver + ?Sized>(
    solver: &S,
    spec: &WeightSpec,
    eps: f64,
    grid: &PolarGrid,
    boundary: &[f64],
    probe: f64,
) -> Result<SweepPoint> {
    let radius = probe * powf(eps, 1.0 / spec.m);
    let system = assemble_disk_system(spec, eps, grid, &Forcing::Zero, boundary)?;
    let field = solver.solve_system(&system, None)?;
    Ok(SweepPoint {
        eps,
        probe_radius: radius,
        max_gradient: max_gradient_within(&field, radius.min(grid.radius()))?,
        solve_residual: field.solve_residual,
        iterations: field.iterations,
    })
}

/// Fits `log max|∇v|` against `log ε` and flags non-asymptotic sweeps.
pub fn fit_gradient_sweep(
    mut points: Vec<SweepPoint>,
    grid: &PolarGrid,
    predicted_slope: f64,
) -> Result<SweepReport> {
    points.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.eps, p.max_gradient)).collect();
    let fit = fit_loglog(&xy, Some(predicted_slope))?;
    let mut notes = Vec::new();
    let largest = points.last().map_or(0.0, |p| p.eps);
    if largest > 0.1 {
        notes.push(alloc::format!(
            "eps = {largest} is not small; the gap is not thin"
        ));
    }
    if let Some(p) = points
        .iter()
        .find(|p| p.probe_radius > 0.75 * grid.radius())
    {
        notes.push(alloc::format!(
            "probe disk of radius {:.3} at eps = {} reaches the outer boundary region",
            p.probe_radius,
            p.eps
        ));
    }
    Ok(SweepReport {
        out_of_regime: !notes.is_empty(),
        points,
        fit,
        predicted_slope,
        notes,
    })
}

/// Sequential ε-sweep of the probe-disk gradient maximum.
pub fn gradient_rate_sweep<S: DiskSolver + ?Sized>(
    solver: &S,
    spec: &WeightSpec,
    grid: &PolarGrid,
    boundary: &BoundaryData,
    eps_list: &[f64],
    probe: f64,
    predicted_slope: f64,
) -> Result<SweepReport> {
    check_sweep(eps_list, grid, spec.m, probe)?;
    let g = boundary.sample(spec, grid)?;
    let points = eps_list
        .iter()
        .map(|&eps| gradient_probe(solver, spec, eps, grid, &g, probe))
        .collect::<Result<Vec<_>>>()?;
    fit_gradient_sweep(points, grid, predicted_slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LowerBoundConfig {
    pub gamma: f64,
    /// Odd coordinate `j₀` (1-based).
    pub coordinate: usize,
    /// Amplitude of the `r^{α+γ}` forcing relative to `⟨g, Y_{1,j₀}⟩`.
    pub forcing_amplitude: f64,
    /// Fit window as fractions of `R0`.
    pub r_min: f64,
    pub r_max: f64,
    /// Cells of the angular grid used for `λ₁`.
    pub spectral_cells: Option<usize>,
}

impl Default for LowerBoundConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            coordinate: 1,
            forcing_amplitude: 1.0,
            r_min: 0.04,
            r_max: 0.6,
            spectral_cells: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub lambda1: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub c1: f64,
    pub c1_std_error: f64,
    pub correction: f64,
    pub residual_exponent: Option<f64>,
    pub parity: ParityReport,
    /// `(r, U(r))` used in the fit.
    pub samples: Vec<(f64, f64)>,
    pub c1_positive: bool,
    pub solve_residual: f64,
}

impl LowerBoundReport {
    /// `C₁` exceeds `factor` standard errors.
    pub fn significant(&self, factor: f64) -> bool {
        self.c1 > factor * self.c1_std_error
    }
}

/// The member of the `λ₁` eigenspace odd in `ξ_j` and even in the other
/// coordinate, κ-normalized with `⟨Y, ξ_j⟩ > 0`.
pub fn odd_sector_mode(
    spec: &WeightSpec,
    n_theta: usize,
    coordinate: usize,
) -> Result<(f64, Vec<f64>, ParityReport)> {
    if !(1..=2).contains(&coordinate) {
        return Err(invalid!("coordinate {coordinate} must be 1 or 2"));
    }
    let op = assemble_operator(spec, &CircleGrid::new(n_theta)?)?;
    let spectrum = solve_spectrum(&op, 3)?;
    let parity = parity_analysis(&spectrum, 1)?;
    if !parity.property_o {
        return Err(Error::Precondition(alloc::format!(
            "λ₁ = {} has no eigenfunction odd in one coordinate and even in the other",
            parity.eigenvalue
        )));
    }
    let sector = &parity.sectors[coordinate - 1];
    if !sector.nontrivial {
        return Err(Error::Precondition(alloc::format!(
            "the λ₁ eigenspace has no member odd in ξ_{coordinate}"
        )));
    }
    let range = spectrum.cluster(1);
    let projected: Vec<Vec<f64>> = spectrum.eigenfunctions[range]
        .iter()
        .map(|u| {
            let (odd, even) = if coordinate == 1 {
                (op.reflect_first(u), op.reflect_second(u))
            } else {
                (op.reflect_second(u), op.reflect_first(u))
            };
            let both = if coordinate == 1 {
                op.reflect_second(&odd)
            } else {
                op.reflect_first(&odd)
            };
            (0..u.len())
                .map(|i| 0.25 * (u[i] - odd[i] + even[i] - both[i]))
                .collect()
        })
        .collect();
    let c = projected.len();
    let mut gram = vec![0.0; c * c];
    for a in 0..c {
        for b in 0..c {
            gram[a * c + b] = spectrum.inner(&projected[a], &projected[b]);
        }
    }
    let (_, vecs) = jacobi_eigen(&gram, c);
    let mut y = vec![0.0; n_theta];
    for (a, p) in projected.iter().enumerate() {
        let w = vecs[a * c + (c - 1)];
        y.iter_mut().zip(p).for_each(|(yi, pi)| *yi += w * pi);
    }
    let norm = sqrt(spectrum.inner(&y, &y));
    let xi = coordinate_samples(n_theta, coordinate);
    let sign = if spectrum.inner(&y, &xi) < 0.0 {
        -1.0
    } else {
        1.0
    };
    y.iter_mut().for_each(|v| *v *= sign / norm);
    Ok((spectrum.eigenvalues[1], y, parity))
}

fn coordinate_samples(n: usize, coordinate: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let t = (j as f64 + 0.5) * TAU / n as f64;
            if coordinate == 1 {
                cos(t)
            } else {
                sin(t)
            }
        })
        .collect()
}

fn kappa_inner(kappa: &[f64], u: &[f64], v: &[f64]) -> f64 {
    kappa
        .iter()
        .zip(u.iter().zip(v))
        .map(|(k, (a, b))| k * a * b)
        .sum::<f64>()
        / kappa.len() as f64
}

/// Solves at `ε = 0`, projects onto `Y_{1,j₀}` ring by ring and fits
/// `U(r) = C₁r^α + c·r^{α+γ}`.
///
/// The forcing `a·r^{m−1+α+γ}ξ_{j₀}e_r` with `a = forcing_amplitude·⟨g, Y⟩`
/// supplies the `r^{α+γ}` correction.
pub fn lower_bound_experiment<S: DiskSolver + ?Sized>(
    solver: &S,
    spec: &WeightSpec,
    grid: &PolarGrid,
    boundary: &BoundaryData,
    config: &LowerBoundConfig,
) -> Result<LowerBoundReport> {
    if !spec.set_a.is_empty() {
        return Err(Error::Precondition(
            "the lower bound needs A = ∅ (write κ with coordinates in B)".into(),
        ));
    }
    if !(config.gamma > 0.0 && config.gamma <= 1.0) {
        return Err(invalid!("gamma = {} must lie in (0, 1]", config.gamma));
    }
    let (_, y, parity) = odd_sector_mode(spec, grid.n_theta, config.coordinate)?;
    let lambda1 = match config.spectral_cells {
        Some(n) if n != grid.n_theta => mode_exponent(spec, 1, n)?.0,
        _ => parity.eigenvalue,
    };
    let alpha = alpha_pm(lambda1, spec.d, spec.m)?.1;
    let kappa: Vec<f64> = grid.thetas().iter().map(|&t| spec.angular(t)).collect();
    let g = boundary.sample(spec, grid)?;
    let g_norm = sqrt(kappa_inner(&kappa, &g, &g));
    let proj = kappa_inner(&kappa, &g, &y);
    if !(proj.abs() > 1e-10 * g_norm.max(f64::MIN_POSITIVE)) {
        return Err(Error::Degenerate(alloc::format!(
            "boundary data has projection {proj:.3e} onto the odd mode Y_{{1,{}}}",
            config.coordinate
        )));
    }
    let forcing = Forcing::RadialOdd {
        coordinate: config.coordinate,
        exponent: spec.m - 1.0 + alpha + config.gamma,
        amplitude: config.forcing_amplitude * proj,
    };
    let system = assemble_disk_system(spec, 0.0, grid, &forcing, &g)?;
    let field = solver.solve_system(&system, None)?;
    let (lo, hi) = (config.r_min * grid.radius(), config.r_max * grid.radius());
    let samples: Vec<(f64, f64)> = (0..grid.n_r)
        .filter(|&i| grid.r(i) >= lo && grid.r(i) <= hi)
        .map(|i| (grid.r(i), kappa_inner(&kappa, field.ring(i), &y)))
        .collect();
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.1.abs()));
    if !(peak > 1e-10 * proj.abs()) {
        return Err(Error::Degenerate(
            "projection of the solution vanishes".into(),
        ));
    }
    let fit = fit_leading_coefficient(&samples, alpha, config.gamma)?;
    Ok(LowerBoundReport {
        lambda1,
        alpha,
        gamma: config.gamma,
        c1: fit.c1,
        c1_std_error: fit.c1_std_error,
        correction: fit.correction,
        residual_exponent: fit.residual_exponent,
        parity,
        samples,
        c1_positive: fit.c1 > 0.0,
        solve_residual: field.solve_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoserLevel {
    pub n_r: usize,
    pub n_theta: usize,
    pub sup: f64,
    /// `sup|v| / ‖F‖`, with `F` normalized to unit norm.
    pub ratio: f64,
    pub solve_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoserReport {
    pub eps: f64,
    pub sigma: f64,
    /// `‖F‖_{ε,σ,0}` before normalization.
    pub forcing_norm: f64,
    pub levels: Vec<MoserLevel>,
    /// Largest relative change of the ratio between successive levels.
    pub max_relative_change: f64,
    pub stable: bool,
}

/// `‖F‖_{ε,σ,0}` sampled on log-spaced radii down to `10⁻⁶R0`.
pub fn forcing_norm(forcing: &Forcing, eps: f64, sigma: f64, m: f64, r0: f64) -> Result<f64> {
    if !(1.0 + sigma > 0.0) {
        return Err(Error::Precondition(alloc::format!(
            "1 + sigma = {} must be positive",
            1.0 + sigma
        )));
    }
    let radii = log_spaced(1e-6 * r0, r0, 241);
    let spokes = 64;
    let samples = radii.iter().flat_map(|&r| {
        (0..spokes).map(move |j| {
            let t = TAU * (j as f64 + 0.5) / spokes as f64;
            (r, forcing.magnitude(r, t))
        })
    });
    weighted_norm(
        samples,
        &NormSpec {
            eps,
            sigma,
            tau: 0.0,
        },
        m,
    )
}

/// One refinement level with zero boundary data and unit-norm forcing.
pub fn moser_level<S: DiskSolver + ?Sized>(
    solver: &S,
    spec: &WeightSpec,
    eps: f64,
    grid: &PolarGrid,
    normalized: &Forcing,
) -> Result<MoserLevel> {
    let zero = vec![0.0; grid.n_theta];
    let system = assemble_disk_system(spec, eps, grid, normalized, &zero)?;
    let field = if normalized.is_zero() {
        let mut f = super::grid::DiskField::from_fn(*grid, |_, _| 0.0);
        f.eps = eps;
        f
    } else {
        solver.solve_system(&system, None)?
    };
    let sup = field.max_abs();
    Ok(MoserLevel {
        n_r: grid.n_r,
        n_theta: grid.n_theta,
        sup,
        ratio: sup,
        solve_residual: field.solve_residual,
        iterations: field.iterations,
    })
}

pub fn summarize_moser(
    eps: f64,
    sigma: f64,
    forcing_norm: f64,
    levels: Vec<MoserLevel>,
) -> MoserReport {
    let max_relative_change = levels
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].ratio, w[1].ratio);
            if a == b {
                0.0
            } else {
                (b - a).abs() / a.abs().max(b.abs())
            }
        })
        .fold(0.0, f64::max);
    MoserReport {
        eps,
        sigma,
        forcing_norm,
        levels,
        max_relative_change,
        stable: max_relative_change <= 0.1,
    }
}

/// Normalizes `F`, solves on each grid and compares `sup|v|` across levels.
pub fn moser_sup_check<S: DiskSolver + ?Sized>(
    solver: &S,
    spec: &WeightSpec,
    eps: f64,
    sigma: f64,
    grids: &[PolarGrid],
    forcing: &Forcing,
) -> Result<MoserReport> {
    let r0 = grids
        .first()
        .ok_or_else(|| invalid!("no refinement levels"))?
        .radius();
    let norm = forcing_norm(forcing, eps, sigma, spec.m, r0)?;
    let normalized = if norm > 0.0 {
        forcing.scaled(1.0 / norm)
    } else {
        Forcing::Zero
    };
    let levels = grids
        .iter()
        .map(|g| moser_level(solver, spec, eps, g, &normalized))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_moser(eps, sigma, norm, levels))
}
