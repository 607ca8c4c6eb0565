use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::grid::DiskField;
use crate::error::invalid;
use crate::geometry::{derived_constants, WeightSpec};
use crate::math::{powf, sqrt};
use crate::quadrature::GaussLegendre;
use crate::regression::{fit_loglog, RateFit};
use crate::{Error, Result};

/// Oscillation `ω(ρ)` sampled on ascending radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub rho: Vec<f64>,
    pub omega: Vec<f64>,
}

impl DecayProfile {
    pub fn new(rho: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if rho.len() != omega.len() {
            return Err(invalid!("{} radii but {} values", rho.len(), omega.len()));
        }
        if rho.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid!("radii must be strictly increasing"));
        }
        if omega.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid!("oscillation values must be nonnegative"));
        }
        Ok(Self { rho, omega })
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.rho
            .iter()
            .copied()
            .zip(self.omega.iter().copied())
            .collect()
    }
}

fn angular_kappa(spec: &WeightSpec, field: &DiskField) -> Vec<f64> {
    field
        .grid
        .thetas()
        .iter()
        .map(|&t| spec.angular(t))
        .collect()
}

/// `⨍ κ v` over ring 0, the stand-in for `v̄(0')`.
pub fn center_value(field: &DiskField, spec: &WeightSpec) -> f64 {
    let k = angular_kappa(spec, field);
    let ks: f64 = k.iter().sum();
    k.iter().zip(field.ring(0)).map(|(a, b)| a * b).sum::<f64>() / ks
}

fn check_radii(field: &DiskField, rho: &[f64]) -> Result<()> {
    if rho.is_empty() {
        return Err(invalid!("empty radius list"));
    }
    if rho.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid!("radii must be strictly increasing"));
    }
    let g = &field.grid;
    if rho[0] < g.r(0) || *rho.last().unwrap() > g.radius() {
        return Err(Error::Domain(alloc::format!(
            "radii {}..{} outside the resolved range [{}, {}]",
            rho[0],
            rho.last().unwrap(),
            g.r(0),
            g.radius()
        )));
    }
    Ok(())
}

/// Circle form `(⨍_{∂B'_ρ} κ |v − v₀|²)^{1/2}`; `v₀` defaults to
/// [`center_value`].
pub fn omega_circle(
    field: &DiskField,
    spec: &WeightSpec,
    rho: &[f64],
    center: Option<f64>,
) -> Result<DecayProfile> {
    check_radii(field, rho)?;
    let k = angular_kappa(spec, field);
    let v0 = center.unwrap_or_else(|| center_value(field, spec));
    let n = k.len() as f64;
    let mut omega = Vec::with_capacity(rho.len());
    for &r in rho {
        let c = field.circle(r)?;
        let s: f64 = k
            .iter()
            .zip(&c)
            .map(|(kj, v)| kj * (v - v0) * (v - v0))
            .sum();
        omega.push(sqrt(s / n));
    }
    DecayProfile::new(rho.to_vec(), omega)
}

/// Annulus form on `(1 − c̄₀)ρ < |x'| < (1 + c̄₀)ρ`: κ-weighted RMS of
/// `v − (v)^κ`, with `(v)^κ` the κ-weighted mean over the annulus.
pub fn omega_annulus(field: &DiskField, spec: &WeightSpec, rho: &[f64]) -> Result<DecayProfile> {
    let cbar = derived_constants(spec).cbar0;
    let lo: Vec<f64> = rho.iter().map(|r| r * (1.0 - cbar)).collect();
    let hi: Vec<f64> = rho.iter().map(|r| r * (1.0 + cbar)).collect();
    check_radii(field, &lo)?;
    check_radii(field, &hi)?;
    let k = angular_kappa(spec, field);
    let gl = GaussLegendre::new(8);
    let mut omega = Vec::with_capacity(rho.len());
    for (a, b) in lo.iter().zip(&hi) {
        // (weight, κ_j, v) over quadrature circles.
        let mut samples = Vec::with_capacity(gl.len() * k.len());
        for (r, w) in gl.nodes_on(*a, *b) {
            let c = field.circle(r)?;
            for (kj, v) in k.iter().zip(c) {
                samples.push((w * r, *kj, v));
            }
        }
        let mass: f64 = samples.iter().map(|(w, kj, _)| w * kj).sum();
        let total: f64 = samples.iter().map(|(w, _, _)| w).sum();
        let mean = samples.iter().map(|(w, kj, v)| w * kj * v).sum::<f64>() / mass;
        let s: f64 = samples
            .iter()
            .map(|(w, kj, v)| w * kj * (v - mean) * (v - mean))
            .sum();
        omega.push(sqrt(s / total));
    }
    DecayProfile::new(rho.to_vec(), omega)
}

/// Circle form for `ε = 0` fields, annulus form otherwise.
pub fn omega_profile(
    field: &DiskField,
    spec: &WeightSpec,
    rho: &[f64],
    center: Option<f64>,
) -> Result<DecayProfile> {
    if field.eps == 0.0 {
        omega_circle(field, spec, rho, center)
    } else {
        omega_annulus(field, spec, rho)
    }
}

/// Smallest `ρ_max / ρ_min` accepted for a decay fit.
pub const MIN_SPAN: f64 = 4.0;

/// Log-log fit of `ω` against `ρ`.
pub fn verify_oscillation_decay(profile: &DecayProfile, predicted_alpha: f64) -> Result<RateFit> {
    if profile.rho.len() < 4 {
        return Err(invalid!(
            "need at least 4 profile points, got {}",
            profile.rho.len()
        ));
    }
    if let Some(w) = profile.omega.iter().find(|w| !(**w > 0.0)) {
        return Err(invalid!("oscillation value {w} is not positive"));
    }
    let (first, last) = (profile.rho[0], *profile.rho.last().unwrap());
    if last < MIN_SPAN * first * (1.0 - 1e-12) {
        return Err(invalid!(
            "profile spans {first}..{last}, a ratio below {MIN_SPAN}"
        ));
    }
    fit_loglog(&profile.points(), Some(predicted_alpha))
}

/// `max |∇v|` over cells with `r_i ≤ radius`.
///
/// Fails with [`Error::GridTooCoarse`] when fewer than 8 radial cells fit
/// inside `radius`.
pub fn max_gradient_within(field: &DiskField, radius: f64) -> Result<f64> {
    let g = &field.grid;
    let cells = radius / g.h_r();
    if !(cells >= 8.0) {
        return Err(Error::GridTooCoarse(alloc::format!(
            "probe radius {radius:.3e} spans {cells:.1} cells; refine to h_r ≤ {:.3e}",
            radius / 8.0
        )));
    }
    let mut best = 0.0f64;
    for i in (0..g.n_r).take_while(|&i| g.r(i) <= radius) {
        for j in 0..g.n_theta {
            best = best.max(field.gradient_norm(i, j));
        }
    }
    Ok(best)
}

fn check_zero_boundary(field: &DiskField) -> Result<()> {
    let scale = field.max_abs().max(1.0);
    if field.boundary.iter().any(|b| b.abs() > 1e-12 * scale) {
        return Err(Error::Precondition(
            "field must vanish on the outer boundary".into(),
        ));
    }
    Ok(())
}

/// Face-based `∫ |x'|^p |∇w|² dx'`, including the half cell to the boundary.
pub fn weighted_dirichlet(field: &DiskField, p: f64) -> f64 {
    let g = &field.grid;
    let (nr, nt) = (g.n_r, g.n_theta);
    let (hr, ht) = (g.h_r(), g.h_theta());
    let mut e = 0.0;
    for i in 0..nr {
        let r = g.r(i);
        let ca = powf(r, p) * hr / (r * ht);
        let outer = i + 1 == nr;
        let cr = if outer {
            let r0 = g.radius();
            powf(r0, p) * r0 * ht / (0.5 * hr)
        } else {
            let rf = g.r_face(i);
            powf(rf, p) * rf * ht / hr
        };
        for j in 0..nt {
            let v = field.at(i, j);
            let da = field.at(i, (j + 1) % nt) - v;
            let dr = if outer {
                field.boundary[j] - v
            } else {
                field.at(i + 1, j) - v
            };
            e += ca * da * da + cr * dr * dr;
        }
    }
    e
}

/// `sup_r r^{m+1} ⨍_{∂B'_r} |w|²` divided by `∫ |x'|^{m+β} |∇w|²` (`d = 3`).
pub fn hardy_trace_ratio(field: &DiskField, beta: f64, m: f64) -> Result<f64> {
    if !(beta < 1.0) {
        return Err(Error::Precondition(alloc::format!(
            "beta = {beta} must be below 1"
        )));
    }
    check_zero_boundary(field)?;
    let g = &field.grid;
    let mut lhs = 0.0f64;
    for i in 0..g.n_r {
        let mean = field.ring(i).iter().map(|v| v * v).sum::<f64>() / g.n_theta as f64;
        lhs = lhs.max(powf(g.r(i), m + 1.0) * mean);
    }
    let rhs = weighted_dirichlet(field, m + beta);
    if rhs == 0.0 {
        return Err(Error::Degenerate(alloc::format!("Hardy ratio {lhs}/0")));
    }
    Ok(lhs / rhs)
}

/// `‖u‖_{L^p(|x'|^m)} / ‖∇u‖_{L²(|x'|^m)}` with `p = 2(m+2)/m` (`d = 3`).
pub fn ckn_ratio(field: &DiskField, m: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(invalid!("m = {m} must be positive"));
    }
    check_zero_boundary(field)?;
    let p = 2.0 * (m + 2.0) / m;
    let g = &field.grid;
    let area = g.h_r() * g.h_theta();
    let mut s = 0.0;
    for i in 0..g.n_r {
        let r = g.r(i);
        let w = powf(r, m) * r * area;
        s += w * field.ring(i).iter().map(|v| powf(v.abs(), p)).sum::<f64>();
    }
    let grad = sqrt(weighted_dirichlet(field, m));
    if grad == 0.0 {
        return Err(Error::Degenerate("zero weighted gradient norm".into()));
    }
    Ok(powf(s, 1.0 / p) / grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::cos;
    use crate::solver::PolarGrid;

    fn iso() -> WeightSpec {
        WeightSpec::isotropic(3, 2.0, 1.0).unwrap()
    }

    #[test]
    fn omega_of_constant_is_zero() {
        let grid = PolarGrid::new(64, 32, 1.0).unwrap();
        let f = DiskField::from_fn(grid, |_, _| 2.5);
        let p = omega_circle(&f, &iso(), &[0.1, 0.2, 0.5], None).unwrap();
        assert!(p.omega.iter().all(|w| w.abs() < 1e-14));
    }

    #[test]
    fn omega_of_power_mode() {
        let alpha = core::f64::consts::SQRT_2 - 1.0;
        let grid = PolarGrid::new(256, 64, 1.0).unwrap();
        let f = DiskField::from_fn(grid, |r, t| powf(r, alpha) * cos(t));
        let rho = [0.05, 0.1, 0.2, 0.4, 0.8];
        let p = omega_circle(&f, &iso(), &rho, Some(0.0)).unwrap();
        for (r, w) in rho.iter().zip(&p.omega) {
            let exact = powf(*r, alpha) / core::f64::consts::SQRT_2;
            assert!((w - exact).abs() < 1e-3 * exact, "{r}: {w} vs {exact}");
        }
        assert!(p.omega.windows(2).all(|w| w[1] >= w[0]));
        let fit = verify_oscillation_decay(&p, alpha).unwrap();
        assert!(fit.within(2e-3));
    }

    #[test]
    fn synthetic_profile_fit() {
        let rho: Vec<f64> = (0..8).map(|i| 0.01 * powf(2.0, i as f64)).collect();
        let omega = rho.iter().map(|r| powf(*r, 0.3)).collect();
        let fit = verify_oscillation_decay(&DecayProfile::new(rho, omega).unwrap(), 0.3).unwrap();
        assert!((fit.slope - 0.3).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decay_fit_rejects_zero() {
        let p = DecayProfile::new(vec![0.01, 0.03, 0.1, 0.3], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(verify_oscillation_decay(&p, 0.5).is_err());
        let short = DecayProfile::new(vec![0.1, 0.15, 0.2, 0.3], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(verify_oscillation_decay(&short, 0.5).is_err());
    }

    #[test]
    fn omega_rejects_outside() {
        let grid = PolarGrid::new(64, 32, 1.0).unwrap();
        let f = DiskField::from_fn(grid, |_, _| 0.0);
        assert!(matches!(
            omega_circle(&f, &iso(), &[0.5, 1.5], None),
            Err(Error::Domain(_))
        ));
        assert!(omega_annulus(&f, &iso(), &[0.001]).is_err());
    }

    #[test]
    fn annulus_form_of_mode() {
        let grid = PolarGrid::new(256, 64, 1.0).unwrap();
        let f = DiskField::from_fn(grid, |r, t| r * cos(t));
        let cbar = derived_constants(&iso()).cbar0;
        let p = omega_annulus(&f, &iso(), &[0.1, 0.2, 0.4]).unwrap();
        // Area-weighted RMS of r cosθ over [a, b] is √((a² + b²)/4).
        for (r, w) in p.rho.iter().zip(&p.omega) {
            let (a, b) = (r * (1.0 - cbar), r * (1.0 + cbar));
            let exact = sqrt((a * a + b * b) / 4.0);
            assert!((w / exact - 1.0).abs() < 1e-3, "{w} vs {exact}");
        }
    }

    #[test]
    fn gradient_probe_needs_resolution() {
        let grid = PolarGrid::new(64, 32, 1.0).unwrap();
        let f = DiskField::from_fn(grid, |r, t| r * cos(t));
        assert!(matches!(
            max_gradient_within(&f, 0.05),
            Err(Error::GridTooCoarse(_))
        ));
        let g = max_gradient_within(&f, 0.5).unwrap();
        assert!((g - 1.0).abs() < 1e-2);
    }

    #[test]
    fn hardy_ratio_behaviour() {
        let g = PolarGrid::new(64, 32, 1.0).unwrap();
        let zero = DiskField::from_fn(g, |_, _| 0.0);
        assert!(matches!(
            hardy_trace_ratio(&zero, 0.0, 2.0),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            hardy_trace_ratio(&zero, 1.0, 2.0),
            Err(Error::Precondition(_))
        ));
        let mut ratios = Vec::new();
        for n in [64, 128, 256] {
            let g = PolarGrid::new(n, 64, 1.0).unwrap();
            let w = DiskField::from_fn(g, |r, t| (1.0 - r) * cos(t));
            ratios.push(hardy_trace_ratio(&w, 0.0, 2.0).unwrap());
        }
        assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0));
        assert!(((ratios[2] - ratios[1]) / ratios[1]).abs() < 0.1);
        let bump = DiskField::from_fn(PolarGrid::new(256, 64, 1.0).unwrap(), |r, _| {
            let s = r / 0.05;
            libm::exp(-s * s) - libm::exp(-400.0)
        });
        let rb = hardy_trace_ratio(&bump, 0.0, 2.0).unwrap();
        assert!(rb.is_finite() && rb < 10.0);
    }

    #[test]
    fn ckn_ratio_scaling() {
        let g = PolarGrid::new(128, 32, 1.0).unwrap();
        let u = DiskField::from_fn(g, |r, _| 1.0 - r);
        let a = ckn_ratio(&u, 2.0).unwrap();
        let mut v = u.clone();
        v.values.iter_mut().for_each(|x| *x *= 7.3);
        v.boundary.iter_mut().for_each(|x| *x *= 7.3);
        let b = ckn_ratio(&v, 2.0).unwrap();
        assert!(((a - b) / a).abs() < 1e-10);
        let zero = DiskField::from_fn(g, |_, _| 0.0);
        assert!(matches!(ckn_ratio(&zero, 2.0), Err(Error::Degenerate(_))));
    }
}
