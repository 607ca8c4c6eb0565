//! Radial equations `V'' + ((d+m−2)/r)V' − (λ/r²)V = H`: closed-form
//! homogeneous solutions, an RK4 cross-check, variation of parameters and
//! the leading-coefficient fit `U = C₁r^α + O(r^{α+γ})`.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::exponents::alpha_pm;
use crate::math::{ln, powf};
use crate::quadrature::GaussLegendre;
use crate::regression::linear_fit;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialSource {
    ClosedForm,
    Rk4,
    VariationOfParameters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    pub r_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub closed_form_exponent: Option<f64>,
    pub source: RadialSource,
    /// `w` with `values = r^α w` (variation of parameters only).
    pub w: Option<Vec<f64>>,
    /// `r v'/v` at the smallest radius (RK4 only).
    pub end_log_slope: Option<f64>,
    /// The integration picked up the singular branch `r^{α₋}`.
    pub singular_branch: bool,
}

/// `ρ^{α₊(λ)}`, the admissible homogeneous solution normalized at `ρ = 1`.
pub fn homogeneous_radial(lambda_k: f64, d: usize, m: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Domain(format!("rho = {rho} outside (0, 1]")));
    }
    let (_, plus) = alpha_pm(lambda_k, d, m)?;
    Ok(powf(rho, plus))
}

/// Closed-form `ρ^{α₊}` sampled on a grid.
pub fn homogeneous_profile(
    lambda_k: f64,
    d: usize,
    m: f64,
    r_grid: &[f64],
) -> Result<RadialSolution> {
    let (_, plus) = alpha_pm(lambda_k, d, m)?;
    let values = r_grid
        .iter()
        .map(|&r| homogeneous_radial(lambda_k, d, m, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(RadialSolution {
        r_grid: r_grid.to_vec(),
        values,
        closed_form_exponent: Some(plus),
        source: RadialSource::ClosedForm,
        w: None,
        end_log_slope: None,
        singular_branch: false,
    })
}

/// Integrates the homogeneous equation backward from `r_start` with fixed
/// RK4 steps. The grid is returned in ascending order.
#[allow(clippy::too_many_arguments)]
pub fn solve_radial_ivp(
    lambda_k: f64,
    d: usize,
    m: f64,
    r_start: f64,
    r_end: f64,
    v1: f64,
    dv1: f64,
    steps: usize,
) -> Result<RadialSolution> {
    if !(r_end > 0.0) {
        return Err(Error::Domain(format!(
            "r_end = {r_end} must be positive (r = 0 is singular)"
        )));
    }
    if !(r_end < r_start) {
        return Err(invalid!("need r_end < r_start (got {r_end} ≥ {r_start})"));
    }
    if steps < 100 {
        return Err(invalid!("at least 100 steps are required, got {steps}"));
    }
    let (minus, plus) = alpha_pm(lambda_k, d, m)?;
    let c = d as f64 + m - 2.0;
    let rhs =
        |r: f64, y: [f64; 2]| -> [f64; 2] { [y[1], -c / r * y[1] + lambda_k / (r * r) * y[0]] };
    let h = -(r_start - r_end) / steps as f64;
    let mut r = r_start;
    let mut y = [v1, dv1];
    let mut rs = Vec::with_capacity(steps + 1);
    let mut vs = Vec::with_capacity(steps + 1);
    rs.push(r);
    vs.push(y[0]);
    for i in 0..steps {
        let k1 = rhs(r, y);
        let k2 = rhs(
            r + 0.5 * h,
            [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]],
        );
        let k3 = rhs(
            r + 0.5 * h,
            [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]],
        );
        let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        r = if i + 1 == steps {
            r_end
        } else {
            r_start + (i + 1) as f64 * h
        };
        rs.push(r);
        vs.push(y[0]);
    }
    rs.reverse();
    vs.reverse();
    let slope = if y[0] != 0.0 { r * y[1] / y[0] } else { 0.0 };
    let singular = slope < 0.5 * minus;
    Ok(RadialSolution {
        r_grid: rs,
        values: vs,
        closed_form_exponent: Some(if singular { minus } else { plus }),
        source: RadialSource::Rk4,
        w: None,
        end_log_slope: Some(slope),
        singular_branch: singular,
    })
}

const MAX_PANELS: usize = 4000;

/// `∫₀^upper f` over dyadic panels `[upper/2^{k+1}, upper/2^k]`; once the
/// panel contributions settle into a geometric sequence the remaining tail
/// is summed in closed form.
fn integrate_from_zero<F: FnMut(f64) -> f64>(
    mut f: F,
    upper: f64,
    gl: &GaussLegendre,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut hi = upper;
    let mut prev: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    let mut stable = 0;
    for k in 0..MAX_PANELS {
        let lo = 0.5 * hi;
        let c = gl.integrate(lo, hi, &mut f);
        if !c.is_finite() {
            return Err(Error::Divergent(format!(
                "integrand not finite near t = {lo:e}"
            )));
        }
        sum += c;
        if c.abs() <= 1e-17 * sum.abs() || (c == 0.0 && sum == 0.0) {
            return Ok(sum);
        }
        if let Some(p) = prev {
            if p != 0.0 {
                let ratio = c / p;
                if let Some(q) = prev_ratio {
                    if (ratio - q).abs() <= 1e-12 * ratio.abs().max(1e-3) {
                        stable += 1;
                    } else {
                        stable = 0;
                    }
                }
                if stable >= 3 {
                    if ratio >= 1.0 - 1e-12 {
                        return Err(Error::Divergent(format!(
                            "panel contributions stop decaying (ratio {ratio}) near t = 0"
                        )));
                    }
                    if ratio > 0.0 {
                        return Ok(sum + c * ratio / (1.0 - ratio));
                    }
                }
                if k > 200 && ratio.abs() >= 1.0 {
                    return Err(Error::Divergent(format!(
                        "panel contributions grow toward t = 0 (ratio {ratio})"
                    )));
                }
                prev_ratio = Some(ratio);
            }
        }
        prev = Some(c);
        hi = lo;
    }
    Err(Error::Divergent(format!(
        "integral toward t = 0 did not settle after {MAX_PANELS} dyadic panels"
    )))
}

/// `∫_a^b f` with `0 < a < b` over geometric panels of ratio at most 2.
fn integrate_geometric<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, gl: &GaussLegendre) -> f64 {
    let mut sum = 0.0;
    let mut lo = a;
    while lo < b {
        let hi = (2.0 * lo).min(b);
        sum += gl.integrate(lo, hi, &mut f);
        lo = hi;
    }
    sum
}

/// `w(r) = ∫₀^r s^{−(d+m+2α−2)} ∫₀^s t^{d+m+α−2} H(t) dt ds` and
/// `v = r^α w`, by nested Gauss–Legendre panels refined toward the origin.
pub fn variation_of_parameters<H: Fn(f64) -> f64>(
    h: H,
    alpha: f64,
    d: usize,
    m: f64,
    r_grid: &[f64],
) -> Result<RadialSolution> {
    if r_grid.is_empty() {
        return Err(invalid!("empty radius grid"));
    }
    if r_grid.windows(2).any(|w| !(w[0] < w[1])) || !(r_grid[0] > 0.0) {
        return Err(invalid!(
            "radius grid must be positive and strictly increasing"
        ));
    }
    let df = d as f64;
    let inner_pow = df + m + alpha - 2.0;
    let outer_pow = -(df + m + 2.0 * alpha - 2.0);

    let evaluate = |order: usize| -> Result<Vec<f64>> {
        let gl = GaussLegendre::new(order);
        let inner = |s: f64| integrate_from_zero(|t| powf(t, inner_pow) * h(t), s, &gl);
        let mut failure: Option<Error> = None;
        let mut outer = |s: f64| match inner(s) {
            Ok(v) => powf(s, outer_pow) * v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        let mut w = Vec::with_capacity(r_grid.len());
        let mut acc = integrate_from_zero(&mut outer, r_grid[0], &gl)?;
        w.push(acc);
        for pair in r_grid.windows(2) {
            acc += integrate_geometric(&mut outer, pair[0], pair[1], &gl);
            w.push(acc);
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(w),
        }
    };

    let mut previous = evaluate(12)?;
    let mut converged = false;
    for order in [20, 32] {
        let next = evaluate(order)?;
        let scale = next.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let change = next
            .iter()
            .zip(&previous)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        previous = next;
        if change <= 1e-10 * scale || scale == 0.0 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: 3,
            residual: f64::NAN,
            history: Vec::new(),
        });
    }
    let w = previous;
    let values = r_grid
        .iter()
        .zip(&w)
        .map(|(&r, &wv)| powf(r, alpha) * wv)
        .collect();
    Ok(RadialSolution {
        r_grid: r_grid.to_vec(),
        values,
        closed_form_exponent: None,
        source: RadialSource::VariationOfParameters,
        w: Some(w),
        end_log_slope: None,
        singular_branch: false,
    })
}

/// Result of fitting `U(r)/r^α = C₁ + c·r^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadingFit {
    pub c1: f64,
    pub c1_std_error: f64,
    /// Coefficient of the `r^{α+γ}` correction.
    pub correction: f64,
    /// Log-log slope of `|U − C₁r^α|`; `None` when the residual vanishes.
    pub residual_exponent: Option<f64>,
    pub residual_rms: f64,
    pub point_count: usize,
}

pub fn fit_leading_coefficient(
    samples: &[(f64, f64)],
    alpha: f64,
    gamma: f64,
) -> Result<LeadingFit> {
    if samples.len() < 8 {
        return Err(invalid!("need at least 8 samples, got {}", samples.len()));
    }
    if samples.iter().any(|(r, u)| !(*r > 0.0) || !u.is_finite()) {
        return Err(invalid!("samples need positive radii and finite values"));
    }
    let rmin = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let rmax = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    if rmax < 10.0 * rmin * (1.0 - 1e-12) {
        return Err(invalid!(
            "samples span {rmin}..{rmax}, less than one decade"
        ));
    }
    let x: Vec<f64> = samples.iter().map(|(r, _)| powf(*r, gamma)).collect();
    let y: Vec<f64> = samples.iter().map(|(r, u)| u / powf(*r, alpha)).collect();
    let fit = linear_fit(&x, &y)?;
    let c1 = fit.intercept;

    let mut lr = Vec::new();
    let mut lres = Vec::new();
    for (r, u) in samples {
        let res = (u - c1 * powf(*r, alpha)).abs();
        if res > 1e-12 * u.abs().max(f64::MIN_POSITIVE) {
            lr.push(ln(*r));
            lres.push(ln(res));
        }
    }
    let residual_exponent = if lr.len() >= 3 {
        linear_fit(&lr, &lres).ok().map(|f| f.slope)
    } else {
        None
    };
    Ok(LeadingFit {
        c1,
        c1_std_error: fit.intercept_std_error,
        correction: fit.slope,
        residual_exponent,
        residual_rms: fit.residual_rms,
        point_count: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::alpha_of_lambda;

    #[test]
    fn homogeneous_examples() {
        assert_eq!(homogeneous_radial(3.0, 3, 2.0, 1.0).unwrap(), 1.0);
        assert_eq!(homogeneous_radial(0.0, 3, 2.0, 0.3).unwrap(), 1.0);
        let v = homogeneous_radial(1.0, 3, 2.0, 0.25).unwrap();
        assert!((v - 0.25f64.powf(2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!(homogeneous_radial(1.0, 3, 2.0, 0.0).is_err());
        assert!(homogeneous_radial(1.0, 3, 2.0, 1.5).is_err());
    }

    #[test]
    fn scaling_law() {
        for (l, d, m) in [(1.0, 3, 2.0), (0.7, 3, 4.0), (6.0, 5, 3.0)] {
            for (a, b) in [(0.3, 0.5), (0.01, 0.9), (0.77, 0.77)] {
                let lhs = homogeneous_radial(l, d, m, a * b).unwrap();
                let rhs = homogeneous_radial(l, d, m, a).unwrap()
                    * homogeneous_radial(l, d, m, b).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * rhs);
            }
        }
    }

    #[test]
    fn rk4_constant_and_singular_branches() {
        let s = solve_radial_ivp(0.0, 3, 2.0, 1.0, 0.01, 1.0, 0.0, 1000).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.0).abs() <= 1e-12));
        assert!(!s.singular_branch);
        let (minus, _) = alpha_pm(1.0, 3, 2.0).unwrap();
        let s = solve_radial_ivp(1.0, 3, 2.0, 1.0, 0.01, 1.0, minus, 20_000).unwrap();
        assert!(s.singular_branch);
        assert!(s.values[0] > 1e4);
        assert!(solve_radial_ivp(1.0, 3, 2.0, 1.0, 0.0, 1.0, 0.0, 1000).is_err());
        assert!(solve_radial_ivp(1.0, 3, 2.0, 1.0, 0.5, 1.0, 0.0, 10).is_err());
    }

    #[test]
    fn zero_forcing() {
        let grid = [0.1, 0.2, 0.5, 1.0];
        let s = variation_of_parameters(|_| 0.0, 0.4, 3, 2.0, &grid).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn divergent_inner_integral() {
        let grid = [0.5, 1.0];
        let d = 3;
        let m = 2.0;
        let alpha = 0.4;
        let p = d as f64 + m + alpha - 2.0;
        let err = variation_of_parameters(|t| powf(t, -p - 1.0), alpha, d, m, &grid).unwrap_err();
        assert!(matches!(err, Error::Divergent(_)));
    }

    #[test]
    fn operator_reproduces_forcing() {
        // L v = v'' + ((d+m−2)/r)v' − (λ/r²)v with λ = α² + (d+m−3)α.
        let (d, m) = (3, 2.0);
        let alpha = alpha_of_lambda(1.0, d, m).unwrap();
        let lambda = 1.0;
        let hfun = |t: f64| powf(t, 0.5 + alpha - 2.0) * (1.0 + t);
        let h = 1e-3;
        let grid: Vec<f64> = (0..=40).map(|i| 0.2 + i as f64 * h).collect();
        let s = variation_of_parameters(hfun, alpha, d, m, &grid).unwrap();
        for i in 1..grid.len() - 1 {
            let r = grid[i];
            let v = &s.values;
            let d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
            let d1 = (v[i + 1] - v[i - 1]) / (2.0 * h);
            let lv = d2 + (d as f64 + m - 2.0) / r * d1 - lambda / (r * r) * v[i];
            assert!((lv - hfun(r)).abs() <= 1e-4 * hfun(r).abs(), "r={r}");
        }
    }

    #[test]
    fn leading_coefficient_fits() {
        let alpha = 2f64.sqrt() - 1.0;
        let gamma = 0.9;
        let rs: Vec<f64> = (0..12).map(|i| 0.01 * 10f64.powf(i as f64 / 6.0)).collect();
        let exact: Vec<(f64, f64)> = rs.iter().map(|&r| (r, powf(r, alpha))).collect();
        let f = fit_leading_coefficient(&exact, alpha, gamma).unwrap();
        assert!((f.c1 - 1.0).abs() < 1e-12);
        assert!(f.residual_exponent.is_none());
        let two: Vec<(f64, f64)> = rs
            .iter()
            .map(|&r| (r, 2.0 * powf(r, alpha) + powf(r, alpha + gamma)))
            .collect();
        let f = fit_leading_coefficient(&two, alpha, gamma).unwrap();
        assert!((f.c1 - 2.0).abs() < 1e-10);
        assert!((f.correction - 1.0).abs() < 1e-10);
        assert!((f.residual_exponent.unwrap() - (alpha + gamma)).abs() < 1e-6);
        assert!(fit_leading_coefficient(&two[..7], alpha, gamma).is_err());
        let narrow: Vec<(f64, f64)> = (0..10).map(|i| (0.5 + 0.01 * i as f64, 1.0)).collect();
        assert!(fit_leading_coefficient(&narrow, alpha, gamma).is_err());
    }
}
