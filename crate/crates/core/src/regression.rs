//! Least-squares line fits and log-log rate extraction.

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::math::{ln, sqrt};
use crate::Result;

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    pub intercept_std_error: f64,
    pub r_squared: f64,
    pub residual_rms: f64,
    pub point_count: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(invalid!(
            "x and y lengths differ ({} vs {})",
            x.len(),
            y.len()
        ));
    }
    let n = x.len();
    if n < 2 {
        return Err(invalid!("a line fit needs at least 2 points, got {n}"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return Err(invalid!(
            "x values are all equal; the slope is undetermined"
        ));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let r_squared = if syy > 1e-28 * scale * scale * nf {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let (slope_se, intercept_se) = if n > 2 {
        let s2 = ssr / (nf - 2.0);
        let sx2: f64 = x.iter().map(|v| v * v).sum();
        (sqrt(s2 / sxx), sqrt(s2 * sx2 / (nf * sxx)))
    } else {
        (0.0, 0.0)
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_std_error: slope_se,
        intercept_std_error: intercept_se,
        r_squared,
        residual_rms: sqrt(ssr / nf),
        point_count: n,
    })
}

/// A fitted power law compared against a predicted exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub point_count: usize,
    pub slope_std_error: f64,
    pub predicted: Option<f64>,
    /// `|slope − predicted| / |predicted|` (absolute error when `predicted = 0`).
    pub relative_error: Option<f64>,
}

impl RateFit {
    pub fn within(&self, tolerance: f64) -> bool {
        self.relative_error.is_some_and(|e| e <= tolerance)
    }
}

/// Fits `log y = intercept + slope·log x`.
pub fn fit_loglog(points: &[(f64, f64)], predicted: Option<f64>) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(invalid!(
            "a rate fit needs at least 4 points, got {}",
            points.len()
        ));
    }
    if let Some((x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(invalid!("log-log fit needs positive data, got ({x}, {y})"));
    }
    let lx: alloc::vec::Vec<f64> = points.iter().map(|p| ln(p.0)).collect();
    let ly: alloc::vec::Vec<f64> = points.iter().map(|p| ln(p.1)).collect();
    let fit = linear_fit(&lx, &ly)?;
    let relative_error = predicted.map(|p| {
        let diff = (fit.slope - p).abs();
        if p == 0.0 {
            diff
        } else {
            diff / p.abs()
        }
    });
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        point_count: fit.point_count,
        slope_std_error: fit.slope_std_error,
        predicted,
        relative_error,
    })
}
