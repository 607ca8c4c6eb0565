//! Closed-form exponents: `α(λ)`, the indicial roots `α±`, `β(λ)` and the
//! predicted gradient rates.

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::geometry::WeightSpec;
use crate::math::sqrt;
use crate::spectral::{assemble_operator, solve_spectrum, CircleGrid};
use crate::{Error, Result};

/// Default grid size used when `λ₁` has to be computed.
pub const DEFAULT_SPECTRAL_CELLS: usize = 2048;
/// Tolerance for detecting the borderline case `m = d + 2α − 3`.
pub const BETA_EQUAL_TOL: f64 = 1e-12;

fn check(lambda: f64, d: usize, m: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid!(
            "eigenvalue {lambda} must be a finite nonnegative number"
        ));
    }
    if d < 3 || !(m >= 2.0) {
        return Err(invalid!("need d ≥ 3 and m ≥ 2 (got d = {d}, m = {m})"));
    }
    Ok(d as f64 + m - 3.0)
}

/// The nonnegative root of `α² + (d+m−3)α − λ = 0`.
pub fn alpha_of_lambda(lambda1: f64, d: usize, m: f64) -> Result<f64> {
    let s = check(lambda1, d, m)?;
    // 2λ/(s + √(s² + 4λ)) avoids cancellation for small λ.
    Ok(2.0 * lambda1 / (s + sqrt(s * s + 4.0 * lambda1)))
}

/// Both indicial roots `(α₋, α₊)` of the radial equation.
pub fn alpha_pm(lambda_k: f64, d: usize, m: f64) -> Result<(f64, f64)> {
    let s = check(lambda_k, d, m)?;
    let plus = 2.0 * lambda_k / (s + sqrt(s * s + 4.0 * lambda_k));
    let minus = -0.5 * (s + sqrt(s * s + 4.0 * lambda_k));
    Ok((minus, plus))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaCase {
    MGreater,
    MEqual,
    MLess,
}

/// `β(λ₁)` with `(2α+d+m−3)/(2m)` when `m > d+2α−3`, `1 − η` on the
/// borderline and `1` otherwise.
pub fn beta_of_lambda(lambda1: f64, d: usize, m: f64, eta: f64) -> Result<(f64, BetaCase)> {
    let alpha = alpha_of_lambda(lambda1, d, m)?;
    let gap = m - (d as f64 + 2.0 * alpha - 3.0);
    Ok(if gap.abs() <= BETA_EQUAL_TOL {
        (1.0 - eta, BetaCase::MEqual)
    } else if gap > 0.0 {
        (
            (2.0 * alpha + d as f64 + m - 3.0) / (2.0 * m),
            BetaCase::MGreater,
        )
    } else {
        (1.0, BetaCase::MLess)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSource {
    Computed,
    Shortcut,
    Override,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub d: usize,
    pub m: f64,
    pub lambda1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub beta_case: BetaCase,
    /// `α − 1`, the exponent of `|x'|` at touching.
    pub gradient_exponent_touching: f64,
    /// `(α − 1)/m`, the exponent of `ε + |x'|^m`.
    pub gradient_exponent_eps: f64,
    pub lambda1_source: LambdaSource,
}

impl ExponentReport {
    pub fn from_lambda(lambda1: f64, d: usize, m: f64, source: LambdaSource) -> Result<Self> {
        let alpha = alpha_of_lambda(lambda1, d, m)?;
        let (beta, beta_case) = beta_of_lambda(lambda1, d, m, 1e-6)?;
        Ok(Self {
            d,
            m,
            lambda1,
            alpha,
            beta,
            beta_case,
            gradient_exponent_touching: alpha - 1.0,
            gradient_exponent_eps: (alpha - 1.0) / m,
            lambda1_source: source,
        })
    }
}

/// Which line of the published special-value table a configuration hits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShortcutEntry {
    /// `m = 2`, `B = ∅`, equal `κᵢ`.
    QuadraticCoupledEqual,
    /// `m = 2`, `B` everything, equal `κⱼ`.
    QuadraticSeparatedEqual,
    /// `m = 2`, mixed partition with `κ₀κᵢ = κⱼ`.
    QuadraticMixedMatched,
    /// `m > 2`, `B ≠ ∅`.
    HigherWithSeparated,
    /// `m > 2`, `B = ∅`, some `κᵢ` differ.
    HigherCoupledUnequal,
}

/// The special-value table as published: returns the entry claiming
/// `λ₁ = d − 2`, or `None` when the table says `λ₁ < d − 2`.
///
/// The two `m > 2` entries are contradicted by the Rayleigh quotient of a
/// coordinate function whenever `κ` is not constant (see
/// [`shortcut_is_reliable`]); [`predict_rates`] does not use them.
pub fn shortcut_table(spec: &WeightSpec) -> Option<ShortcutEntry> {
    let n = spec.dim();
    let ka: alloc::vec::Vec<f64> = spec.set_a.iter().map(|&i| spec.kappa[i - 1]).collect();
    let kb: alloc::vec::Vec<f64> = spec.set_b.iter().map(|&j| spec.kappa[j - 1]).collect();
    let all_equal = |v: &[f64]| v.windows(2).all(|w| w[0] == w[1]);
    if spec.m == 2.0 {
        if kb.is_empty() && all_equal(&ka) {
            return Some(ShortcutEntry::QuadraticCoupledEqual);
        }
        if kb.len() == n && all_equal(&kb) {
            return Some(ShortcutEntry::QuadraticSeparatedEqual);
        }
        if !kb.is_empty()
            && kb.len() != n
            && ka
                .iter()
                .all(|&ki| kb.iter().all(|&kj| spec.kappa0 * ki == kj))
        {
            return Some(ShortcutEntry::QuadraticMixedMatched);
        }
        None
    } else if !kb.is_empty() {
        Some(ShortcutEntry::HigherWithSeparated)
    } else if !all_equal(&ka) {
        Some(ShortcutEntry::HigherCoupledUnequal)
    } else {
        None
    }
}

/// `true` for table entries that agree with "`λ₁ = d − 2` iff `κ` is
/// constant".
pub fn shortcut_is_reliable(entry: ShortcutEntry) -> bool {
    matches!(
        entry,
        ShortcutEntry::QuadraticCoupledEqual
            | ShortcutEntry::QuadraticSeparatedEqual
            | ShortcutEntry::QuadraticMixedMatched
    )
}

/// Predicted exponents with the default spectral resolution.
pub fn predict_rates(spec: &WeightSpec, lambda1_override: Option<f64>) -> Result<ExponentReport> {
    predict_rates_with(spec, lambda1_override, DEFAULT_SPECTRAL_CELLS)
}

/// Predicted exponents. `λ₁` is the override if given, `d − 2` when `κ` is
/// constant, and otherwise computed on an `n`-cell circle grid (`d = 3`).
pub fn predict_rates_with(
    spec: &WeightSpec,
    lambda1_override: Option<f64>,
    cells: usize,
) -> Result<ExponentReport> {
    spec.validate()?;
    let (d, m) = (spec.d, spec.m);
    if let Some(l) = lambda1_override {
        return ExponentReport::from_lambda(l, d, m, LambdaSource::Override);
    }
    let reliable = shortcut_table(spec).is_some_and(shortcut_is_reliable);
    if spec.is_constant() || reliable {
        return ExponentReport::from_lambda(d as f64 - 2.0, d, m, LambdaSource::Shortcut);
    }
    if d != 3 {
        return Err(Error::Unsupported(alloc::format!(
            "λ₁ for a non-constant weight in d = {d} needs a solver on the sphere S^{}; pass an override",
            d - 2
        )));
    }
    let grid = CircleGrid::new(cells)?;
    let op = assemble_operator(spec, &grid)?;
    let spectrum = solve_spectrum(&op, 2)?;
    ExponentReport::from_lambda(spectrum.eigenvalues[1], d, m, LambdaSource::Computed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_of_lambda(0.0, 3, 2.0).unwrap(), 0.0);
        let a = alpha_of_lambda(1.0, 3, 2.0).unwrap();
        assert!((a - 0.414_213_562_373_095).abs() < 1e-15);
        assert!(((a - 1.0) / 2.0 - (2f64.sqrt() - 2.0) / 2.0).abs() < 1e-15);
        let a = alpha_of_lambda(1.0, 3, 4.0).unwrap();
        assert!((a - 0.2360679774997897).abs() < 1e-15);
        assert!(alpha_of_lambda(-1e-3, 3, 2.0).is_err());
    }

    #[test]
    fn indicial_roots() {
        let (lo, hi) = alpha_pm(0.0, 3, 2.0).unwrap();
        assert_eq!((lo, hi), (-2.0, 0.0));
        let (_, hi) = alpha_pm(4.0, 3, 2.0).unwrap();
        assert!((hi - (5f64.sqrt() - 1.0)).abs() < 1e-15);
        for (l, d, m) in [(0.3, 3, 2.0), (7.0, 5, 3.5), (100.0, 3, 10.0)] {
            let (lo, hi) = alpha_pm(l, d, m).unwrap();
            let s = d as f64 + m - 3.0;
            assert!((lo + hi + s).abs() < 1e-12 * s);
            assert!((lo * hi + l).abs() < 1e-12 * l.max(1.0));
            assert!(hi >= 0.0 && lo <= 0.0);
        }
    }

    #[test]
    fn beta_branches() {
        let (b, c) = beta_of_lambda(1.0, 3, 2.0, 1e-6).unwrap();
        assert_eq!(c, BetaCase::MGreater);
        assert!((b - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(
            beta_of_lambda(1.0, 3, 10.0, 1e-6).unwrap().1,
            BetaCase::MGreater
        );
        let (b, c) = beta_of_lambda(8.0, 10, 2.0, 1e-6).unwrap();
        assert_eq!((b, c), (1.0, BetaCase::MLess));
        // m = d + 2α − 3 exactly when λ = α² + (d+m−3)α with α = (m−d+3)/2.
        let (d, m) = (3, 3.0);
        let alpha: f64 = (m - d as f64 + 3.0) / 2.0;
        let lambda = alpha * alpha + (d as f64 + m - 3.0) * alpha;
        let (b, c) = beta_of_lambda(lambda, d, m, 1e-3).unwrap();
        assert_eq!(c, BetaCase::MEqual);
        assert_eq!(b, 1.0 - 1e-3);
    }

    #[test]
    fn table_entries() {
        let iso = WeightSpec::isotropic(3, 2.0, 1.0).unwrap();
        assert_eq!(
            shortcut_table(&iso),
            Some(ShortcutEntry::QuadraticCoupledEqual)
        );
        let cube = WeightSpec::sum_of_powers(4.0, vec![1.0, 1.0]).unwrap();
        assert_eq!(
            shortcut_table(&cube),
            Some(ShortcutEntry::HigherWithSeparated)
        );
        let mixed = WeightSpec::new(4, 2.0, 2.0, vec![1.0, 2.0, 1.0], vec![1, 3], vec![2]).unwrap();
        assert_eq!(
            shortcut_table(&mixed),
            Some(ShortcutEntry::QuadraticMixedMatched)
        );
        let uneven = WeightSpec::sum_of_powers(2.0, vec![1.0, 2.0]).unwrap();
        assert_eq!(shortcut_table(&uneven), None);
        let coupled = WeightSpec::new(3, 3.0, 1.0, vec![1.0, 1.0], vec![1, 2], vec![]).unwrap();
        assert_eq!(shortcut_table(&coupled), None);
    }

    #[test]
    fn predictions() {
        let iso = WeightSpec::isotropic(3, 2.0, 1.0).unwrap();
        let r = predict_rates(&iso, None).unwrap();
        assert_eq!(r.lambda1_source, LambdaSource::Shortcut);
        assert!((r.alpha - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((r.gradient_exponent_eps - (2f64.sqrt() - 2.0) / 2.0).abs() < 1e-15);

        let uneven = WeightSpec::sum_of_powers(2.0, vec![1.0, 2.0]).unwrap();
        let r = predict_rates_with(&uneven, None, 512).unwrap();
        assert_eq!(r.lambda1_source, LambdaSource::Computed);
        assert!(r.lambda1 < 1.0 && r.alpha < 2f64.sqrt() - 1.0);

        let r = predict_rates(&uneven, Some(1.0)).unwrap();
        assert_eq!(r.lambda1_source, LambdaSource::Override);

        let d4 = WeightSpec::sum_of_powers(4.0, vec![1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            predict_rates(&d4, None),
            Err(Error::Unsupported(_))
        ));
        let d4c = WeightSpec::isotropic(4, 3.0, 1.5).unwrap();
        assert_eq!(predict_rates(&d4c, None).unwrap().lambda1, 2.0);
    }

    #[test]
    fn separated_quartic_entry_disagrees_with_the_computation() {
        // The m > 2 table entry claims λ₁ = 1 for the cube weight; the
        // discretization gives a value well below it.
        let cube = WeightSpec::sum_of_powers(4.0, vec![1.0, 1.0]).unwrap();
        let r = predict_rates_with(&cube, None, 512).unwrap();
        assert_eq!(r.lambda1_source, LambdaSource::Computed);
        assert!((r.lambda1 - 0.92564).abs() < 1e-4, "{}", r.lambda1);
    }
}
