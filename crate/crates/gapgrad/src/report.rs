use gapgrad_core::regression::RateFit;
use gapgrad_core::solver::PolarGrid;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};

/// How a measured value is compared against its prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|measured − predicted| ≤ tolerance·|predicted|`.
    Relative,
    /// `|measured − predicted| ≤ tolerance`.
    Absolute,
    /// `measured ≤ predicted + tolerance`.
    AtMost,
    /// `measured ≥ predicted − tolerance`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub measured: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    pub fn new(
        name: &str,
        measured: f64,
        predicted: f64,
        tolerance: f64,
        comparison: Comparison,
    ) -> Self {
        let diff = measured - predicted;
        let passed = match comparison {
            Comparison::Relative => diff.abs() <= tolerance * predicted.abs(),
            Comparison::Absolute => diff.abs() <= tolerance,
            Comparison::AtMost => diff <= tolerance,
            Comparison::AtLeast => diff >= -tolerance,
        };
        Self {
            name: name.to_string(),
            measured,
            predicted,
            tolerance,
            comparison,
            passed: passed && measured.is_finite(),
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn line(&self) -> String {
        let op = match self.comparison {
            Comparison::Relative => "rel",
            Comparison::Absolute => "abs",
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        let mut s = format!(
            "{} {}: measured {:.6e}, predicted {:.6e} ({op} tol {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.predicted,
            self.tolerance
        );
        if let Some(n) = &self.note {
            s.push_str(" [");
            s.push_str(n);
            s.push(']');
        }
        s
    }
}

/// A curve for CSV and log-log plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<RateFit>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grids: Vec<PolarGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub solve_residuals: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterations: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral_cells: Option<usize>,
    pub crate_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub results: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<Series>,
    pub verdicts: Vec<Verdict>,
    pub provenance: Provenance,
}

impl ReportBundle {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            kind: config.kind,
            config: config.clone(),
            results: serde_json::Value::Null,
            series: Vec::new(),
            verdicts: Vec::new(),
            provenance: Provenance {
                crate_version: env!("CARGO_PKG_VERSION").to_string(),
                ..Provenance::default()
            },
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} ({} verdicts)\n", self.kind.name(), self.verdicts.len());
        for v in &self.verdicts {
            s.push_str("  ");
            s.push_str(&v.line());
            s.push('\n');
        }
        s
    }
}

/// Run data that changes between identical runs; written next to the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub started_unix_seconds: u64,
    pub elapsed_seconds: f64,
    pub threads: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons() {
        assert!(Verdict::new("a", 1.01, 1.0, 0.02, Comparison::Relative).passed);
        assert!(!Verdict::new("a", 1.03, 1.0, 0.02, Comparison::Relative).passed);
        assert!(Verdict::new("b", 0.5, 1.0, 0.0, Comparison::AtMost).passed);
        assert!(!Verdict::new("c", 0.5, 1.0, 0.0, Comparison::AtLeast).passed);
        assert!(!Verdict::new("d", f64::NAN, 1.0, 1.0, Comparison::Absolute).passed);
        let line = Verdict::new("e", 2.0, 2.0, 1e-3, Comparison::Absolute)
            .with_note("x")
            .line();
        assert!(line.starts_with("PASS e:") && line.ends_with("[x]"));
    }
}
