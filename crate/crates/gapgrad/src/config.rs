use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use gapgrad_core::geometry::{CubeSpec, WeightSpec};
use gapgrad_core::solver::{BoundaryData, Forcing, LowerBoundConfig, PolarGrid};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Exponents,
    Eigensolve,
    Decay,
    RateSweep,
    LowerBound,
    Moser,
    Constants,
    Cube,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Exponents => "exponents",
            ExperimentKind::Eigensolve => "eigensolve",
            ExperimentKind::Decay => "decay",
            ExperimentKind::RateSweep => "rate_sweep",
            ExperimentKind::LowerBound => "lower_bound",
            ExperimentKind::Moser => "moser",
            ExperimentKind::Constants => "constants",
            ExperimentKind::Cube => "cube",
        }
    }

    /// Default verdict tolerance.
    pub fn default_tolerance(self) -> f64 {
        match self {
            ExperimentKind::Exponents => 1e-12,
            ExperimentKind::Eigensolve => 1e-6,
            ExperimentKind::Decay => 0.02,
            ExperimentKind::RateSweep => 0.07,
            ExperimentKind::LowerBound => 10.0,
            ExperimentKind::Moser => 0.10,
            ExperimentKind::Constants => 0.0,
            ExperimentKind::Cube => 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_r: usize,
    pub n_theta: usize,
    #[serde(rename = "R0", default = "one")]
    pub r0: f64,
}

fn one() -> f64 {
    1.0
}

impl GridConfig {
    pub fn build(&self) -> gapgrad_core::Result<PolarGrid> {
        PolarGrid::new(self.n_r, self.n_theta, self.r0)
    }
}

/// Log-spaced radii for oscillation profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoConfig {
    pub min: f64,
    pub max: f64,
    #[serde(default = "default_rho_count")]
    pub count: usize,
}

fn default_rho_count() -> usize {
    12
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    Separable,
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            preconditioner: PreconditionerKind::Separable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenConfig {
    /// Finest circle grid.
    pub cells: usize,
    /// Number of eigenpairs.
    pub count: usize,
    /// Extrapolate `λ₁` from `cells/4, cells/2, cells`.
    pub richardson: bool,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            cells: 2048,
            count: 6,
            richardson: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub weight: WeightSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<RhoConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<Forcing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Radial cell counts of the refinement levels (`moser`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<usize>,
    #[serde(default = "default_probe")]
    pub probe_radius: f64,
    #[serde(default)]
    pub lower_bound: LowerBoundConfig,
    /// Overrides the computed `λ₁`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(default)]
    pub eigen: EigenConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cube: Option<CubeSpec>,
    /// Overrides the kind's default verdict tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Random sample points per weight (`constants`).
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_true")]
    pub write_field: bool,
}

fn default_probe() -> f64 {
    2.0
}

fn default_samples() -> usize {
    10_000
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, weight: WeightSpec) -> Self {
        Self {
            kind,
            weight,
            grid: None,
            eps: 0.0,
            eps_list: Vec::new(),
            rho: None,
            boundary: None,
            forcing: None,
            sigma: None,
            levels: Vec::new(),
            probe_radius: default_probe(),
            lower_bound: LowerBoundConfig::default(),
            lambda1: None,
            eigen: EigenConfig::default(),
            cube: None,
            tolerance: None,
            solver: SolverConfig::default(),
            output_dir: None,
            seed: 0,
            samples: default_samples(),
            write_field: true,
        }
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
            .unwrap_or_else(|| self.kind.default_tolerance())
    }

    pub fn polar_grid(&self) -> anyhow::Result<PolarGrid> {
        let g = self
            .grid
            .with_context(|| format!("kind {} needs a [grid] section", self.kind.name()))?;
        Ok(g.build()?)
    }

    /// Checks the fields each kind needs.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.weight.validate().context("invalid weight")?;
        if !(self.eps >= 0.0) {
            bail!("eps = {} must be nonnegative", self.eps);
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0)) {
            bail!("eps_list entries must be positive");
        }
        if self.eps_list.windows(2).any(|w| !(w[1] > w[0])) {
            bail!("eps_list must be sorted ascending");
        }
        if let Some(t) = self.tolerance {
            if !(t >= 0.0) {
                bail!("tolerance {t} must be nonnegative");
            }
        }
        use ExperimentKind::*;
        match self.kind {
            Decay => {
                self.polar_grid()?;
                if self.rho.is_none() {
                    bail!("kind decay needs a [rho] section");
                }
            }
            RateSweep => {
                self.polar_grid()?;
                if self.eps_list.len() < 5 {
                    bail!("kind rate_sweep needs eps_list with at least 5 values");
                }
            }
            LowerBound => {
                self.polar_grid()?;
            }
            Moser => {
                self.polar_grid()?;
                if self.sigma.is_none() {
                    bail!("kind moser needs sigma");
                }
                if self.forcing.is_none() {
                    bail!("kind moser needs a [forcing] section");
                }
            }
            Cube => {
                if self.cube.is_none() {
                    bail!("kind cube needs a [cube] section");
                }
            }
            Exponents | Eigensolve | Constants => {}
        }
        Ok(())
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, is_json, None).with_context(|| format!("parsing {}", path.display()))
    }

    /// Parses a config; `kind` fills in a missing `kind` field and must
    /// agree with a present one.
    pub fn parse(text: &str, json: bool, kind: Option<ExperimentKind>) -> anyhow::Result<Self> {
        let mut value: serde_json::Value = if json {
            serde_json::from_str(text)?
        } else {
            let t: toml::Table = toml::from_str(text)?;
            serde_json::to_value(t)?
        };
        if let Some(k) = kind {
            let obj = value.as_object_mut().context("config must be a table")?;
            match obj.get("kind") {
                None => {
                    obj.insert("kind".into(), serde_json::to_value(k)?);
                }
                Some(v) => {
                    let found: ExperimentKind = serde_json::from_value(v.clone())?;
                    if found != k {
                        bail!(
                            "config kind {} does not match the requested {}",
                            found.name(),
                            k.name()
                        );
                    }
                }
            }
        }
        let config: ExperimentConfig = serde_json::from_value(value)?;
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DECAY: &str = r#"
kind = "decay"
eps = 0.0

[weight]
d = 3
m = 2.0
kappa = [1.0, 1.0]
setA = [1, 2]
setB = []

[grid]
n_r = 64
n_theta = 32

[rho]
min = 0.05
max = 0.5

[boundary]
kind = "eigenmode"
k = 1
"#;

    #[test]
    fn parses_toml() {
        let c = ExperimentConfig::parse(DECAY, false, None).unwrap();
        assert_eq!(c.kind, ExperimentKind::Decay);
        assert_eq!(c.grid.unwrap().r0, 1.0);
        assert_eq!(c.rho.unwrap().count, 12);
        assert_eq!(c.boundary, Some(BoundaryData::Eigenmode { k: 1 }));
        assert_eq!(c.tolerance(), 0.02);
        assert_eq!(c.solver.preconditioner, PreconditionerKind::Separable);
    }

    #[test]
    fn json_round_trip() {
        let c = ExperimentConfig::parse(DECAY, false, None).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back = ExperimentConfig::parse(&text, true, None).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn kind_from_command() {
        let without = DECAY.replacen("kind = \"decay\"", "", 1);
        let c = ExperimentConfig::parse(&without, false, Some(ExperimentKind::Decay)).unwrap();
        assert_eq!(c.kind, ExperimentKind::Decay);
        assert!(ExperimentConfig::parse(DECAY, false, Some(ExperimentKind::Moser)).is_err());
    }

    #[test]
    fn missing_sections() {
        let no_rho = DECAY.replace("[rho]\nmin = 0.05\nmax = 0.5\n", "");
        assert!(ExperimentConfig::parse(&no_rho, false, None).is_err());
        let unsorted = DECAY.replace("eps = 0.0", "eps = 0.0\neps_list = [0.1, 0.01]");
        assert!(ExperimentConfig::parse(&unsorted, false, None).is_err());
        let typo = DECAY.replace("eps = 0.0", "epsilon = 0.0");
        assert!(ExperimentConfig::parse(&typo, false, None).is_err());
    }
}
