use nlab_core::boundary_measures::BoundaryMeasure;
use nlab_core::{FamilyKind, GaugeOptions, GridSpec, RhsMode};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Everything a command needs. Runs are deterministic, so there is no seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilyKind,
    pub n_gen: u32,
    #[serde(default)]
    pub m_extra: u32,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default)]
    pub peaks: PeaksConfig,
    #[serde(default)]
    pub weights: WeightPolicy,
    #[serde(default)]
    pub witness: WitnessConfig,
    #[serde(default)]
    pub figure: FigureConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    /// Read points from a sequence CSV instead of building the family.
    pub input_csv: Option<PathBuf>,
    pub kind: KindFilter,
    pub depth: u32,
    pub max_carleson: Option<f64>,
    pub min_separation: Option<f64>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            input_csv: None,
            kind: KindFilter::A,
            depth: 12,
            max_carleson: None,
            min_separation: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindFilter {
    A,
    B,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeaksConfig {
    /// Ladder exponents `j` for `r = 1 - 2^-j`.
    pub ladder: Vec<u32>,
    pub quadrature: GaugeOptions,
    /// Largest admissible uniform gauge; exceeding it exits with code 4.
    pub max_gauge: Option<f64>,
    pub delta_tol: f64,
    pub necessity: Option<NecessityConfig>,
}

impl Default for PeaksConfig {
    fn default() -> Self {
        Self {
            ladder: (1..=10).collect(),
            quadrature: GaugeOptions::default(),
            max_gauge: None,
            delta_tol: 1e-9,
            necessity: None,
        }
    }
}

/// Nodes as `(gap, angle in turns)` with a candidate measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NecessityConfig {
    pub nodes: Vec<(f64, f64)>,
    pub mu: BoundaryMeasure,
    #[serde(default = "default_grid_side")]
    pub grid: usize,
}

fn default_grid_side() -> usize {
    32
}

/// `C1` is certified from the truncation unless given; `C0` defaults to `1.2 / C1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightPolicy {
    pub c0: Option<f64>,
    pub c1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WitnessConfig {
    pub depths: Vec<u32>,
    pub rhs: RhsMode,
    pub grid: GridSpec,
    pub min_ratio: f64,
    /// Reference depth of the optimized Smirnov weight.
    pub reference_depth: u32,
    /// Extra dyadic depth of the kernel-sum grid.
    pub kernel_extra: u32,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        Self {
            depths: vec![2, 3, 4, 5],
            rhs: RhsMode::TwinOnly,
            grid: GridSpec::default(),
            min_ratio: 1.5,
            reference_depth: 2,
            kernel_extra: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FigureConfig {
    /// Dyadic interval `I_{n,k}` whose points are drawn.
    pub n: u32,
    pub k: u64,
    /// Depth-trace CSV written by `witness`, drawn as a line chart when present.
    pub trace_csv: Option<PathBuf>,
}

impl Default for FigureConfig {
    fn default() -> Self {
        Self { n: 1, k: 0, trace_csv: None }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            ConfigError(format!("{origin}:{}:{}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.n_gen == 0 {
            return Err(ConfigError("n_gen: must be at least 1".into()));
        }
        if self.figure.n > self.n_gen.max(1) + 8 || (self.figure.k >> self.figure.n.min(63)) != 0 {
            return Err(ConfigError(format!(
                "figure: interval I_({}, {}) is not a dyadic interval of a shown generation",
                self.figure.n, self.figure.k
            )));
        }
        if self.witness.depths.iter().any(|&d| d == 0) {
            return Err(ConfigError("witness.depths: depths must be positive".into()));
        }
        if self.peaks.ladder.is_empty() {
            return Err(ConfigError("peaks.ladder: need at least one radius".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = RunConfig::parse(r#"{"family": "nevanlinna", "n_gen": 3, "m_extra": 2}"#, "cfg").unwrap();
        assert_eq!(c.check.depth, 12);
        assert_eq!(c.witness.depths, vec![2, 3, 4, 5]);
    }

    #[test]
    fn errors_carry_location() {
        let e = RunConfig::parse("{\"family\": \"nevanlinna\",\n \"n_gen\": 3, \"bogus\": 1}", "cfg").unwrap_err();
        assert!(e.0.starts_with("cfg:2:"), "{}", e.0);
        let e = RunConfig::parse(r#"{"family": "smirnov", "n_gen": 0}"#, "cfg").unwrap_err();
        assert!(e.0.contains("n_gen"));
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::parse(r#"{"family": "smirnov", "n_gen": 4, "weights": {"c1": 0.3}}"#, "cfg").unwrap();
        let back = RunConfig::parse(&serde_json::to_string(&c).unwrap(), "cfg").unwrap();
        assert_eq!(c, back);
    }
}
