//! Scenario configuration: a fully serializable mirror of everything a run
//! needs, loadable from TOML and embedded verbatim in every report.

use crate::baseint::{BaseManifold, BaseQuadrature};
use crate::fiberint::{QuadMode, QuadratureSpec};
use crate::finsler::{MetricModel, SamplePlan};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::str::FromStr;

/// The scenario catalogue.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    VerifyIdentities,
    FiberNormalization,
    Segre,
    Chern,
    Transgression,
    GaussBonnet,
    Einstein,
    Kl,
    SegreBound,
    Slope,
    Flatness,
    PositivityScan,
    L2Metric,
}

impl Scenario {
    pub const ALL: [Scenario; 13] = [
        Scenario::VerifyIdentities,
        Scenario::FiberNormalization,
        Scenario::Segre,
        Scenario::Chern,
        Scenario::Transgression,
        Scenario::GaussBonnet,
        Scenario::Einstein,
        Scenario::Kl,
        Scenario::SegreBound,
        Scenario::Slope,
        Scenario::Flatness,
        Scenario::PositivityScan,
        Scenario::L2Metric,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::VerifyIdentities => "verify-identities",
            Scenario::FiberNormalization => "fiber-normalization",
            Scenario::Segre => "segre",
            Scenario::Chern => "chern",
            Scenario::Transgression => "transgression",
            Scenario::GaussBonnet => "gauss-bonnet",
            Scenario::Einstein => "einstein",
            Scenario::Kl => "kl",
            Scenario::SegreBound => "segre-bound",
            Scenario::Slope => "slope",
            Scenario::Flatness => "flatness",
            Scenario::PositivityScan => "positivity-scan",
            Scenario::L2Metric => "l2-metric",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Scenario> {
        Scenario::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario `{s}`")))
    }
}

/// Metric family selection and parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// `hermitian-diagonal` or `finsler-perturbed`.
    pub family: String,
    /// Line-bundle degrees, one row per fibre index, one entry per base
    /// factor.
    pub degrees: Vec<Vec<i32>>,
    /// Perturbation weight of the non-Hermitian family.
    pub epsilon: f64,
    /// When nonempty, tensors the model by this Hermitian line weight.
    pub line_degrees: Vec<i32>,
    /// When nonempty, restricts the model to these fibre coordinates.
    pub keep: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            family: "hermitian-diagonal".into(),
            degrees: vec![vec![1], vec![1]],
            epsilon: 0.1,
            line_degrees: Vec::new(),
            keep: Vec::new(),
        }
    }
}

impl ModelConfig {
    pub fn hermitian(degrees: Vec<Vec<i32>>) -> ModelConfig {
        ModelConfig {
            family: "hermitian-diagonal".into(),
            degrees,
            ..Default::default()
        }
    }

    pub fn perturbed(degrees: Vec<Vec<i32>>, epsilon: f64) -> ModelConfig {
        ModelConfig {
            family: "finsler-perturbed".into(),
            degrees,
            epsilon,
            ..Default::default()
        }
    }

    pub fn build(&self) -> Result<MetricModel> {
        let n = self
            .degrees
            .first()
            .map(Vec::len)
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidConfig("model needs a nonempty degree table".into()))?;
        let mut model = match self.family.as_str() {
            "hermitian-diagonal" => MetricModel::hermitian_diagonal(n, self.degrees.clone())?,
            "finsler-perturbed" => {
                MetricModel::finsler_perturbed(n, self.degrees.clone(), self.epsilon)?
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown metric family `{other}`"
                )))
            }
        };
        if !self.line_degrees.is_empty() {
            model = model.tensor_by_line(self.line_degrees.clone())?;
        }
        if !self.keep.is_empty() {
            model = model.restricted(self.keep.clone())?;
        }
        Ok(model)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseConfig {
    /// `cp1` or `cp1xcp1`.
    pub kind: String,
}

impl Default for BaseConfig {
    fn default() -> Self {
        BaseConfig { kind: "cp1".into() }
    }
}

impl BaseConfig {
    pub fn cp1() -> BaseConfig {
        BaseConfig { kind: "cp1".into() }
    }

    pub fn cp1_x_cp1() -> BaseConfig {
        BaseConfig {
            kind: "cp1xcp1".into(),
        }
    }

    pub fn build(&self) -> Result<BaseManifold> {
        match self.kind.as_str() {
            "cp1" => Ok(BaseManifold::cp1()),
            "cp1xcp1" => Ok(BaseManifold::cp1_x_cp1()),
            other => Err(Error::InvalidConfig(format!(
                "unknown base manifold `{other}`"
            ))),
        }
    }
}

/// Quadrature plan mirror for fibre and base integration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    /// `tensor` or `montecarlo`.
    pub mode: String,
    pub radial_order: usize,
    pub angular_order: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub check_convergence: bool,
    /// Base integration only: integrate radii and multiply by the phase
    /// volume when the integrand is phase-invariant (probed).
    pub radial_symmetric: bool,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            mode: "tensor".into(),
            radial_order: 32,
            angular_order: 16,
            mc_samples: 200_000,
            seed: 1700,
            tolerance: 1e-6,
            check_convergence: false,
        radial_symmetric: false,
        }
    }
}

impl QuadConfig {
    pub fn tensor(radial_order: usize, angular_order: usize) -> QuadConfig {
        QuadConfig {
            radial_order,
            angular_order,
            ..Default::default()
        }
    }

    pub fn monte_carlo(mc_samples: usize) -> QuadConfig {
        QuadConfig {
            mode: "montecarlo".into(),
            mc_samples,
            ..Default::default()
        }
    }

    pub fn radial(radial_order: usize) -> QuadConfig {
        QuadConfig {
            radial_order,
            angular_order: 8,
            radial_symmetric: true,
            ..Default::default()
        }
    }

    pub fn spec(&self) -> Result<QuadratureSpec> {
        let mode = match self.mode.as_str() {
            "tensor" => QuadMode::Tensor,
            "montecarlo" => QuadMode::MonteCarlo,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown quadrature mode `{other}`"
                )))
            }
        };
        Ok(QuadratureSpec {
            mode,
            radial_order: self.radial_order,
            angular_order: self.angular_order,
            mc_samples: self.mc_samples,
            seed: self.seed,
            tolerance: self.tolerance,
            check_convergence: self.check_convergence,
        })
    }

    pub fn base_quadrature(&self) -> Result<BaseQuadrature> {
        Ok(BaseQuadrature {
            spec: self.spec()?,
            radial_symmetric: self.radial_symmetric,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub count: usize,
    pub seed: u64,
    pub chart_radius: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            count: 100,
            seed: 41,
            chart_radius: 1.0,
        }
    }
}

impl SampleConfig {
    pub fn plan(&self) -> SamplePlan {
        SamplePlan::new(self.count, self.seed, self.chart_radius)
    }

    pub fn with_count(mut self, count: usize) -> SampleConfig {
        self.count = count;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<String>,
    /// `json` or `csv` (csv applies to scans).
    pub format: Option<String>,
}

/// Parameter grid for `scan` runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// `epsilon` or `degree`.
    pub parameter: String,
    pub values: Vec<f64>,
}

/// Everything one scenario run needs; a report embeds the exact instance
/// that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub base: BaseConfig,
    #[serde(default)]
    pub quadrature: QuadConfig,
    /// Base-integration override; falls back to `quadrature` with the
    /// radial-symmetric flag off.
    #[serde(default)]
    pub base_quadrature: Option<QuadConfig>,
    #[serde(default)]
    pub samples: SampleConfig,
    /// Per-check tolerance overrides by exact check name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
}

impl ScenarioConfig {
    /// The pinned defaults for one scenario: models, quadrature orders and
    /// sample plans chosen so that every documented tolerance is met on the
    /// reference hardware.
    pub fn default_for(scenario: Scenario) -> ScenarioConfig {
        let mut config = ScenarioConfig {
            scenario,
            model: ModelConfig::default(),
            base: BaseConfig::cp1(),
            quadrature: QuadConfig::tensor(32, 16),
            base_quadrature: None,
            samples: SampleConfig::default(),
            tolerances: BTreeMap::new(),
            output: OutputConfig::default(),
            scan: None,
        };
        match scenario {
            Scenario::VerifyIdentities => {
                config.model = ModelConfig::perturbed(vec![vec![1], vec![1]], 0.1);
            }
            Scenario::FiberNormalization => {
                config.model = ModelConfig::perturbed(vec![vec![1], vec![1]], 0.1);
                config.samples = SampleConfig::default().with_count(10);
                config.quadrature.mc_samples = 1_000_000;
            }
            Scenario::Segre => {
                config.model = ModelConfig::perturbed(vec![vec![1], vec![1]], 0.1);
                config.samples = SampleConfig::default().with_count(3);
            }
            Scenario::Chern => {
                config.model = ModelConfig::perturbed(vec![vec![1], vec![1]], 0.1);
                config.base_quadrature = Some(QuadConfig::radial(24));
            }
            Scenario::Transgression => {
                config.model = ModelConfig::perturbed(vec![vec![1], vec![1]], 0.1);
                config.quadrature = QuadConfig::tensor(48, 16);
            }
            Scenario::GaussBonnet => {
                config.model = ModelConfig::hermitian(vec![vec![2]]);
                config.base_quadrature = Some(QuadConfig::radial(24));
            }
            Scenario::Einstein => {
                config.model = ModelConfig::hermitian(vec![vec![1], vec![1]]);
                config.base_quadrature = Some(QuadConfig::radial(24));
                config.samples = SampleConfig::default().with_count(60);
            }
            Scenario::Kl | Scenario::SegreBound => {
                config.model = ModelConfig::hermitian(vec![vec![1, 1], vec![1, 1]]);
                config.base = BaseConfig::cp1_x_cp1();
                config.quadrature = QuadConfig::tensor(32, 12);
                config.samples = SampleConfig::default().with_count(12);
            }
            Scenario::Slope => {
                config.model = ModelConfig::hermitian(vec![vec![1], vec![1]]);
                config.base_quadrature = Some(QuadConfig::radial(24));
            }
            Scenario::Flatness => {
                config.model = ModelConfig::perturbed(vec![vec![0], vec![0]], 0.1);
                config.samples = SampleConfig::default().with_count(40);
            }
            Scenario::PositivityScan => {
                config.model = ModelConfig::perturbed(vec![vec![1], vec![1]], 0.1);
                config.samples = SampleConfig::default().with_count(10);
            }
            Scenario::L2Metric => {
                config.model = ModelConfig::perturbed(vec![vec![0], vec![0]], 0.1);
            }
        }
        config
    }

    pub fn from_toml(text: &str) -> Result<ScenarioConfig> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config parse: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<ScenarioConfig> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Tolerance for a named check, honoring overrides.
    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let config = ScenarioConfig::default_for(Scenario::Chern);
        let text = config.to_toml();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let config = ScenarioConfig::from_toml(
            r#"
scenario = "fiber-normalization"

[model]
family = "finsler-perturbed"
degrees = [[1], [2]]
epsilon = 0.05
"#,
        )
        .unwrap();
        assert_eq!(config.scenario, Scenario::FiberNormalization);
        assert_eq!(config.model.epsilon, 0.05);
        assert_eq!(config.quadrature.radial_order, 32);
    }

    #[test]
    fn unknown_scenario_rejected() {
        assert!(ScenarioConfig::from_toml("scenario = \"nope\"").is_err());
        assert!("frobnicate".parse::<Scenario>().is_err());
    }

    #[test]
    fn model_composition() {
        let mut mc = ModelConfig::hermitian(vec![vec![1], vec![1]]);
        mc.line_degrees = vec![1];
        let model = mc.build().unwrap();
        assert_eq!(model.frame().r(), 2);
        let mut rc = ModelConfig::perturbed(vec![vec![1], vec![1]], 0.1);
        rc.keep = vec![0];
        let model = rc.build().unwrap();
        assert_eq!(model.frame().r(), 1);
    }
}
