//! Structured run records: one check per verified quantity, each carrying
//! its computed value, the expected value with the source that produced it,
//! the tolerance, and the verdict.

use super::config::ScenarioConfig;
use crate::Result;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Stable schema version of the JSON report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectedSource {
    /// Closed-form value computed independently of the main pipeline.
    ClosedForm,
    /// Exact identity (normalizations, vanishing statements, symmetry).
    Identity,
    /// Agreement between two independent computational routes.
    CrossCheck,
    /// Anchored to a previously recorded run of this artifact.
    RegressionAnchor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CheckValue {
    Real { value: f64 },
    Complex { re: f64, im: f64 },
    Bool { value: bool },
    Text { value: String },
}

impl CheckValue {
    pub fn real(v: f64) -> CheckValue {
        CheckValue::Real { value: v }
    }

    pub fn complex(v: Complex64) -> CheckValue {
        CheckValue::Complex { re: v.re, im: v.im }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            CheckValue::Real { value } => Some(*value),
            CheckValue::Complex { re, im } if im.abs() < 1e-12 => Some(*re),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub computed: CheckValue,
    pub expected: CheckValue,
    pub expected_source: ExpectedSource,
    pub tolerance: f64,
    pub pass: bool,
}

/// Free-form measured quantities recorded without a verdict (for example
/// the pointwise gap between the two Chern-form constructions).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub name: String,
    pub value: CheckValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub radial_order: usize,
    pub angular_order: usize,
    pub mc_samples: usize,
    pub wall_time_ms: u64,
    pub version: String,
    pub base_manifold: String,
    /// Recorded measure convention: the Fubini-Study profile carries no
    /// 2 pi factor, and `sqrt(-1) dw dw-bar` integrates as `2 dx dy`.
    pub omega_normalization: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub scenario: String,
    pub config: ScenarioConfig,
    pub checks: Vec<CheckRecord>,
    pub observations: Vec<Observation>,
    pub metadata: RunMetadata,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> Vec<&CheckRecord> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| crate::Error::Serialize(e.to_string()))
    }

    /// JSON with volatile metadata zeroed; two runs with one config and seed
    /// agree byte-for-byte on this form.
    pub fn canonical_json(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.metadata.wall_time_ms = 0;
        canonical.to_json()
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    /// One summary line per check.
    pub fn render_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                let verdict = if c.pass { "pass" } else { "FAIL" };
                format!(
                    "[{verdict}] {}: computed {} expected {} (tol {:.1e})",
                    c.name,
                    render_value(&c.computed),
                    render_value(&c.expected),
                    c.tolerance
                )
            })
            .collect()
    }
}

fn render_value(v: &CheckValue) -> String {
    match v {
        CheckValue::Real { value } => format!("{value:.9e}"),
        CheckValue::Complex { re, im } => format!("{re:.9e}{im:+.9e}i"),
        CheckValue::Bool { value } => value.to_string(),
        CheckValue::Text { value } => value.clone(),
    }
}

/// Accumulates checks and observations during one scenario run.
pub struct ReportBuilder {
    config: ScenarioConfig,
    checks: Vec<CheckRecord>,
    observations: Vec<Observation>,
    started: std::time::Instant,
    base_manifold: String,
}

impl ReportBuilder {
    pub fn new(config: &ScenarioConfig, base_manifold: &str) -> ReportBuilder {
        ReportBuilder {
            config: config.clone(),
            checks: Vec::new(),
            observations: Vec::new(),
            started: std::time::Instant::now(),
            base_manifold: base_manifold.to_string(),
        }
    }

    /// `|computed - expected| <= tolerance`, complex-aware.
    pub fn check_close(
        &mut self,
        name: impl Into<String>,
        computed: Complex64,
        expected: Complex64,
        source: ExpectedSource,
        default_tolerance: f64,
    ) {
        let name = name.into();
        let tolerance = self.config.tolerance(&name, default_tolerance);
        let pass = (computed - expected).norm() <= tolerance;
        self.checks.push(CheckRecord {
            name,
            computed: CheckValue::complex(computed),
            expected: CheckValue::complex(expected),
            expected_source: source,
            tolerance,
            pass,
        });
    }

    pub fn check_close_real(
        &mut self,
        name: impl Into<String>,
        computed: f64,
        expected: f64,
        source: ExpectedSource,
        default_tolerance: f64,
    ) {
        let name = name.into();
        let tolerance = self.config.tolerance(&name, default_tolerance);
        let pass = (computed - expected).abs() <= tolerance;
        self.checks.push(CheckRecord {
            name,
            computed: CheckValue::real(computed),
            expected: CheckValue::real(expected),
            expected_source: source,
            tolerance,
            pass,
        });
    }

    /// `computed <= bound + tolerance`.
    pub fn check_at_most(
        &mut self,
        name: impl Into<String>,
        computed: f64,
        bound: f64,
        source: ExpectedSource,
        default_tolerance: f64,
    ) {
        let name = name.into();
        let tolerance = self.config.tolerance(&name, default_tolerance);
        let pass = computed <= bound + tolerance;
        self.checks.push(CheckRecord {
            name,
            computed: CheckValue::real(computed),
            expected: CheckValue::real(bound),
            expected_source: source,
            tolerance,
            pass,
        });
    }

    pub fn check_true(
        &mut self,
        name: impl Into<String>,
        computed: bool,
        source: ExpectedSource,
    ) {
        self.checks.push(CheckRecord {
            name: name.into(),
            computed: CheckValue::Bool { value: computed },
            expected: CheckValue::Bool { value: true },
            expected_source: source,
            tolerance: 0.0,
            pass: computed,
        });
    }

    pub fn observe(&mut self, name: impl Into<String>, value: CheckValue) {
        self.observations.push(Observation {
            name: name.into(),
            value,
        });
    }

    pub fn finish(self) -> Report {
        let quad = &self.config.quadrature;
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            scenario: self.config.scenario.name().to_string(),
            metadata: RunMetadata {
                seed: quad.seed,
                radial_order: quad.radial_order,
                angular_order: quad.angular_order,
                mc_samples: quad.mc_samples,
                wall_time_ms: self.started.elapsed().as_millis() as u64,
                version: env!("CARGO_PKG_VERSION").to_string(),
                base_manifold: self.base_manifold,
                omega_normalization: "fs-profile-no-2pi; sqrt(-1) dw dw-bar = 2 dx dy".into(),
            },
            config: self.config,
            checks: self.checks,
            observations: self.observations,
        }
    }
}
