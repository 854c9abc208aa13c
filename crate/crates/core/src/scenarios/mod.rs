//! Scenario orchestration: builds models and integration plans from a
//! configuration, runs the checks of one named scenario, and emits a
//! structured report. A run fails closed: any check outside tolerance fails
//! the whole run.

pub mod config;
pub mod report;
mod runner;
mod scan;
pub mod tolerances;

pub use config::{
    BaseConfig, ModelConfig, OutputConfig, QuadConfig, SampleConfig, ScanConfig, Scenario,
    ScenarioConfig,
};
pub use report::{
    CheckRecord, CheckValue, ExpectedSource, Observation, Report, ReportBuilder, RunMetadata,
    REPORT_SCHEMA_VERSION,
};
pub use runner::run;
pub use scan::{scan, ScanOutput};
