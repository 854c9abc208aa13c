//! Parameter scans: rerun one scenario over a grid of model parameters and
//! emit one CSV row of check values per grid point.

use super::config::ScenarioConfig;
use super::report::{CheckValue, Report};
use super::runner;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ScanRow {
    pub value: f64,
    pub min_levi_eigenvalue: f64,
    pub report: Report,
}

#[derive(Clone, Debug)]
pub struct ScanOutput {
    pub parameter: String,
    pub rows: Vec<ScanRow>,
}

pub fn scan(config: &ScenarioConfig) -> Result<ScanOutput> {
    let scan_cfg = config
        .scan
        .clone()
        .ok_or_else(|| Error::InvalidConfig("scan runs need a [scan] section".into()))?;
    let mut rows = Vec::with_capacity(scan_cfg.values.len());
    for &value in &scan_cfg.values {
        let mut grid_config = config.clone();
        grid_config.model = runner::scan_model_config(&config.model, &scan_cfg.parameter, value)?;
        grid_config.scan = None;
        let report = runner::run(&grid_config)?;
        let model = grid_config.model.build()?;
        let min_levi = runner::min_levi_eigenvalue(&model, &grid_config.samples.plan())?;
        rows.push(ScanRow {
            value,
            min_levi_eigenvalue: min_levi,
            report,
        });
    }
    Ok(ScanOutput {
        parameter: scan_cfg.parameter,
        rows,
    })
}

fn csv_cell(value: &CheckValue) -> String {
    match value {
        CheckValue::Real { value } => format!("{value}"),
        CheckValue::Complex { re, im } => format!("{re}{im:+}i"),
        CheckValue::Bool { value } => value.to_string(),
        CheckValue::Text { value } => format!("\"{}\"", value.replace('"', "'")),
    }
}

impl ScanOutput {
    /// One row per grid point; columns are the parameter, the minimum Levi
    /// eigenvalue over the sample plan, every check's computed value, and
    /// the overall verdict. Empty grids emit the header alone.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let check_names: Vec<String> = self
            .rows
            .first()
            .map(|row| row.report.checks.iter().map(|c| c.name.clone()).collect())
            .unwrap_or_default();
        out.push_str(&self.parameter);
        out.push_str(",min_levi_eigenvalue");
        for name in &check_names {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",all_pass\n");
        for row in &self.rows {
            out.push_str(&format!("{}", row.value));
            out.push_str(&format!(",{}", row.min_levi_eigenvalue));
            for name in &check_names {
                out.push(',');
                if let Some(check) = row.report.check(name) {
                    out.push_str(&csv_cell(&check.computed));
                }
            }
            out.push_str(&format!(",{}\n", row.report.all_pass()));
        }
        out
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.report.all_pass())
    }
}

#[cfg(test)]
mod tests {
    use super::super::config::{ScanConfig, Scenario, ScenarioConfig};
    use super::*;

    #[test]
    fn empty_grid_emits_header_only() {
        let mut config = ScenarioConfig::default_for(Scenario::Flatness);
        config.scan = Some(ScanConfig {
            parameter: "epsilon".into(),
            values: vec![],
        });
        let output = scan(&config).unwrap();
        let csv = output.to_csv();
        assert_eq!(csv, "epsilon,min_levi_eigenvalue,all_pass\n");
    }

    #[test]
    fn unknown_parameter_rejected() {
        let mut config = ScenarioConfig::default_for(Scenario::Flatness);
        config.scan = Some(ScanConfig {
            parameter: "weirdness".into(),
            values: vec![0.1],
        });
        assert!(scan(&config).is_err());
    }
}
