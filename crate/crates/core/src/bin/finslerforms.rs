//! Command-line front end: runs one verification scenario (or a parameter
//! scan) from a TOML config, prints one line per check, writes the report,
//! and exits nonzero when any check fails.

use clap::Parser;
use finsler_forms::scenarios::{self, Scenario, ScenarioConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "finslerforms",
    about = "Numerical Segre and Chern forms of holomorphic Finsler bundles",
    after_help = "Scenarios: verify-identities, fiber-normalization, segre, chern, \
                  transgression, gauss-bonnet, einstein, kl, segre-bound, slope, \
                  flatness, positivity-scan, l2-metric; plus `scan` for parameter grids."
)]
struct Cli {
    /// Scenario name, or `scan` (requires a config with a [scan] section).
    scenario: String,

    /// TOML configuration; omitted fields take the scenario defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override the quadrature seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the radial quadrature order.
    #[arg(long)]
    radial_order: Option<usize>,

    /// Override the angular quadrature order.
    #[arg(long)]
    angular_order: Option<usize>,

    /// Override the Monte Carlo sample count.
    #[arg(long)]
    mc_samples: Option<usize>,

    /// Report destination (stdout summary is always printed).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Report format: json (scenario runs) or csv (scans).
    #[arg(long)]
    format: Option<String>,
}

fn load_config(cli: &Cli, scenario: Scenario) -> Result<ScenarioConfig, finsler_forms::Error> {
    let mut config = match &cli.config {
        Some(path) => {
            let loaded = ScenarioConfig::load(path)?;
            if loaded.scenario != scenario {
                return Err(finsler_forms::Error::InvalidConfig(format!(
                    "config is for scenario `{}`, command asked for `{}`",
                    loaded.scenario.name(),
                    scenario.name()
                )));
            }
            loaded
        }
        None => ScenarioConfig::default_for(scenario),
    };
    if let Some(seed) = cli.seed {
        config.quadrature.seed = seed;
        config.samples.seed = seed;
        if let Some(bq) = config.base_quadrature.as_mut() {
            bq.seed = seed;
        }
    }
    if let Some(order) = cli.radial_order {
        config.quadrature.radial_order = order;
    }
    if let Some(order) = cli.angular_order {
        config.quadrature.angular_order = order;
    }
    if let Some(samples) = cli.mc_samples {
        config.quadrature.mc_samples = samples;
    }
    if let Some(out) = &cli.out {
        config.output.path = Some(out.display().to_string());
    }
    if let Some(format) = &cli.format {
        config.output.format = Some(format.clone());
    }
    Ok(config)
}

fn run_scan(config: &ScenarioConfig) -> Result<bool, finsler_forms::Error> {
    let output = scenarios::scan(config)?;
    let csv = output.to_csv();
    match &config.output.path {
        Some(path) => {
            std::fs::write(path, &csv)?;
            println!("scan rows: {}; wrote {}", output.rows.len(), path);
        }
        None => print!("{csv}"),
    }
    Ok(output.all_pass())
}

fn run_scenario(config: &ScenarioConfig) -> Result<bool, finsler_forms::Error> {
    let report = scenarios::run(config)?;
    for line in report.render_lines() {
        println!("{line}");
    }
    let passed = report.checks.iter().filter(|c| c.pass).count();
    println!(
        "{}: {}/{} checks passed ({} ms)",
        report.scenario,
        passed,
        report.checks.len(),
        report.metadata.wall_time_ms
    );
    match config.output.format.as_deref() {
        None | Some("json") => {
            if let Some(path) = &config.output.path {
                report.write_json(std::path::Path::new(path))?;
                println!("report: {path}");
            }
        }
        Some("csv") => {
            return Err(finsler_forms::Error::InvalidConfig(
                "csv output applies to scans; scenario reports are json".into(),
            ))
        }
        Some(other) => {
            return Err(finsler_forms::Error::InvalidConfig(format!(
                "unknown output format `{other}`"
            )))
        }
    }
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = if cli.scenario == "scan" {
        match &cli.config {
            Some(path) => ScenarioConfig::load(path).and_then(|mut config| {
                if let Some(seed) = cli.seed {
                    config.quadrature.seed = seed;
                }
                if let Some(out) = &cli.out {
                    config.output.path = Some(out.display().to_string());
                }
                run_scan(&config)
            }),
            None => {
                eprintln!("error: scan needs --config with a [scan] section");
                return ExitCode::from(2);
            }
        }
    } else {
        cli.scenario
            .parse::<Scenario>()
            .and_then(|scenario| load_config(&cli, scenario))
            .and_then(|config| run_scenario(&config))
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
