//! Experiment runner: builds a scenario from a config, runs one named
//! verification experiment and reports every check with its pass rule.

pub mod config;
pub mod error;
pub mod experiments;
pub mod probes;
pub mod report;

use std::time::Instant;

pub use config::{ExperimentConfig, Params, Preset, ScenarioConfig, Tolerances};
pub use error::{HarnessError, Result};
pub use experiments::Experiment;
pub use report::{CheckRecord, Report};

use experiments::{dispatch, Ctx};
use report::{ScenarioSummary, REPORT_FORMAT};

/// Runs the configured experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let start = Instant::now();
    let model = cfg.scenario.build()?;
    let scenario = ScenarioSummary {
        preset: cfg.scenario.preset.map(|p| serde_json::to_value(p).expect("presets serialize").as_str().unwrap_or_default().to_string()),
        model: model.space().to_string(),
        dim: model.dim(),
        total_mass: model.total_mass(),
    };
    let records = dispatch(&Ctx { model, cfg })?;
    let pass = !records.is_empty() && records.iter().all(|r| r.pass);
    Ok(Report {
        format: REPORT_FORMAT,
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment,
        identity: cfg.experiment.identity().to_string(),
        scenario,
        seed: cfg.seed,
        n_samples: cfg.params.n_samples,
        records,
        pass,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}
