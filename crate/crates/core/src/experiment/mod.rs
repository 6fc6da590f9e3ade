//! Configuration, orchestration and result export.

mod config;
mod curves;
mod run;

use std::path::Path;

use serde::Serialize;

pub use config::{ExperimentConfig, SweepParam, FULL_SCALE_RUNS, FULL_SCALE_SYMBOLS};
pub use curves::{emit_channel_curves, ChannelCurves};
pub use run::{
    run_point, run_single, run_sweep, write_rows_csv, write_rows_csv_to, ResultRow, RunReport, SweepOutcome, Trial,
    RESULT_HEADER,
};

use crate::error::{Error, Result};

/// Per-invocation record written next to the CSV outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary<T: Serialize> {
    pub command: String,
    pub molsync_version: &'static str,
    pub fingerprint: Option<String>,
    /// The effective configuration as TOML.
    pub config: Option<String>,
    pub threshold_mode: Option<String>,
    pub threshold_count: Option<f64>,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub results: T,
}

impl<T: Serialize> RunSummary<T> {
    pub fn new(
        command: &str,
        config: Option<&ExperimentConfig>,
        wall_time_s: f64,
        outputs: Vec<String>,
        results: T,
    ) -> Result<Self> {
        let threshold_count = config.map(|c| c.threshold_count()).transpose()?;
        Ok(RunSummary {
            command: command.to_string(),
            molsync_version: env!("CARGO_PKG_VERSION"),
            fingerprint: config.map(|c| c.fingerprint()),
            config: config.map(|c| c.to_toml_string()),
            threshold_mode: config.map(|c| c.threshold.label()),
            threshold_count,
            wall_time_s,
            outputs,
            results,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))?;
        crate::io::write_atomic(path, |w| {
            w.write_all(json.as_bytes())?;
            w.write_all(b"\n")
        })
    }
}
