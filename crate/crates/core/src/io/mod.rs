//! File formats, configuration and the end-to-end pipeline.

pub mod config;
pub mod float_ext;
pub mod pipeline;
pub mod tables;

pub use config::{AnalysisOptions, ModeRun, RunConfig, ScenarioTemplate, CONFIG_VERSION};
pub use pipeline::{run_pipeline, PipelineError, Stage, Summary};
pub use tables::{read_grid, read_profiles, write_grid, write_profiles};

use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::model::PowerLawFit;

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn write_power_law(fit: &PowerLawFit, path: &Path) -> Result<()> {
    tables::write_text(path, &to_json(fit))
}

pub fn read_power_law(path: &Path) -> Result<PowerLawFit> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| crate::Error::schema(e.line(), None, e.to_string()))
}
