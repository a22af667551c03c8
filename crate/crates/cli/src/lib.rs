//! Reproducible batch runs and verification suites on top of `etapair-core`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod verify;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::json;

pub use config::{DeskVariant, Experiment, ExperimentConfig, ModelConfig, Overrides};
pub use error::{CliError, Result};
pub use experiments::Outcome;
pub use output::{OutputWriter, SeriesRecord};

/// Environment variable naming the directory relative output paths resolve against.
pub const OUTPUT_ROOT_ENV: &str = "ETAPAIR_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "etapair-out";

pub fn output_root_from_env() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

pub fn resolve_output_dir(cfg: &ExperimentConfig, root: &Path) -> PathBuf {
    match &cfg.output_dir {
        Some(d) if d.is_absolute() => d.clone(),
        Some(d) => root.join(d),
        None => root.join(cfg.label()),
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub outcome: Outcome,
    pub manifest: serde_json::Value,
}

/// Validates, runs and writes one experiment. Nothing touches the disk
/// unless the config validates and the solvers return.
pub fn run(cfg: &ExperimentConfig, root: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let started = Instant::now();
    let outcome = experiments::execute(cfg)?;
    let wall = started.elapsed().as_secs_f64();

    let dir = resolve_output_dir(cfg, root);
    let mut writer = OutputWriter::create(&dir)?;
    writer.write_series(&outcome.series)?;
    if let Some(sweep) = &outcome.sweep {
        writer.write_sweep(&sweep.rows)?;
        writer.write_realizations(&sweep.realizations)?;
    }
    let mut files = writer.written().to_vec();
    files.push(output::MANIFEST_FILE.to_string());
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = json!({
        "tool": "etapair",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.experiment,
        "config": cfg,
        "seeds": { "run": cfg.seed, "experiment": outcome.seeds },
        "desk_variant": cfg.desk_variant,
        "converged": outcome.converged,
        "results": outcome.results,
        "files": files,
        "wall_time_seconds": wall,
        "timestamp_unix": timestamp,
    });
    writer.write_manifest(&manifest)?;
    Ok(RunSummary { dir, outcome, manifest })
}
