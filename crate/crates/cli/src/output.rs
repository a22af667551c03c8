//! CSV and JSON artifacts. Numbers are written in full double precision,
//! scientific notation, so repeated runs diff byte-for-byte.

use std::fs;
use std::path::{Path, PathBuf};

use etapair_core::disorder::{RealizationResult, SweepRow};
use etapair_core::C64;

use crate::error::Result;

pub const SERIES_FILE: &str = "series.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const REALIZATIONS_FILE: &str = "realizations.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const SERIES_HEADER: [&str; 6] = ["time", "index", "observable", "real", "imag", "abs"];
pub const SWEEP_HEADER: [&str; 6] = ["width", "estimator", "mean", "se", "n_ok", "n_failed"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

/// One row of `series.csv`. `index` is the site, separation or realization
/// the value belongs to (0 for global quantities).
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRecord {
    pub time: f64,
    pub index: usize,
    pub observable: String,
    pub value: C64,
}

impl SeriesRecord {
    pub fn new(time: f64, index: usize, observable: impl Into<String>, value: C64) -> Self {
        SeriesRecord { time, index, observable: observable.into(), value }
    }
}

/// The single writer for one experiment's output directory.
#[derive(Debug)]
pub struct OutputWriter {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputWriter { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn csv(&mut self, file: &str) -> Result<csv::Writer<fs::File>> {
        self.written.push(file.to_string());
        Ok(csv::Writer::from_path(self.dir.join(file))?)
    }

    pub fn write_series(&mut self, rows: &[SeriesRecord]) -> Result<()> {
        let mut w = self.csv(SERIES_FILE)?;
        w.write_record(SERIES_HEADER)?;
        for r in rows {
            w.write_record([
                fmt_f64(r.time),
                r.index.to_string(),
                r.observable.clone(),
                fmt_f64(r.value.re),
                fmt_f64(r.value.im),
                fmt_f64(r.value.norm()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_sweep(&mut self, rows: &[SweepRow]) -> Result<()> {
        let mut w = self.csv(SWEEP_FILE)?;
        w.write_record(SWEEP_HEADER)?;
        for r in rows {
            w.write_record([
                fmt_f64(r.width),
                r.estimator.to_string(),
                fmt_f64(r.mean),
                fmt_f64(r.se),
                r.n_ok.to_string(),
                r.n_failed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-realization results with the seed each was drawn from.
    pub fn write_realizations(&mut self, rows: &[RealizationResult]) -> Result<()> {
        let mut w = self.csv(REALIZATIONS_FILE)?;
        w.write_record(["width", "index", "seed", "phi", "c", "method", "reduced_dim", "converged", "error"])?;
        for r in rows {
            let method = match r.method {
                Some(m) => serde_json::to_value(m)?.as_str().unwrap_or_default().to_string(),
                None => String::new(),
            };
            w.write_record([
                fmt_f64(r.width),
                r.index.to_string(),
                r.seed.to_string(),
                fmt_f64(r.phi),
                fmt_f64(r.c),
                method,
                r.reduced_dim.to_string(),
                r.converged.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_manifest(&mut self, manifest: &serde_json::Value) -> Result<()> {
        self.written.push(MANIFEST_FILE.to_string());
        let mut text = serde_json::to_string_pretty(manifest)?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_use_full_precision_scientific_notation() {
        assert_eq!(fmt_f64(0.5), "5.00000000000000000e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
