//! Output directory bookkeeping and the run manifest.

use plateau_core::io::{fmt_f64, read_csv, write_csv, write_json};
use plateau_core::solver::SolverConfig;
use plateau_core::{PlateauError, Result};
use serde::Serialize;
use std::f64::consts::TAU;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub inputs: Vec<String>,
    pub output_dir: String,
    pub config: SolverConfig,
    /// Every file written, relative to `output_dir`, this one included.
    pub files: Vec<String>,
    pub wall_clock_seconds: f64,
    pub iterations: usize,
    pub threads: usize,
}

/// Tracks the files written into one output directory.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
    started: Instant,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn record(&mut self, path: &Path) {
        let name = path.strip_prefix(&self.root).unwrap_or(path);
        self.files.push(name.to_string_lossy().into_owned());
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name);
        write_json(&p, value)?;
        self.record(&p);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
        let p = self.path(name);
        write_csv(BufWriter::new(File::create(&p)?), header, rows)?;
        self.record(&p);
        Ok(())
    }

    /// Writes `manifest.json` last, listing everything before it.
    pub fn finish(mut self, command: &str, inputs: &[&Path], config: &SolverConfig, iterations: usize) -> Result<()> {
        self.files.push("manifest.json".into());
        let manifest = RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            output_dir: self.root.display().to_string(),
            config: config.clone(),
            files: self.files.clone(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            iterations,
            threads: rayon::current_num_threads(),
        };
        write_json(self.path("manifest.json"), &manifest)
    }
}

/// Header of a boundary trace file: `theta,x1,...,xn`.
fn trace_header(dimension: usize) -> Vec<String> {
    std::iter::once("theta".to_string())
        .chain((1..=dimension).map(|k| format!("x{k}")))
        .collect()
}

/// Rows of the boundary trace sidecar for equispaced samples.
pub fn trace_rows(trace: &[f64], dimension: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let m = trace.len() / dimension;
    let rows = trace
        .chunks(dimension)
        .enumerate()
        .map(|(j, p)| {
            let mut row = vec![TAU * j as f64 / m as f64];
            row.extend_from_slice(p);
            row
        })
        .collect();
    (trace_header(dimension), rows)
}

/// Parses a boundary trace sidecar, returning the flattened samples and
/// the dimension. The angles must be the equispaced ones.
pub fn read_trace(path: &Path) -> Result<(Vec<f64>, usize)> {
    let text = std::fs::read_to_string(path)?;
    let (header, rows) = read_csv(&text)?;
    let dimension = header.len().saturating_sub(1);
    if dimension == 0 || header != trace_header(dimension) {
        return Err(PlateauError::Parse(format!(
            "{}: expected header theta,x1,...,xn",
            path.display()
        )));
    }
    let m = rows.len();
    let mut trace = Vec::with_capacity(m * dimension);
    for (j, row) in rows.iter().enumerate() {
        let expected = TAU * j as f64 / m as f64;
        if (row[0] - expected).abs() > 1e-12 {
            return Err(PlateauError::Parse(format!(
                "{}: sample {j} has theta {} instead of {}",
                path.display(),
                fmt_f64(row[0]),
                fmt_f64(expected)
            )));
        }
        trace.extend_from_slice(&row[1..]);
    }
    Ok((trace, dimension))
}
