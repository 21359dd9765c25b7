//! JSON records written to result.json.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use mcox_core::mcox::Interval;
use mcox_core::Result;
use nalgebra::DMatrix;
use serde::Serialize;

pub const FIT_SCHEMA: &str = "fit_result.v1";
pub const MCOX_SCHEMA: &str = "mcox_result.v1";

#[derive(Debug, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Coefficient {
    pub fn table(names: &[String], beta: &[f64], se: &[f64], intervals: Option<&[Interval]>) -> Vec<Self> {
        names
            .iter()
            .enumerate()
            .map(|(k, name)| Coefficient {
                name: name.clone(),
                estimate: beta[k],
                std_error: se[k],
                lower: intervals.map(|iv| iv[k].lower),
                upper: intervals.map(|iv| iv[k].upper),
            })
            .collect()
    }
}

#[derive(Debug, Serialize)]
pub struct FitTimings {
    pub total: f64,
}

#[derive(Debug, Serialize)]
pub struct FitOutput {
    pub schema: &'static str,
    pub covariate_path: String,
    pub n: usize,
    pub events: usize,
    pub dropped_rows: usize,
    pub converged: bool,
    pub iterations: usize,
    pub final_score_norm: f64,
    /// Log partial likelihood divided by n.
    pub loglik: f64,
    pub level: f64,
    pub coefficients: Vec<Coefficient>,
    pub variance: Vec<Vec<f64>>,
    pub timings_ms: FitTimings,
}

#[derive(Debug, Serialize)]
pub struct McoxTimings {
    pub pilot: f64,
    pub moment_pass: f64,
    pub subsample_fit: f64,
    pub correction: f64,
    pub total: f64,
}

#[derive(Debug, Serialize)]
pub struct McoxOutput {
    pub schema: &'static str,
    pub covariate_path: String,
    pub n: usize,
    pub dropped_rows: usize,
    pub moment: &'static str,
    pub moment_dim: usize,
    pub seed: u64,
    pub r: usize,
    pub r0: usize,
    pub realized_r: usize,
    pub realized_pilot: usize,
    pub level: f64,
    pub uni_converged: bool,
    pub uni_iterations: usize,
    pub beta_uni: Vec<f64>,
    pub uni_std_errors: Vec<f64>,
    pub beta_mcox: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_oses: Option<Vec<f64>>,
    pub variance: Vec<Vec<f64>>,
    pub coefficients: Vec<Coefficient>,
    /// Mean of √diag V̂_h.
    pub ase: f64,
    /// Mean of the UNI standard errors.
    pub uni_ase: f64,
    pub alpha: Option<f64>,
    pub g2_norm: f64,
    pub fallback: bool,
    pub omega22_rank: usize,
    pub warnings: Vec<String>,
    pub timings_ms: McoxTimings,
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
