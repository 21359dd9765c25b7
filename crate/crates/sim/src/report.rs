//! CSV, JSON and gnuplot outputs for simulation studies and benchmarks.

use std::io::Write;

use serde::Serialize;

use crate::bench::{BenchTable, PhaseScaling};
use crate::dgp::DgpConfig;
use crate::replicate::{EstimatorKind, ReplicationReport};

pub const SIM_SCHEMA: &str = "sim_summary.v1";
pub const BENCH_SCHEMA: &str = "bench.v1";

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary<'a> {
    pub schema: &'static str,
    pub config: &'a DgpConfig,
    pub rs: &'a [usize],
    pub n_reps: usize,
    pub reports: &'a [ReplicationReport],
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSummary<'a> {
    pub schema: &'static str,
    pub config: &'a DgpConfig,
    pub r: usize,
    pub table: &'a BenchTable,
    pub r_scaling: Option<&'a PhaseScaling>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    estimator: &'a str,
    covariate: &'a str,
    n: usize,
    r: usize,
    n_reps: usize,
    failures: usize,
    nb: f64,
    nse: f64,
    mse: f64,
    mse_se: f64,
    mean_time_ms: f64,
    coverage: Option<f64>,
    ase: Option<f64>,
    /// ln(MSE_uni / MSE) at the same (n, r); empty without a UNI row.
    log_mse_ratio_vs_uni: Option<f64>,
}

/// One row per estimator × r × n.
pub fn write_report_csv<W: Write>(reports: &[ReplicationReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for rep in reports {
        let uni = reports
            .iter()
            .find(|o| o.estimator == EstimatorKind::Uni && o.n == rep.n && o.r == rep.r && o.covariate == rep.covariate);
        w.serialize(CsvRow {
            estimator: rep.estimator.name(),
            covariate: rep.covariate,
            n: rep.n,
            r: rep.r,
            n_reps: rep.n_reps,
            failures: rep.failures,
            nb: rep.nb,
            nse: rep.nse,
            mse: rep.mse,
            mse_se: rep.mse_se,
            mean_time_ms: rep.mean_time_ms,
            coverage: rep.coverage,
            ase: rep.ase,
            log_mse_ratio_vs_uni: uni.map(|u| (u.mse / rep.mse).ln()),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct BenchCsvRow<'a> {
    estimator: &'a str,
    covariate: &'a str,
    n: usize,
    r: usize,
    median_ms: f64,
}

pub fn write_bench_csv<W: Write>(table: &BenchTable, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &table.rows {
        w.serialize(BenchCsvRow {
            estimator: row.estimator.name(),
            covariate: row.covariate,
            n: row.n,
            r: row.r,
            median_ms: row.median_ms,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn plot_lines(estimators: &[EstimatorKind], x: usize, y: usize) -> String {
    estimators
        .iter()
        .map(|e| {
            format!(
                "'report.csv' using (strcol(1) eq '{0}' ? ${x} : 1/0):{y} with linespoints title '{0}'",
                e.name()
            )
        })
        .collect::<Vec<_>>()
        .join(", \\\n     ")
}

/// Gnuplot script drawing NB, NSE and log MSE ratio against r from the
/// CSV written by [`write_report_csv`] (expected beside it as report.csv).
pub fn gnuplot_script(estimators: &[EstimatorKind]) -> String {
    let others: Vec<EstimatorKind> = estimators.iter().copied().filter(|e| *e != EstimatorKind::Uni).collect();
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 1500,450\n");
    s.push_str("set output 'plots.png'\n");
    s.push_str("set multiplot layout 1,3\n");
    s.push_str("set key top right\nset xlabel 'r'\nset logscale x\n");
    s.push_str("set title 'NB'\n");
    s.push_str(&format!("plot {}\n", plot_lines(estimators, 4, 7)));
    s.push_str("set title 'NSE'\n");
    s.push_str(&format!("plot {}\n", plot_lines(estimators, 4, 8)));
    s.push_str("set title 'log MSE ratio (UNI / estimator)'\n");
    if others.is_empty() {
        s.push_str("plot 0 notitle\n");
    } else {
        s.push_str(&format!("plot {}\n", plot_lines(&others, 4, 14)));
    }
    s.push_str("unset multiplot\n");
    s
}

/// Gnuplot script for median time against n on log-log axes, reading the
/// CSV written by [`write_bench_csv`] (expected as report.csv).
pub fn bench_gnuplot_script(estimators: &[EstimatorKind]) -> String {
    let lines = estimators
        .iter()
        .map(|e| format!("'report.csv' using (strcol(1) eq '{0}' ? $3 : 1/0):5 with linespoints title '{0}'", e.name()))
        .collect::<Vec<_>>()
        .join(", \\\n     ");
    format!(
        "set datafile separator ','\nset terminal pngcairo size 700,500\nset output 'bench.png'\n\
         set logscale xy\nset xlabel 'n'\nset ylabel 'median time (ms)'\nset key top left\nplot {lines}\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::CovariateKind;
    use crate::replicate::run_replications;

    #[test]
    fn csv_has_one_row_per_report_and_ratio_column() {
        let cfg = DgpConfig::new(2000, CovariateKind::TimeIndependent, 9);
        let out = run_replications(&cfg, &[EstimatorKind::Uni, EstimatorKind::McoxApp], 200, 3).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&out.reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().unwrap().clone();
        assert_eq!(&headers[13], "log_mse_ratio_vs_uni");
        assert_eq!(&headers[3], "r");
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0][13].parse::<f64>().unwrap(), 0.0);
    }

    #[test]
    fn script_references_every_estimator() {
        let s = gnuplot_script(&[EstimatorKind::Uni, EstimatorKind::McoxOpt]);
        assert!(s.contains("'uni'") && s.contains("'mcox-opt'"));
        assert!(s.contains("report.csv"));
    }
}
