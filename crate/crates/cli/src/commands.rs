use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use mcox_core::cox::{newton_raphson_fit, NewtonOptions};
use mcox_core::data::{load_csv, write_csv, CsvLoad, CsvSchema};
use mcox_core::mcox::wald_intervals;
use mcox_core::subsample::SubsamplePlan;
use mcox_core::{run_mcox, CoxError, McoxConfig, MomentChoice, Result};
use mcox_sim::report::{
    bench_gnuplot_script, gnuplot_script, write_bench_csv, write_report_csv, BenchSummary, SimSummary, BENCH_SCHEMA,
    SIM_SCHEMA,
};
use mcox_sim::{
    generate_dataset, run_replications_with, subsample_fit_scaling, timing_benchmark, DgpConfig,
    ReplicationOptions,
};
use nalgebra::{DMatrix, DVector};

use crate::args::{BenchArgs, DataArgs, FitArgs, McoxArgs, NewtonArgs, SimulateArgs};
use crate::output::{
    create_out_dir, mean, rows, write_json, Coefficient, FitOutput, FitTimings, McoxOutput, McoxTimings, FIT_SCHEMA,
    MCOX_SCHEMA,
};

/// How a command that produced output finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NotConverged,
}

fn load(args: &DataArgs) -> Result<CsvLoad> {
    if !args.delimiter.is_ascii() {
        return Err(CoxError::InvalidArgument(format!("delimiter `{}` is not a single byte", args.delimiter)));
    }
    let mut schema = CsvSchema::new(args.time.clone(), args.status.clone(), args.features.clone());
    schema.path = args.path.clone();
    schema.delimiter = args.delimiter as u8;
    let load = load_csv(&args.data, &schema)?;
    if load.dropped_rows > 0 {
        eprintln!("warning: skipped {} rows with missing or non-numeric values", load.dropped_rows);
    }
    Ok(load)
}

fn newton(args: &NewtonArgs) -> Result<NewtonOptions> {
    if !(args.tol > 0.0) {
        return Err(CoxError::InvalidArgument(format!("tolerance {} must be positive", args.tol)));
    }
    Ok(NewtonOptions { tol: args.tol, max_iter: args.max_iter, ..NewtonOptions::default() })
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CoxError::InvalidArgument(format!("confidence level {level} outside (0, 1)")))
    }
}

pub fn fit(args: &FitArgs, out: &Path) -> Result<Outcome> {
    check_level(args.level)?;
    let opts = newton(&args.newton)?;
    let CsvLoad { dataset, dropped_rows } = load(&args.data)?;
    create_out_dir(out)?;
    let start = Instant::now();
    let fit = newton_raphson_fit(&dataset, &DVector::zeros(dataset.p()), &opts)?;
    let total = start.elapsed().as_secs_f64() * 1e3;

    let se: Vec<f64> = fit.standard_errors().iter().copied().collect();
    let intervals = if fit.converged { wald_intervals(&fit.beta_hat, &fit.variance, args.level).ok() } else { None };
    let names = coefficient_names(dataset.feature_names(), dataset.p());
    let record = FitOutput {
        schema: FIT_SCHEMA,
        covariate_path: args.data.path.to_string(),
        n: fit.n,
        events: fit.events,
        dropped_rows,
        converged: fit.converged,
        iterations: fit.n_iter,
        final_score_norm: fit.final_score_norm,
        loglik: fit.loglik,
        level: args.level,
        coefficients: Coefficient::table(&names, fit.beta_hat.as_slice(), &se, intervals.as_deref()),
        variance: rows(&fit.variance),
        timings_ms: FitTimings { total },
    };
    write_json(&out.join("result.json"), &record)?;

    println!("{:<12} {:>12} {:>12}", "coefficient", "estimate", "std.error");
    for c in &record.coefficients {
        println!("{:<12} {:>12.6} {:>12.6}", c.name, c.estimate, c.std_error);
    }
    println!("n = {}, events = {}, iterations = {}, loglik/n = {:.6}", fit.n, fit.events, fit.n_iter, fit.loglik);
    if fit.converged {
        Ok(Outcome::Done)
    } else {
        eprintln!(
            "NotConverged: Newton-Raphson stopped after {} iterations with score norm {:.3e}; partial result written",
            fit.n_iter, fit.final_score_norm
        );
        Ok(Outcome::NotConverged)
    }
}

/// Names of the entries of β. A blockwise path sums feature blocks, so the
/// first block's names label the coefficients.
fn coefficient_names(features: &[String], p: usize) -> Vec<String> {
    if features.len() >= p {
        features[..p].to_vec()
    } else {
        (1..=p).map(|k| format!("beta{k}")).collect()
    }
}

fn read_moment_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_path(path)?;
    let mut values = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        if ncols.is_some_and(|c| c != rec.len()) {
            return Err(CoxError::DimensionMismatch { expected: ncols.unwrap_or(0), found: rec.len() });
        }
        ncols = Some(rec.len());
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| CoxError::InvalidArgument(format!("moment matrix entry `{field}` is not a number")))?;
            values.push(v);
        }
        nrows += 1;
    }
    let Some(ncols) = ncols else {
        return Err(CoxError::InvalidArgument(format!("moment matrix file {} is empty", path.display())));
    };
    Ok(DMatrix::from_row_slice(nrows, ncols, &values))
}

fn moment_choice(spec: &str) -> Result<MomentChoice> {
    match spec {
        "opt" => Ok(MomentChoice::Optimal),
        "aft" => Ok(MomentChoice::Aft),
        other => match other.strip_prefix("linear:") {
            Some(file) => Ok(MomentChoice::Linear(read_moment_matrix(Path::new(file))?)),
            None => Err(CoxError::InvalidArgument(format!("unknown moment `{other}`; use opt, aft or linear:FILE"))),
        },
    }
}

pub fn mcox(args: &McoxArgs, out: &Path) -> Result<Outcome> {
    check_level(args.level)?;
    if args.r == 0 {
        return Err(CoxError::InvalidArgument("subsample size must be positive".into()));
    }
    let moment = moment_choice(&args.moment)?;
    let CsvLoad { dataset, dropped_rows } = load(&args.data)?;
    create_out_dir(out)?;

    let mut plan = SubsamplePlan::new(args.r, args.seed);
    if let Some(r0) = args.r0 {
        plan = plan.with_pilot_size(r0);
    }
    let mut cfg = McoxConfig::new(plan, moment);
    cfg.with_oses = args.with_oses;
    cfg.newton = newton(&args.newton)?;
    let run = run_mcox(&dataset, &cfg)?;
    let res = &run.result;

    let uni_se: Vec<f64> = run.uni.standard_errors().iter().copied().collect();
    let se: Vec<f64> = res.variance.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
    let intervals = wald_intervals(&res.beta_mcox, &res.variance, args.level).ok();
    let names = coefficient_names(dataset.feature_names(), dataset.p());
    let t = run.timings;
    let record = McoxOutput {
        schema: MCOX_SCHEMA,
        covariate_path: args.data.path.to_string(),
        n: dataset.n(),
        dropped_rows,
        moment: cfg.moment.name(),
        moment_dim: run.moment.q(),
        seed: args.seed,
        r: plan.expected_size,
        r0: plan.pilot_size,
        realized_r: run.realized_r,
        realized_pilot: run.realized_pilot,
        level: args.level,
        uni_converged: run.uni.converged,
        uni_iterations: run.uni.n_iter,
        beta_uni: run.uni.beta_hat.iter().copied().collect(),
        uni_std_errors: uni_se.clone(),
        beta_mcox: res.beta_mcox.iter().copied().collect(),
        beta_oses: run.beta_oses.as_ref().map(|b| b.iter().copied().collect()),
        variance: rows(&res.variance),
        coefficients: Coefficient::table(&names, res.beta_mcox.as_slice(), &se, intervals.as_deref()),
        ase: mean(&se),
        uni_ase: mean(&uni_se),
        alpha: res.alpha,
        g2_norm: res.g2_norm,
        fallback: res.fallback,
        omega22_rank: res.omega22_rank,
        warnings: run.warnings.clone(),
        timings_ms: McoxTimings {
            pilot: t.pilot,
            moment_pass: t.moment_pass,
            subsample_fit: t.subsample_fit,
            correction: t.correction,
            total: t.total(),
        },
    };
    write_json(&out.join("result.json"), &record)?;

    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    println!("{:<12} {:>12} {:>12} {:>12}", "coefficient", "uni", "mcox", "std.error");
    for (k, c) in record.coefficients.iter().enumerate() {
        println!("{:<12} {:>12.6} {:>12.6} {:>12.6}", c.name, record.beta_uni[k], c.estimate, c.std_error);
    }
    if let Some(b) = &record.beta_oses {
        println!("oses: {b:?}");
    }
    println!(
        "n = {}, realized r = {}, pilot = {}, ASE mcox {:.5} vs uni {:.5}, total {:.1} ms",
        record.n, record.realized_r, record.realized_pilot, record.ase, record.uni_ase, t.total()
    );
    if run.uni.converged {
        Ok(Outcome::Done)
    } else {
        eprintln!("NotConverged: subsample fit stopped after {} iterations; partial result written", run.uni.n_iter);
        Ok(Outcome::NotConverged)
    }
}

pub fn simulate(args: &SimulateArgs, out: &Path) -> Result<Outcome> {
    check_level(args.level)?;
    let cfg = DgpConfig::new(args.n, args.covariate, args.seed);
    cfg.validate()?;
    let opts = ReplicationOptions { newton: newton(&args.newton)?, pilot_size: args.r0, level: args.level };
    create_out_dir(out)?;
    if let Some(file) = &args.write_data {
        let ds = generate_dataset(&cfg)?;
        write_csv(&ds, BufWriter::new(File::create(file)?), b',')?;
        eprintln!("wrote {} (path `{}`)", file.display(), ds.path());
    }

    let mut reports = Vec::new();
    for &r in &args.r {
        let output = run_replications_with(&cfg, &args.estimators, r, args.reps, &opts)?;
        reports.extend(output.reports);
    }
    let summary = SimSummary { schema: SIM_SCHEMA, config: &cfg, rs: &args.r, n_reps: args.reps, reports: &reports };
    write_json(&out.join("result.json"), &summary)?;
    write_report_csv(&reports, BufWriter::new(File::create(out.join("report.csv"))?))?;
    std::fs::write(out.join("plots.gp"), gnuplot_script(&args.estimators))?;

    println!("{:<10} {:>7} {:>9} {:>10} {:>10} {:>11} {:>9}", "estimator", "r", "failures", "NB", "NSE", "MSE", "coverage");
    for rep in &reports {
        let cov = rep.coverage.map_or("-".to_string(), |c| format!("{c:.3}"));
        println!(
            "{:<10} {:>7} {:>9} {:>10.5} {:>10.5} {:>11.4e} {:>9}",
            rep.estimator.name(),
            rep.r,
            rep.failures,
            rep.nb,
            rep.nse,
            rep.mse,
            cov
        );
    }
    Ok(Outcome::Done)
}

pub fn bench(args: &BenchArgs, out: &Path) -> Result<Outcome> {
    let grid: Vec<DgpConfig> = args.grid.iter().map(|&n| DgpConfig::new(n, args.covariate, args.seed)).collect();
    for cfg in &grid {
        cfg.validate()?;
    }
    create_out_dir(out)?;
    let table = timing_benchmark(&grid, args.r, &args.estimators, args.repeats)?;
    let scaling = if args.r_grid.is_empty() {
        None
    } else {
        let smallest = grid.iter().min_by_key(|c| c.n).expect("grid checked non-empty");
        Some(subsample_fit_scaling(smallest, &args.r_grid, args.repeats)?)
    };
    let summary =
        BenchSummary { schema: BENCH_SCHEMA, config: &grid[0], r: args.r, table: &table, r_scaling: scaling.as_ref() };
    write_json(&out.join("result.json"), &summary)?;
    write_bench_csv(&table, BufWriter::new(File::create(out.join("report.csv"))?))?;
    std::fs::write(out.join("plots.gp"), bench_gnuplot_script(&args.estimators))?;

    for row in &table.rows {
        println!("{:<10} n = {:>9} median {:>10.2} ms", row.estimator.name(), row.n, row.median_ms);
    }
    println!("\n{:<10} {:>8} {:>9} {:>6}", "estimator", "slope", "expected", "holds");
    for s in &table.slopes {
        println!("{:<10} {:>8.3} {:>9.1} {:>6}", s.estimator.name(), s.slope, s.expected, if s.holds { "yes" } else { "no" });
    }
    if let Some(s) = &scaling {
        println!(
            "\nsubsample-fit phase at n = {}: {:?} ms for r = {:?}, factor {:.2} per doubling of r",
            s.n, s.median_ms, s.rs, s.factor_per_doubling
        );
    }
    Ok(Outcome::Done)
}
