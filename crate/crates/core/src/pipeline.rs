//! End-to-end moment-assisted subsampling run on one dataset.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::cox::{FitResult, NewtonOptions};
use crate::data::Dataset;
use crate::error::Result;
use crate::mcox::{compute_g2, compute_omega_blocks, mcox_estimate, oses_estimate, McoxResult};
use crate::moments::{
    build_aft_moment, build_optimal_moment, build_user_linear_moment, whole_data_mean, AftOptions,
    MomentSpec,
};
use crate::subsample::{fit_subsample, pilot_subsample, poisson_subsample, subset, SubsamplePlan};

#[derive(Debug, Clone)]
pub enum MomentChoice {
    /// Plug-in efficient score with the pilot as reference, at β̃_uni.
    Optimal,
    /// Weibull AFT γ-score fitted on the pilot.
    Aft,
    /// User matrix applied to (Y, Δ, features).
    Linear(DMatrix<f64>),
}

impl MomentChoice {
    pub fn name(&self) -> &'static str {
        match self {
            MomentChoice::Optimal => "opt",
            MomentChoice::Aft => "aft",
            MomentChoice::Linear(_) => "linear",
        }
    }
}

#[derive(Debug, Clone)]
pub struct McoxConfig {
    pub plan: SubsamplePlan,
    pub moment: MomentChoice,
    pub with_oses: bool,
    pub newton: NewtonOptions,
    pub aft: AftOptions,
}

impl McoxConfig {
    pub fn new(plan: SubsamplePlan, moment: MomentChoice) -> Self {
        Self {
            plan,
            moment,
            with_oses: false,
            newton: NewtonOptions::default(),
            aft: AftOptions::default(),
        }
    }
}

/// Wall-clock milliseconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    /// Pilot draw and moment construction.
    pub pilot: f64,
    /// Whole-data moment averages.
    pub moment_pass: f64,
    /// Main subsample draw and Newton fit.
    pub subsample_fit: f64,
    /// Ω̃ blocks, g̃₂ and the closed-form update.
    pub correction: f64,
}

impl PhaseTimings {
    pub fn total(&self) -> f64 {
        self.pilot + self.moment_pass + self.subsample_fit + self.correction
    }
}

#[derive(Debug, Clone)]
pub struct McoxRun {
    pub uni: FitResult,
    pub result: McoxResult,
    pub beta_oses: Option<DVector<f64>>,
    pub realized_r: usize,
    pub realized_pilot: usize,
    pub moment: MomentSpec,
    pub timings: PhaseTimings,
    pub warnings: Vec<String>,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Draws the subsample and pilot, builds the moment, averages it over the
/// whole data, and applies the closed-form correction.
pub fn run_mcox(ds: &Dataset, cfg: &McoxConfig) -> Result<McoxRun> {
    let n = ds.n();
    let mut warnings = Vec::new();
    let mut timings = PhaseTimings::default();
    if cfg.plan.expected_size >= n {
        warnings.push(format!(
            "subsample size {} is not below n = {n}; every record is sampled and the estimate equals the whole-data fit",
            cfg.plan.expected_size
        ));
    }

    let t = Instant::now();
    let idx = poisson_subsample(n, &cfg.plan)?;
    let sub = subset(ds, &idx)?;
    let uni = fit_subsample(&sub, &cfg.newton)?;
    timings.subsample_fit = ms(t);
    if !uni.converged {
        warnings.push(format!(
            "subsample fit stopped after {} iterations with score norm {:.3e}",
            uni.n_iter, uni.final_score_norm
        ));
    }

    let t = Instant::now();
    let needs_pilot = matches!(cfg.moment, MomentChoice::Optimal | MomentChoice::Aft) || cfg.with_oses;
    let pilot = if needs_pilot { Some(subset(ds, &pilot_subsample(n, &cfg.plan)?)?) } else { None };
    let realized_pilot = pilot.as_ref().map_or(0, |p| p.n());
    let optimal = match (&cfg.moment, cfg.with_oses, &pilot) {
        (MomentChoice::Optimal, _, Some(p)) | (_, true, Some(p)) => Some(build_optimal_moment(p, &uni.beta_hat)?),
        _ => None,
    };
    let spec = match &cfg.moment {
        MomentChoice::Optimal => optimal.clone().expect("pilot drawn for the optimal moment"),
        MomentChoice::Aft => build_aft_moment(pilot.as_ref().expect("pilot drawn"), &cfg.aft)?,
        MomentChoice::Linear(m) => build_user_linear_moment(m.clone())?,
    };
    timings.pilot = ms(t);

    let t = Instant::now();
    let mu = whole_data_mean(ds, &spec)?;
    let mu_opt = match (&cfg.moment, &optimal) {
        (MomentChoice::Optimal, _) => Some(mu.clone()),
        (_, Some(o)) => Some(whole_data_mean(ds, o)?),
        _ => None,
    };
    timings.moment_pass = ms(t);

    let t = Instant::now();
    let g2 = compute_g2(&sub, &spec, &mu)?;
    let blocks = compute_omega_blocks(&sub, &uni.beta_hat, &spec, n)?;
    let alpha_mu = match cfg.moment {
        MomentChoice::Optimal => Some(&mu.mu_hat),
        _ => None,
    };
    let result = mcox_estimate(&uni, &blocks, &g2, alpha_mu)?;
    let beta_oses = match (&mu_opt, cfg.with_oses) {
        (Some(m), true) => Some(oses_estimate(&uni, m)?),
        _ => None,
    };
    timings.correction = ms(t);

    if result.fallback {
        warnings.push("moment covariance is degenerate; the estimate falls back to the uniform-subsample fit".into());
    }
    Ok(McoxRun {
        realized_r: sub.n(),
        uni,
        result,
        beta_oses,
        realized_pilot,
        moment: spec,
        timings,
        warnings,
    })
}
