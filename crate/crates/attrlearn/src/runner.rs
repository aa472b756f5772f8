//! Seeded experiment execution.

use std::time::Instant;

use attrlearn_core::distributions::LogConcaveDist;
use attrlearn_core::learner::{learn_active, learn_passive, Problem, Report, RngStreams};
use attrlearn_core::oracle::GroundTruth;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ConfigError, ExperimentConfig, Mode, Resolved};

const STREAM_TRUTH: u64 = 0;
const STREAM_ORACLE: u64 = 1;
const STREAM_LEARNER: u64 = 2;
const STREAM_DIAG: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// The independent random streams of one seed.
pub fn streams_for(seed: u64) -> RngStreams<ChaCha8Rng> {
    RngStreams {
        oracle: stream(seed, STREAM_ORACLE),
        learner: stream(seed, STREAM_LEARNER),
        diag: stream(seed, STREAM_DIAG),
    }
}

/// The learning problem of one seed; the target is drawn from its own stream.
pub fn problem_for(resolved: &Resolved, seed: u64) -> attrlearn_core::Result<Problem> {
    let dist = LogConcaveDist::new(resolved.kind, resolved.d)?;
    let gt = GroundTruth::random(dist, resolved.s, &mut stream(seed, STREAM_TRUTH))?;
    Ok(Problem {
        gt,
        eps: resolved.eps,
        delta: resolved.delta,
        eta: resolved.eta,
        adversary: resolved.adversary.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub mode: Mode,
    /// Complete report, or the partial one when `error` is set.
    pub report: Report,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

pub fn run_seed(resolved: &Resolved, seed: u64, mode: Mode) -> RunOutcome {
    let start = Instant::now();
    let result = problem_for(resolved, seed).map_err(|e| (e, None)).and_then(|problem| {
        let mut streams = streams_for(seed);
        let run = match mode {
            Mode::Active => learn_active(&problem, &resolved.learner, &mut streams),
            Mode::Passive => learn_passive(&problem, &resolved.learner, &mut streams),
        };
        run.map_err(|(e, partial)| (e, Some(partial)))
    });
    let wall_time_s = start.elapsed().as_secs_f64();
    match result {
        Ok(report) => RunOutcome {
            seed,
            mode,
            report,
            error: None,
            wall_time_s,
        },
        Err((e, partial)) => RunOutcome {
            seed,
            mode,
            report: partial.unwrap_or_else(|| empty_report(resolved, mode)),
            error: Some(e.to_string()),
            wall_time_s,
        },
    }
}

fn empty_report(resolved: &Resolved, mode: Mode) -> Report {
    Report {
        access: mode.access(),
        k0: 0,
        phases: Vec::new(),
        sample_calls: 0,
        labels: 0,
        distinct_labels: 0,
        w: nalgebra::DVector::zeros(resolved.d),
        theta: std::f64::consts::FRAC_PI_2,
        est_error: 0.5,
        warnings: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub runs: usize,
    pub failures: usize,
    pub mean_error: f64,
    pub median_error: f64,
    /// Fraction of all runs that finished with estimated error at most `ε`.
    pub success_fraction: f64,
    pub total_labels: u64,
    pub total_samples: u64,
}

pub fn summarize(outcomes: &[RunOutcome], eps: f64) -> Summary {
    let mut errors: Vec<f64> = outcomes.iter().filter(|o| o.succeeded()).map(|o| o.report.est_error).collect();
    errors.sort_by(f64::total_cmp);
    let ok = errors.len();
    let mean_error = if ok == 0 { f64::NAN } else { errors.iter().sum::<f64>() / ok as f64 };
    let median_error = match ok {
        0 => f64::NAN,
        n if n % 2 == 1 => errors[n / 2],
        n => 0.5 * (errors[n / 2 - 1] + errors[n / 2]),
    };
    let successes = errors.iter().filter(|e| **e <= eps).count();
    Summary {
        runs: outcomes.len(),
        failures: outcomes.len() - ok,
        mean_error,
        median_error,
        success_fraction: if outcomes.is_empty() { 0.0 } else { successes as f64 / outcomes.len() as f64 },
        total_labels: outcomes.iter().map(|o| o.report.labels).sum(),
        total_samples: outcomes.iter().map(|o| o.report.sample_calls).sum(),
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub resolved: Resolved,
    pub outcomes: Vec<RunOutcome>,
    pub summary: Summary,
}

/// Runs every seed (in parallel) and collects the outcomes in seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment, ConfigError> {
    let resolved = cfg.resolve()?;
    let outcomes: Vec<RunOutcome> = resolved
        .seeds
        .par_iter()
        .map(|&seed| run_seed(&resolved, seed, resolved.mode))
        .collect();
    let summary = summarize(&outcomes, resolved.eps);
    Ok(Experiment {
        config: cfg.clone(),
        resolved,
        outcomes,
        summary,
    })
}

/// One summary per value of a sweep axis.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: String,
    pub experiment: Experiment,
}

pub fn run_sweep(cfg: &ExperimentConfig, axis: &str, values: &[String]) -> Result<Vec<SweepPoint>, ConfigError> {
    if values.is_empty() {
        return Err(ConfigError::Invalid {
            key: "values".into(),
            reason: "at least one value is required".into(),
        });
    }
    let configs = values
        .iter()
        .map(|v| {
            let mut c = cfg.clone();
            c.set_axis(axis, v)?;
            Ok((v.trim().to_string(), c))
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    configs
        .into_iter()
        .map(|(value, c)| Ok(SweepPoint { value, experiment: run_experiment(&c)? }))
        .collect()
}
