//! CSV output. Each file starts with `#` comment lines holding the schema
//! version and the fully resolved config, followed by an RFC-4180 table.
//! Columns prefixed `diag_` use hidden oracle tags; `wall_time_s` is the only
//! column that varies between identical runs.

use std::io::Write;

use crate::config::{ConfigError, ExperimentConfig};
use crate::runner::{Experiment, RunOutcome, SweepPoint};

pub const RUN_SCHEMA: &str = "attrlearn-runs/1";
pub const SWEEP_SCHEMA: &str = "attrlearn-sweep/1";

pub const RUN_COLUMNS: [&str; 28] = [
    "seed",
    "mode",
    "status",
    "error",
    "k",
    "b_k",
    "n_k",
    "m_k",
    "N_k_budget",
    "N_k_used",
    "labels",
    "pruned",
    "sum_q",
    "certificate_value",
    "certificate_gap",
    "cuts",
    "outlier_status",
    "erm_loss",
    "erm_probe",
    "degenerate",
    "band_noise_bound",
    "theta",
    "est_error",
    "warnings",
    "diag_dirty_fraction",
    "diag_mean_clean_weight",
    "diag_mean_dirty_weight",
    "wall_time_s",
];

pub const SWEEP_COLUMNS: [&str; 11] = [
    "axis",
    "value",
    "runs",
    "failures",
    "mean_error",
    "median_error",
    "success_fraction",
    "total_labels",
    "total_samples",
    "mean_labels",
    "mean_samples",
];

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn header_comments(out: &mut Vec<u8>, schema: &str, cfg: &ExperimentConfig) -> Result<(), RecordError> {
    writeln!(out, "# schema: {schema}")?;
    for line in cfg.to_toml()?.lines() {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn warnings_of(o: &RunOutcome) -> String {
    o.report
        .warnings
        .iter()
        .map(|w| match w {
            attrlearn_core::learner::Warning::NoiseAboveTolerance { eta, limit } => {
                format!("eta {eta} above tolerance {limit}")
            }
            attrlearn_core::learner::Warning::SampleBudgetExceeded { k, used, budget } => {
                format!("phase {k} used {used} calls over budget {budget}")
            }
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn outcome_rows(o: &RunOutcome) -> Vec<Vec<String>> {
    let warnings = warnings_of(o);
    let mut rows: Vec<Vec<String>> = o
        .report
        .phases
        .iter()
        .map(|r| {
            vec![
                o.seed.to_string(),
                o.report.access.name().to_string(),
                "ok".to_string(),
                String::new(),
                r.params.k.to_string(),
                num(r.params.b),
                r.params.n.to_string(),
                r.params.m.to_string(),
                r.params.n_budget.to_string(),
                r.sample_calls.to_string(),
                r.labels.to_string(),
                r.pruned.to_string(),
                num(r.sum_q),
                num(r.certificate_value),
                num(r.certificate_gap),
                r.cuts.to_string(),
                r.outlier_status.name().to_string(),
                num(r.erm_loss),
                num(r.erm_probe),
                r.degenerate.to_string(),
                num(r.band_noise_bound),
                num(r.theta),
                num(r.est_error),
                warnings.clone(),
                num(r.diag_dirty_fraction),
                num(r.diag_mean_clean_weight),
                num(r.diag_mean_dirty_weight),
                format!("{:.6}", o.wall_time_s),
            ]
        })
        .collect();
    if let Some(err) = &o.error {
        let mut row = vec![String::new(); RUN_COLUMNS.len()];
        row[0] = o.seed.to_string();
        row[1] = o.report.access.name().to_string();
        row[2] = "error".to_string();
        row[3] = err.clone();
        row[4] = (o.report.phases.len() + 1).to_string();
        row[23] = warnings;
        row[27] = format!("{:.6}", o.wall_time_s);
        rows.push(row);
    }
    rows
}

/// The per-phase record table of an experiment.
pub fn runs_csv(exp: &Experiment) -> Result<Vec<u8>, RecordError> {
    let mut out = Vec::new();
    header_comments(&mut out, RUN_SCHEMA, &exp.config)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_COLUMNS)?;
    for o in &exp.outcomes {
        for row in outcome_rows(o) {
            w.write_record(&row)?;
        }
    }
    w.into_inner().map_err(|e| RecordError::Io(e.into_error()))
}

/// One row per sweep value.
pub fn sweep_csv(base: &ExperimentConfig, axis: &str, points: &[SweepPoint]) -> Result<Vec<u8>, RecordError> {
    let mut out = Vec::new();
    header_comments(&mut out, SWEEP_SCHEMA, base)?;
    writeln!(out, "# sweep axis: {axis}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for p in points {
        let s = &p.experiment.summary;
        let runs = s.runs.max(1) as f64;
        w.write_record([
            axis.to_string(),
            p.value.clone(),
            s.runs.to_string(),
            s.failures.to_string(),
            num(s.mean_error),
            num(s.median_error),
            num(s.success_fraction),
            s.total_labels.to_string(),
            s.total_samples.to_string(),
            num(s.total_labels as f64 / runs),
            num(s.total_samples as f64 / runs),
        ])?;
    }
    w.into_inner().map_err(|e| RecordError::Io(e.into_error()))
}

/// Drops the `wall_time_s` column, for comparing runs byte-for-byte.
pub fn strip_wall_time(csv_bytes: &[u8]) -> String {
    let text = String::from_utf8_lossy(csv_bytes);
    let mut out = String::new();
    for line in text.lines() {
        if line.starts_with('#') {
            out.push_str(line);
        } else {
            let cut = line.rfind(',').unwrap_or(line.len());
            out.push_str(&line[..cut]);
        }
        out.push('\n');
    }
    out
}
