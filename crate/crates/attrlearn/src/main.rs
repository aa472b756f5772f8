use std::path::{Path, PathBuf};
use std::process::ExitCode;

use attrlearn::config::{describe_profile, ConfigError, ExperimentConfig, Mode};
use attrlearn::record::{runs_csv, sweep_csv};
use attrlearn::runner::{run_experiment, run_sweep, Summary};
use attrlearn::verify::{run_suite, Suite};
use attrlearn_core::learner::ConstantsProfile;
use clap::{Parser, Subcommand};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUN: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "attrlearn", version, about = "Active learning of sparse halfspaces under malicious noise")]
struct Cli {
    /// Default directory for output files.
    #[arg(long, env = "ATTRLEARN_OUT_DIR", global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its per-phase records.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seeds of the config with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Run an experiment for each value of one config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the solvers against independent oracles.
    Verify {
        #[arg(long)]
        suite: Suite,
    },
    /// Print a constants profile.
    Constants {
        #[arg(long)]
        profile: String,
    },
}

fn out_path(explicit: Option<PathBuf>, from_config: Option<PathBuf>, dir: Option<PathBuf>, file: &str) -> PathBuf {
    explicit
        .or(from_config)
        .unwrap_or_else(|| dir.unwrap_or_else(|| PathBuf::from(".")).join(file))
}

fn write_file(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)
}

fn print_summary(label: &str, s: &Summary) {
    println!(
        "{label}runs {} failures {} mean_error {:.5} median_error {:.5} success_fraction {:.3} labels {} samples {}",
        s.runs, s.failures, s.mean_error, s.median_error, s.success_fraction, s.total_labels, s.total_samples
    );
}

fn validation(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_VALIDATION)
}

fn run(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            mode,
        } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return validation(e),
            };
            if let Some(seed) = seed {
                cfg.seed = Some(seed);
                cfg.seeds.clear();
            }
            if let Some(mode) = mode {
                cfg.mode = mode;
            }
            let path = out_path(out, cfg.out.clone(), cli.out_dir, "run.csv");
            let exp = match run_experiment(&cfg) {
                Ok(e) => e,
                Err(e) => return validation(e),
            };
            let bytes = match runs_csv(&exp) {
                Ok(b) => b,
                Err(e) => return validation(e),
            };
            if let Err(e) = write_file(&path, &bytes) {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(EXIT_RUN);
            }
            for o in exp.outcomes.iter().filter(|o| !o.succeeded()) {
                eprintln!("seed {} failed: {}", o.seed, o.error.as_deref().unwrap_or(""));
            }
            print_summary("", &exp.summary);
            println!("wrote {}", path.display());
            if exp.summary.failures > 0 {
                ExitCode::from(EXIT_RUN)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return validation(e),
            };
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
            let points = match run_sweep(&cfg, &axis, &values) {
                Ok(p) => p,
                Err(e) => return validation(e),
            };
            let file = format!("sweep-{}.csv", axis.replace('.', "_"));
            let path = out_path(out, None, cli.out_dir, &file);
            let bytes = match sweep_csv(&cfg, &axis, &points) {
                Ok(b) => b,
                Err(e) => return validation(e),
            };
            if let Err(e) = write_file(&path, &bytes) {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(EXIT_RUN);
            }
            let mut failures = 0;
            for p in &points {
                print_summary(&format!("{axis}={} ", p.value), &p.experiment.summary);
                failures += p.experiment.summary.failures;
            }
            println!("wrote {}", path.display());
            if failures > 0 {
                ExitCode::from(EXIT_RUN)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Verify { suite } => {
            let checks = run_suite(suite);
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{}", c.line());
            }
            println!("{} checks, {} failed", checks.len(), failed);
            if failed > 0 {
                ExitCode::from(EXIT_VERIFY)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Constants { profile } => match ConstantsProfile::by_name(&profile) {
            Some(p) => {
                println!("{}", describe_profile(&p));
                ExitCode::SUCCESS
            }
            None => validation(ConfigError::Invalid {
                key: "profile".into(),
                reason: format!("unknown profile `{profile}` (expected theory or practical)"),
            }),
        },
    }
}

fn main() -> ExitCode {
    match Cli::try_parse() {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            ExitCode::from(code)
        }
    }
}
