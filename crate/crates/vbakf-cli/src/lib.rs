//! Command-line front end: argument parsing, experiment execution, CSV and
//! markdown emission.
//!
//! Exit codes: 0 success, 1 runtime or configuration failure, 2 usage error.

pub mod io;

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use vbakf::experiment::{preset, run_experiment, summarize, ExperimentSpec, PRESET_NAMES};
use vbakf::filter::run_filter;
use vbakf::simulator::{generate, ScenarioConfig};

use io::{
    config_hash, load_dataset, provenance_line, read_json, render_filter_csv,
    render_observations_csv, render_series_csv, render_summary_csv, render_summary_markdown,
    render_truth_csv, write_atomic, DatasetManifest, FilterRunConfig,
};

/// A problem with the invocation itself; reported on stderr with exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct UsageError {
    pub message: String,
}

impl UsageError {
    fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

/// A failure while executing a valid invocation; exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Core(#[from] vbakf::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    /// CSV outputs only.
    Csv,
    /// CSV outputs plus a markdown summary table.
    #[value(name = "csv+md")]
    CsvMd,
}

#[derive(Parser, Debug)]
#[command(
    name = "vbakf",
    version,
    about = "Adaptive Kalman filtering for sensor networks with packet dropouts and corrupted observations"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand, Debug)]
enum CliCommand {
    /// Generate a dataset from a scenario JSON file.
    Simulate {
        /// Scenario JSON path.
        #[arg(long)]
        config: PathBuf,
        /// Generation seed.
        #[arg(long)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the adaptive filter over a stored dataset.
    Filter {
        /// Directory holding dataset.json and observations.csv.
        #[arg(long)]
        data: PathBuf,
        /// Filter configuration JSON (hyper-parameters and initial belief).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run a built-in preset or a custom experiment spec.
    Experiment {
        /// Preset name (exp1, exp2, exp3, exp4a, exp4b, exp4c).
        #[arg(long)]
        preset: Option<String>,
        /// Custom experiment spec JSON path.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the root seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the Monte-Carlo rep count.
        #[arg(long)]
        mc_reps: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
}

/// Validated invocation.
#[derive(Debug)]
pub enum CliConfig {
    Simulate {
        config: PathBuf,
        seed: u64,
        out_dir: PathBuf,
    },
    Filter {
        data: PathBuf,
        config: PathBuf,
        out_dir: PathBuf,
    },
    Experiment {
        preset: Option<String>,
        config: Option<PathBuf>,
        seed: Option<u64>,
        mc_reps: Option<usize>,
        out_dir: PathBuf,
        format: OutputFormat,
    },
    /// `--help` or `--version`: message already printed, exit 0.
    Informational,
}

/// Parse and validate argv. `Err` means a usage problem (exit code 2).
pub fn parse_args<I, S>(argv: I) -> Result<CliConfig, UsageError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(CliConfig::Informational);
        }
        Err(e) => return Err(UsageError::new(e.to_string())),
    };
    match cli.command {
        CliCommand::Simulate {
            config,
            seed,
            out_dir,
        } => Ok(CliConfig::Simulate {
            config,
            seed,
            out_dir,
        }),
        CliCommand::Filter {
            data,
            config,
            out_dir,
        } => Ok(CliConfig::Filter {
            data,
            config,
            out_dir,
        }),
        CliCommand::Experiment {
            preset,
            config,
            seed,
            mc_reps,
            out_dir,
            format,
        } => {
            match (&preset, &config) {
                (None, None) => {
                    return Err(UsageError::new(
                        "experiment requires exactly one of --preset or --config",
                    ))
                }
                (Some(_), Some(_)) => {
                    return Err(UsageError::new(
                        "--preset and --config are mutually exclusive",
                    ))
                }
                _ => {}
            }
            if let Some(name) = &preset {
                if !PRESET_NAMES.contains(&name.as_str()) {
                    return Err(UsageError::new(format!(
                        "unknown preset `{name}`; valid presets: {}",
                        PRESET_NAMES.join(", ")
                    )));
                }
            }
            if let Some(0) = mc_reps {
                return Err(UsageError::new("--mc-reps must be at least 1"));
            }
            Ok(CliConfig::Experiment {
                preset,
                config,
                seed,
                mc_reps,
                out_dir,
                format,
            })
        }
    }
}

fn ensure_out_dir(out_dir: &Path) -> Result<(), RuntimeError> {
    std::fs::create_dir_all(out_dir).map_err(|e| RuntimeError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })
}

/// Execute a validated invocation.
pub fn execute(config: CliConfig) -> Result<(), RuntimeError> {
    match config {
        CliConfig::Informational => Ok(()),
        CliConfig::Simulate {
            config,
            seed,
            out_dir,
        } => run_simulate(&config, seed, &out_dir),
        CliConfig::Filter {
            data,
            config,
            out_dir,
        } => run_filter_cmd(&data, &config, &out_dir),
        CliConfig::Experiment {
            preset,
            config,
            seed,
            mc_reps,
            out_dir,
            format,
        } => run_experiment_cmd(preset, config, seed, mc_reps, &out_dir, format),
    }
}

fn run_simulate(config_path: &Path, seed: u64, out_dir: &Path) -> Result<(), RuntimeError> {
    let scenario: ScenarioConfig = read_json(config_path)?;
    let dataset = generate(&scenario, seed)?;
    ensure_out_dir(out_dir)?;
    let canonical = serde_json::to_string(&scenario).expect("scenario serializes");
    let header = provenance_line("simulate", seed, config_hash(&canonical));
    write_atomic(
        &out_dir.join("truth.csv"),
        &render_truth_csv(&header, &dataset),
    )?;
    write_atomic(
        &out_dir.join("observations.csv"),
        &render_observations_csv(&header, &dataset),
    )?;
    let manifest = DatasetManifest { scenario, seed };
    write_atomic(
        &out_dir.join("dataset.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&manifest).expect("manifest serializes")
        ),
    )?;
    println!(
        "wrote truth.csv, observations.csv, dataset.json to {}",
        out_dir.display()
    );
    Ok(())
}

fn run_filter_cmd(data: &Path, config_path: &Path, out_dir: &Path) -> Result<(), RuntimeError> {
    let dataset = load_dataset(data)?;
    let run_cfg: FilterRunConfig = read_json(config_path)?;
    let posts = run_filter(&dataset, &run_cfg.hyper, &run_cfg.x0)?;
    ensure_out_dir(out_dir)?;
    let canonical = serde_json::to_string(&run_cfg).expect("filter config serializes");
    let header = provenance_line("filter", dataset.seed, config_hash(&canonical));
    let csv = render_filter_csv(&header, &posts, dataset.config.d_x, dataset.config.d_y)?;
    write_atomic(&out_dir.join("filter_series.csv"), &csv)?;
    println!("wrote filter_series.csv to {}", out_dir.display());
    Ok(())
}

fn run_experiment_cmd(
    preset_name: Option<String>,
    config_path: Option<PathBuf>,
    seed: Option<u64>,
    mc_reps: Option<usize>,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<(), RuntimeError> {
    let (mut spec, label): (ExperimentSpec, String) = match (&preset_name, &config_path) {
        (Some(name), None) => (preset(name)?, name.clone()),
        (None, Some(path)) => {
            let spec: ExperimentSpec = read_json(path)?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "custom".to_string());
            (spec, stem)
        }
        _ => unreachable!("parse_args enforces exactly one source"),
    };
    if let Some(s) = seed {
        spec.root_seed = s;
    }
    if let Some(r) = mc_reps {
        spec.mc_reps = r;
    }
    let results = run_experiment(&spec)?;
    let rows = summarize(&results)?;

    ensure_out_dir(out_dir)?;
    let canonical = serde_json::to_string(&spec).expect("spec serializes");
    let header = provenance_line(&label, spec.root_seed, config_hash(&canonical));
    let d_x = spec.scenario.d_x;
    let d_y = spec.scenario.d_y;
    write_atomic(
        &out_dir.join(format!("{label}_series.csv")),
        &render_series_csv(&header, &results, d_x, d_y),
    )?;
    write_atomic(
        &out_dir.join(format!("{label}_summary.csv")),
        &render_summary_csv(&header, &rows),
    )?;
    if format == OutputFormat::CsvMd {
        write_atomic(
            &out_dir.join(format!("{label}_summary.md")),
            &render_summary_markdown(&format!("{label} summary"), &rows),
        )?;
    }
    println!(
        "wrote {label}_series.csv and {label}_summary.csv to {}",
        out_dir.display()
    );
    Ok(())
}

/// Top-level entry: returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    match parse_args(argv) {
        Ok(config) => match execute(config) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Err(e) => {
            eprintln!("{e}");
            2
        }
    }
}
