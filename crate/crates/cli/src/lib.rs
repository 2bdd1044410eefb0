//! `mdiqc` command-line front end: argument parsing, output files and exit
//! codes on top of `mdiqc-core`.

pub mod commands;
pub mod manifest;
pub mod validation;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mdiqc_core::params::{parse_config, Config};
use mdiqc_core::Exec;

use crate::commands::{Protocol, QssMethod, RunOptions};
use crate::manifest::{sidecar_path, unix_now, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<mdiqc_core::Error> for CliError {
    fn from(e: mdiqc_core::Error) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "mdiqc", version, about = "MDI quantum conference key agreement and secret sharing simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file (`section.key = value` lines).
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV; a `.manifest.json` sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Coarser distance grid and fewer Monte Carlo samples.
    #[arg(long)]
    pub quick: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Conference key rate against distance.
    Qcc(Common),
    /// Secret-sharing key rate against distance.
    Qss {
        #[command(flatten)]
        common: Common,
        /// Defaults to the method implied by `source.kind`.
        #[arg(long, value_enum)]
        method: Option<QssMethod>,
    },
    /// Lower bound on the Mermin value against distance.
    Mermin(Common),
    /// Monte Carlo, symmetry, closed-form and bound checks.
    Validate(Common),
    /// Grid search over (mu2, mu1) at `optimize.distance_km`.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "qcc")]
        protocol: Protocol,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Qcc(c) | Command::Mermin(c) | Command::Validate(c) => c,
            Command::Qss { common, .. } | Command::Optimize { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Qcc(_) => "qcc",
            Command::Qss { .. } => "qss",
            Command::Mermin(_) => "mermin",
            Command::Validate(_) => "validate",
            Command::Optimize { .. } => "optimize",
        }
    }
}

pub fn load_config(path: &Path) -> Result<Config, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(parse_config(&text)?)
}

fn run_options(common: &Common) -> Result<RunOptions, CliError> {
    let threads = match common.threads {
        Some(0) => return Err(CliError::Config("--threads must be >= 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    #[cfg(feature = "parallel")]
    if common.threads.is_some() {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(RunOptions {
        quick: common.quick,
        seed: common.seed,
        exec: if threads == 1 { Exec::Sequential } else { Exec::Parallel },
        shards: threads,
        inject_fault: common.inject_fault,
    })
}

fn write_output(out: &Path, manifest: &mut RunManifest, body: &str) -> Result<(), CliError> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(out, format!("{}{body}", manifest.csv_header())).map_err(|e| io_err(out, e))?;
    manifest.outputs.push(out.to_path_buf());
    manifest.finished_unix = Some(unix_now());
    let side = sidecar_path(out);
    fs::write(&side, manifest.to_json()).map_err(|e| io_err(&side, e))
}

/// Runs one parsed command line. Text for the terminal goes to stdout;
/// the table goes to `--out`.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let common = cli.command.common();
    let config = load_config(&common.config)?;
    let opts = run_options(common)?;
    let mut manifest = RunManifest::new(cli.command.name(), &config, opts.seed, opts.quick, common.threads);

    let body = match &cli.command {
        Command::Qcc(_) => {
            let curve = commands::qcc_curve(&config, &opts)?;
            format!("{}{}", commands::cutoff_line(&curve), commands::curve_csv(&curve))
        }
        Command::Qss { method, .. } => {
            let method = method.unwrap_or_else(|| commands::default_method(&config));
            let curve = commands::qss_curve(&config, method, &opts)?;
            format!("{}{}", commands::cutoff_line(&curve), commands::curve_csv(&curve))
        }
        Command::Mermin(_) => commands::mermin_csv(&commands::mermin_rows(&config, &opts)?),
        Command::Optimize { protocol, .. } => {
            let best = commands::optimize(&config, *protocol, &opts)?;
            if best.is_none() {
                println!("no positive rate anywhere in the search box");
            }
            commands::optimize_csv(&config, *protocol, best)
        }
        Command::Validate(_) => {
            let report = validation::run_validation(&config, &opts)?;
            print!("{}", report.text());
            write_output(&common.out, &mut manifest, &report.csv())?;
            let failures = report.failures();
            if failures.is_empty() {
                println!("all checks passed");
                return Ok(());
            }
            let names: Vec<&str> = failures.iter().map(|r| r.check.as_str()).collect();
            return Err(CliError::Validation(format!("{} check(s): {}", names.len(), names.join("; "))));
        }
    };
    write_output(&common.out, &mut manifest, &body)
}
