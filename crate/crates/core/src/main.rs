use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, warn};

use csvm::error::Category;
use csvm::experiment::{self, RawConfig, Severity};
use csvm::specdata;
use csvm::Error;

/// Compressive hyperspectral SVM experiments.
#[derive(Parser, Debug)]
#[command(name = "csvm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment. Any config key can be overridden with
    /// `--key value` or `--key=value` (dashes or underscores).
    Run {
        /// Config file; optional with --quick.
        config: Option<PathBuf>,
        /// Start from the small synthetic preset.
        #[arg(long)]
        quick: bool,
    },
    /// Report every problem with a config without running it. Accepts the
    /// same key overrides as `run`.
    Validate { config: PathBuf },
    /// Write a synthetic two-class dataset (header plus binary files).
    Synth {
        /// Header path; data files are written next to it.
        output: PathBuf,
        #[arg(long, default_value_t = 32)]
        d: usize,
        #[arg(long, default_value_t = 1000)]
        n_per_class: usize,
        #[arg(long, default_value_t = 8.0)]
        separation: f64,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Re-render report.csv, tables.md and histograms from a trials.csv.
    Report {
        trials: PathBuf,
        /// Defaults to the directory holding the trials file.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

/// Splits `--key value` / `--key=value` config overrides out of the
/// arguments of `run` and `validate`, leaving the rest for clap.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let takes_overrides = matches!(args.get(1).map(String::as_str), Some("run" | "validate"));
    if !takes_overrides {
        return Ok((args, Vec::new()));
    }
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let key_of = |flag: &str| flag.replace('-', "_");
        let parsed = arg.strip_prefix("--").and_then(|flag| match flag.split_once('=') {
            Some((k, v)) => Some((key_of(k), Some(v.to_owned()))),
            None => Some((key_of(flag), None)),
        });
        match parsed {
            Some((key, value)) if experiment::KEYS.contains(&key.as_str()) => {
                let value = match value {
                    Some(v) => v,
                    None => it
                        .next()
                        .ok_or_else(|| format!("flag --{key} needs a value"))?,
                };
                overrides.push((key, value));
            }
            _ => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}

fn load_raw(config: Option<&PathBuf>, quick: bool, overrides: &[(String, String)]) -> Result<RawConfig, ExitCode> {
    let mut raw = match (config, quick) {
        (Some(p), false) => RawConfig::load(p).map_err(report_error)?,
        (None, true) => RawConfig::quick(),
        (Some(_), true) => {
            error!("pass either a config file or --quick, not both");
            return Err(ExitCode::from(1));
        }
        (None, false) => {
            error!("a config file is required (or use --quick)");
            return Err(ExitCode::from(1));
        }
    };
    for (k, v) in overrides {
        raw.set_flag(k, v);
    }
    Ok(raw)
}

fn exit_code(e: &Error) -> ExitCode {
    ExitCode::from(match e.category() {
        Category::Usage => 1,
        Category::Data => 2,
        Category::Convergence => 3,
    })
}

fn report_error(e: Error) -> ExitCode {
    error!("{e}");
    exit_code(&e)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(split) => split,
        Err(m) => {
            error!("{m}");
            return ExitCode::from(1);
        }
    };
    let cli = Cli::parse_from(args);
    match cli.command {
        Command::Run { config, quick } => {
            let raw = match load_raw(config.as_ref(), quick, &overrides) {
                Ok(r) => r,
                Err(code) => return code,
            };
            match experiment::run_raw(&raw) {
                Ok(outcome) => {
                    for f in &outcome.files {
                        println!("{}", f.display());
                    }
                    if outcome.non_converged > 0 {
                        warn!(
                            "{} trial(s) hit max_iterations; see the converged column of trials.csv",
                            outcome.non_converged
                        );
                        return ExitCode::from(3);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => report_error(e),
            }
        }
        Command::Validate { config } => {
            let raw = match load_raw(Some(&config), false, &overrides) {
                Ok(r) => r,
                Err(code) => return code,
            };
            let diags = experiment::validate_raw(&raw);
            for d in &diags {
                println!("{d}");
            }
            if diags.iter().any(|d| d.severity == Severity::Error) {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Synth {
            output,
            d,
            n_per_class,
            separation,
            sigma,
            seed,
        } => match specdata::synth_gaussian_pair(d, n_per_class, separation, sigma, seed)
            .and_then(|ds| specdata::write_dataset(&ds, &output))
        {
            Ok(()) => {
                println!("{}", output.display());
                ExitCode::SUCCESS
            }
            Err(e) => report_error(e),
        },
        Command::Report { trials, output_dir } => {
            let dir = output_dir.unwrap_or_else(|| {
                trials
                    .parent()
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            match experiment::report(&trials, &dir) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => report_error(e),
            }
        }
    }
}
