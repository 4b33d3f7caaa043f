//! Sweep runner and CSV output.
//!
//! Runs the configured density sweep, prints one summary line per
//! `(density, method)` cell, and writes a machine-readable CSV from which
//! the capacity-versus-density curves can be regenerated. Numeric fields
//! are written with Rust's shortest round-trip float formatting, so parsing
//! the file recovers the in-memory values exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use thiserror::Error;

use crate::capacity::{sweep_hotspot_density, CapacityResult};
use crate::config::{ConfigError, RunConfig};

/// Bumped whenever the CSV column set changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Column header of the output CSV.
pub const CSV_HEADER: &str =
    "schema_version,p_h,method,capacity_n,p_hat_at_n,p_hat_at_n_plus_1,trials,mu,sigma,seed";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Renders sweep results as CSV, one row per `(density, method)` cell.
///
/// `p_hat` columns are empty for the closed-form method, which runs no
/// trials; `mu`/`sigma` are filled for it alone, and its `trials` column
/// carries the moment sample count actually spent.
pub fn render_csv(results: &[CapacityResult]) -> String {
    let mut out = String::with_capacity(64 * (results.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in results {
        let (mu, sigma) = match &r.moments {
            Some(m) => (m.mu.to_string(), m.sigma.to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            CSV_SCHEMA_VERSION,
            r.hotspot_density,
            r.method,
            r.capacity,
            opt(r.p_hat_at_capacity),
            opt(r.p_hat_above),
            r.trials,
            mu,
            sigma,
            r.seed,
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// One human-readable line per result cell.
pub fn summary_line(r: &CapacityResult) -> String {
    match &r.moments {
        Some(m) => format!(
            "p_h={} method={} N*={} mu={:.4} sigma={:.4} samples={}",
            r.hotspot_density, r.method, r.capacity, m.mu, m.sigma, m.samples
        ),
        None => format!(
            "p_h={} method={} N*={} p_hat={} p_hat_next={} wilson=\u{b1}{:.4} indeterminate={} trials={}",
            r.hotspot_density,
            r.method,
            r.capacity,
            opt(r.p_hat_at_capacity),
            opt(r.p_hat_above),
            r.wilson_half_width.unwrap_or(f64::NAN),
            r.indeterminate_at_capacity,
            r.trials,
        ),
    }
}

/// Runs a validated configuration end to end: sweep, summary lines on
/// stdout, CSV at the configured path.
pub fn run(config: &RunConfig) -> Result<Vec<CapacityResult>, RunError> {
    config.validate()?;
    let results = sweep_hotspot_density(
        &config.params,
        &config.densities,
        &config.methods,
        config.seed,
        config.moment_samples,
    )
    .map_err(ConfigError::from)?;
    for r in &results {
        println!("{}", summary_line(r));
    }
    fs::write(&config.output, render_csv(&results)).map_err(|source| RunError::Output {
        path: config.output.clone(),
        source,
    })?;
    Ok(results)
}

/// Command-line front end: `--config PATH` loads a config file, every other
/// `--key value` flag mirrors a config key and overrides the file.
pub fn run_cli(args: &[String]) -> Result<(), CliError> {
    let mut config_path: Option<PathBuf> = None;
    let mut overrides: Vec<(String, String)> = Vec::new();

    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        if arg == "--help" || arg == "-h" {
            print!("{}", usage());
            return Ok(());
        }
        let Some(key) = arg.strip_prefix("--") else {
            return Err(CliError::NotAFlag(arg.clone()));
        };
        let Some(value) = iter.next() else {
            return Err(CliError::MissingValue(key.to_string()));
        };
        if key == "config" {
            config_path = Some(PathBuf::from(value));
        } else {
            overrides.push((key.to_string(), value.clone()));
        }
    }

    let mut config = RunConfig::default();
    if let Some(path) = config_path {
        let contents = fs::read_to_string(&path).map_err(|source| CliError::ConfigFile {
            path,
            source,
        })?;
        config.apply_file(&contents).map_err(RunError::Config)?;
    }
    for (key, value) in &overrides {
        config.apply_key_value(key, value).map_err(RunError::Config)?;
    }
    config.validate().map_err(RunError::Config)?;
    run(&config)?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("expected a --key flag, got `{0}`")]
    NotAFlag(String),
    #[error("flag --{0} needs a value")]
    MissingValue(String),
    #[error("cannot read config file {path}: {source}")]
    ConfigFile {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Run(#[from] RunError),
}

fn usage() -> String {
    "two-tier-cdma: uplink user capacity of a two-tier CDMA system\n\
     \n\
     USAGE:\n\
     \x20   two-tier-cdma [--config PATH] [--key value ...]\n\
     \n\
     Flags mirror config keys; flags override the file, the file overrides\n\
     defaults. Keys:\n\
     \x20   processing_gain gamma_db b_macro_m b_micro_m h_ratio x0_m\n\
     \x20   sigma_macro_db sigma_micro_db hotspot_side_m region_side_m\n\
     \x20   densities methods confidence trials moment_samples seed output\n\
     \x20   hotspot_density (shorthand for a single-entry densities list)\n\
     \n\
     Lists are comma-separated: --densities 0.0,0.5,1.0\n\
     Methods: exact_soft hard approx1 approx2\n\
     \n\
     Writes one CSV row per (density, method) to the output path and prints\n\
     a summary line per row.\n"
        .to_string()
}
