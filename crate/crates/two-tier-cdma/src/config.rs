//! Run configuration: flat `key = value` text with `#` comments.
//!
//! Every key has a default, so an empty config is a full standard run.
//! The CLI accepts the same keys as `--key value` flags; flags override the
//! file, the file overrides defaults. Lists are comma-separated.

use std::path::PathBuf;

use thiserror::Error;

use crate::capacity::Method;
use crate::params::{ParamError, SystemParams};

/// Default output path when none is configured.
pub const DEFAULT_OUTPUT: &str = "capacity.csv";

/// Default sample count for gain-share moment estimation.
pub const DEFAULT_MOMENT_SAMPLES: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("{key}: {message}")]
    InvalidValue { key: &'static str, message: String },
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// A fully resolved run: parameter template, densities to sweep, methods to
/// evaluate, seeding and output choices.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Scalar system parameters; `hotspot_density` is overridden per sweep
    /// point and carries no meaning here.
    pub params: SystemParams,
    pub densities: Vec<f64>,
    pub methods: Vec<Method>,
    pub moment_samples: usize,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            densities: (0..=10).map(|i| i as f64 / 10.0).collect(),
            methods: Method::ALL.to_vec(),
            moment_samples: DEFAULT_MOMENT_SAMPLES,
            seed: 1,
            output: PathBuf::from(DEFAULT_OUTPUT),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| ConfigError::InvalidValue {
        key,
        message: format!("cannot parse `{value}`: {e}"),
    })
}

impl RunConfig {
    /// Applies one `key = value` pair. Unknown keys and unparsable or
    /// out-of-range values are rejected; a later [`Self::validate`] checks
    /// cross-field constraints.
    pub fn apply_key_value(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "processing_gain" => self.params.processing_gain = parse_value("processing_gain", value)?,
            "gamma_db" => self.params.gamma_db = parse_value("gamma_db", value)?,
            "b_macro_m" => self.params.b_macro_m = parse_value("b_macro_m", value)?,
            "b_micro_m" => self.params.b_micro_m = parse_value("b_micro_m", value)?,
            "h_ratio" => self.params.h_ratio = parse_value("h_ratio", value)?,
            "x0_m" => self.params.x0_m = parse_value("x0_m", value)?,
            "sigma_macro_db" => self.params.sigma_macro_db = parse_value("sigma_macro_db", value)?,
            "sigma_micro_db" => self.params.sigma_micro_db = parse_value("sigma_micro_db", value)?,
            "hotspot_side_m" => self.params.hotspot_side_m = parse_value("hotspot_side_m", value)?,
            "region_side_m" => self.params.region_side_m = parse_value("region_side_m", value)?,
            "confidence" => self.params.confidence = parse_value("confidence", value)?,
            "trials" => self.params.trials = parse_value("trials", value)?,
            "moment_samples" => self.moment_samples = parse_value("moment_samples", value)?,
            "seed" => self.seed = parse_value("seed", value)?,
            "output" => {
                if value.is_empty() {
                    return Err(ConfigError::InvalidValue {
                        key: "output",
                        message: "path must not be empty".into(),
                    });
                }
                self.output = PathBuf::from(value);
            }
            "densities" => {
                let mut parsed = Vec::new();
                for part in value.split(',') {
                    parsed.push(parse_value::<f64>("densities", part.trim())?);
                }
                self.densities = parsed;
            }
            // Single-density shorthand for `densities`.
            "hotspot_density" => {
                let p_h: f64 = parse_value("hotspot_density", value)?;
                if !(0.0..=1.0).contains(&p_h) {
                    return Err(ConfigError::InvalidValue {
                        key: "hotspot_density",
                        message: format!("must lie in [0, 1], got {p_h}"),
                    });
                }
                self.densities = vec![p_h];
            }
            "methods" => {
                let mut parsed = Vec::new();
                for part in value.split(',') {
                    let method: Method =
                        part.trim()
                            .parse()
                            .map_err(|e| ConfigError::InvalidValue {
                                key: "methods",
                                message: e,
                            })?;
                    if !parsed.contains(&method) {
                        parsed.push(method);
                    }
                }
                self.methods = parsed;
            }
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Applies a whole config file. `#` starts a comment, blank lines are
    /// skipped, later assignments win.
    pub fn apply_file(&mut self, contents: &str) -> Result<(), ConfigError> {
        for (idx, raw) in contents.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Malformed {
                    line: idx + 1,
                    text: raw.trim().to_string(),
                });
            };
            self.apply_key_value(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Cross-field validation; called once all sources are applied.
    pub fn validate(&self) -> Result<(), ConfigError> {
        // The density field of the template is swept, so validate the
        // scalars with a neutral density and the densities separately.
        self.params.with_hotspot_density(0.0).validate()?;
        if self.densities.is_empty() {
            return Err(ConfigError::InvalidValue {
                key: "densities",
                message: "need at least one density".into(),
            });
        }
        for &p_h in &self.densities {
            if !(0.0..=1.0).contains(&p_h) || !p_h.is_finite() {
                return Err(ConfigError::InvalidValue {
                    key: "densities",
                    message: format!("every density must lie in [0, 1], got {p_h}"),
                });
            }
        }
        if self.methods.is_empty() {
            return Err(ConfigError::InvalidValue {
                key: "methods",
                message: "need at least one method".into(),
            });
        }
        if self.methods.contains(&Method::Approx2) && self.moment_samples < 2 {
            return Err(ConfigError::InvalidValue {
                key: "moment_samples",
                message: "need at least 2 samples for the closed form".into(),
            });
        }
        Ok(())
    }
}

/// Parses a complete config file on top of the defaults and validates it.
/// Any error aborts the parse; no partially applied config escapes.
pub fn parse_config(contents: &str) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    config.apply_file(contents)?;
    config.validate()?;
    Ok(config)
}
