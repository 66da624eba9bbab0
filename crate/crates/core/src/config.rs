//! Disclosure parameters supplied by the data custodian.
//!
//! The file format is a flat YAML mapping using the parameter names below.
//! Keys that are absent fall back to the defaults; unknown keys are reported
//! as warnings and otherwise ignored.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable that may name the default config file.
pub const CONFIG_ENV_VAR: &str = "SDC_CONFIG";

pub const KEY_SAFE_THRESHOLD: &str = "safe_threshold";
pub const KEY_SAFE_DOF_THRESHOLD: &str = "safe_dof_threshold";
pub const KEY_SAFE_NK_N: &str = "safe_nk_n";
pub const KEY_SAFE_NK_K: &str = "safe_nk_k";
pub const KEY_SAFE_PRATIO_P: &str = "safe_pratio_p";

const KNOWN_KEYS: [&str; 5] = [
    KEY_SAFE_THRESHOLD,
    KEY_SAFE_DOF_THRESHOLD,
    KEY_SAFE_NK_N,
    KEY_SAFE_NK_K,
    KEY_SAFE_PRATIO_P,
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file not found: {0}")]
    NotFound(PathBuf),
    #[error("failed to read config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config file is not a flat YAML mapping: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

/// Risk-appetite parameters consumed by every disclosure check.
///
/// Immutable once validated; share it freely across threads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleConfig {
    /// Minimum number of contributors for a cell to be released.
    pub safe_threshold: f64,
    /// Minimum residual degrees of freedom for a regression to be released.
    pub safe_dof_threshold: f64,
    /// Number of largest contributors considered by the NK rule.
    pub safe_nk_n: f64,
    /// Share of the cell total (as a fraction) the largest N may not reach.
    pub safe_nk_k: f64,
    /// Minimum ratio used by the p% rule (as a fraction).
    pub safe_pratio_p: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        default_config()
    }
}

/// The out-of-the-box parameter set.
pub fn default_config() -> RuleConfig {
    RuleConfig {
        safe_threshold: 10.0,
        safe_dof_threshold: 10.0,
        safe_nk_n: 2.0,
        safe_nk_k: 0.9,
        safe_pratio_p: 0.1,
    }
}

impl RuleConfig {
    /// Checks every domain constraint, naming the first offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
            ConfigError::Invalid {
                key,
                reason: reason.into(),
            }
        }
        let finite = [
            (KEY_SAFE_THRESHOLD, self.safe_threshold),
            (KEY_SAFE_DOF_THRESHOLD, self.safe_dof_threshold),
            (KEY_SAFE_NK_N, self.safe_nk_n),
            (KEY_SAFE_NK_K, self.safe_nk_k),
            (KEY_SAFE_PRATIO_P, self.safe_pratio_p),
        ];
        for (key, value) in finite {
            if !value.is_finite() {
                return Err(invalid(key, format!("{value} is not a finite number")));
            }
        }
        if self.safe_threshold < 1.0 {
            return Err(invalid(KEY_SAFE_THRESHOLD, "must be at least 1"));
        }
        if self.safe_dof_threshold < 1.0 {
            return Err(invalid(KEY_SAFE_DOF_THRESHOLD, "must be at least 1"));
        }
        if self.safe_nk_n < 1.0 || self.safe_nk_n.fract() != 0.0 {
            return Err(invalid(
                KEY_SAFE_NK_N,
                format!("{} must be an integer of at least 1", self.safe_nk_n),
            ));
        }
        if !(self.safe_nk_k > 0.0 && self.safe_nk_k < 1.0) {
            return Err(invalid(
                KEY_SAFE_NK_K,
                format!("{} must lie strictly between 0 and 1", self.safe_nk_k),
            ));
        }
        if self.safe_pratio_p <= 0.0 {
            return Err(invalid(
                KEY_SAFE_PRATIO_P,
                format!("{} must be strictly positive", self.safe_pratio_p),
            ));
        }
        Ok(())
    }

    /// The N of the NK rule as a count.
    pub fn nk_n(&self) -> usize {
        self.safe_nk_n as usize
    }

    /// Serialises to the flat YAML format accepted by [`load_config`].
    pub fn to_yaml(&self) -> String {
        // f64 Debug keeps a trailing `.0` and round-trips exactly
        format!(
            "{KEY_SAFE_THRESHOLD}: {:?}\n{KEY_SAFE_DOF_THRESHOLD}: {:?}\n{KEY_SAFE_NK_N}: {:?}\n{KEY_SAFE_NK_K}: {:?}\n{KEY_SAFE_PRATIO_P}: {:?}\n",
            self.safe_threshold,
            self.safe_dof_threshold,
            self.safe_nk_n,
            self.safe_nk_k,
            self.safe_pratio_p
        )
    }
}

impl fmt::Display for RuleConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "safe_threshold={} safe_dof_threshold={} safe_nk_n={} safe_nk_k={} safe_pratio_p={}",
            self.safe_threshold,
            self.safe_dof_threshold,
            self.safe_nk_n,
            self.safe_nk_k,
            self.safe_pratio_p
        )
    }
}

/// A validated config plus any diagnostics raised while reading it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: RuleConfig,
    pub warnings: Vec<String>,
}

/// Parses YAML text, overriding defaults with every recognised key.
pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigError> {
    let mut config = default_config();
    let mut warnings = Vec::new();

    let value: serde_yaml::Value =
        serde_yaml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mapping: BTreeMap<String, serde_yaml::Value> = match value {
        // an empty document means "all defaults"
        serde_yaml::Value::Null => BTreeMap::new(),
        serde_yaml::Value::Mapping(_) => {
            serde_yaml::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))?
        }
        other => {
            return Err(ConfigError::Parse(format!(
                "expected a mapping at top level, found {}",
                yaml_kind(&other)
            )))
        }
    };

    for (key, value) in &mapping {
        let Some(&known) = KNOWN_KEYS.iter().find(|k| **k == key.as_str()) else {
            warnings.push(format!("ignoring unrecognised config key `{key}`"));
            continue;
        };
        let number = match value {
            serde_yaml::Value::Number(n) => n.as_f64(),
            _ => None,
        }
        .ok_or_else(|| ConfigError::Invalid {
            key: known,
            reason: format!("expected a number, found {}", yaml_kind(value)),
        })?;
        let slot = match known {
            KEY_SAFE_THRESHOLD => &mut config.safe_threshold,
            KEY_SAFE_DOF_THRESHOLD => &mut config.safe_dof_threshold,
            KEY_SAFE_NK_N => &mut config.safe_nk_n,
            KEY_SAFE_NK_K => &mut config.safe_nk_k,
            _ => &mut config.safe_pratio_p,
        };
        *slot = number;
    }

    config.validate()?;
    Ok(LoadedConfig { config, warnings })
}

fn yaml_kind(value: &serde_yaml::Value) -> &'static str {
    match value {
        serde_yaml::Value::Null => "null",
        serde_yaml::Value::Bool(_) => "a boolean",
        serde_yaml::Value::Number(_) => "a number",
        serde_yaml::Value::String(_) => "a string",
        serde_yaml::Value::Sequence(_) => "a sequence",
        serde_yaml::Value::Mapping(_) => "a mapping",
        serde_yaml::Value::Tagged(_) => "a tagged value",
    }
}

/// Reads a config file and keeps its warnings for the caller.
pub fn load_config_file(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            ConfigError::NotFound(path.to_path_buf())
        } else {
            ConfigError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    parse_config(&text)
}

/// Loads the config at `path`, or the defaults when no path is given.
///
/// Unknown keys are logged at warn level.
pub fn load_config(path: Option<&Path>) -> Result<RuleConfig, ConfigError> {
    let Some(path) = path else {
        return Ok(default_config());
    };
    let loaded = load_config_file(path)?;
    for warning in &loaded.warnings {
        log::warn!("{}: {warning}", path.display());
    }
    Ok(loaded.config)
}

/// Picks the config path: explicit flag, then `SDC_CONFIG`, then none.
pub fn resolve_config_path(flag: Option<&Path>) -> Option<PathBuf> {
    if let Some(path) = flag {
        return Some(path.to_path_buf());
    }
    std::env::var_os(CONFIG_ENV_VAR)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}
