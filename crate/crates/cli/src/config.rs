//! Flat key-value config files and flag/file/default resolution.
//!
//! One `key = value` per line, `#` starts a comment. Every flag has a file
//! equivalent under the same name with dashes as underscores; flags
//! override file values.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Union of the keys every subcommand understands.
const KNOWN_KEYS: &[&str] = &[
    // paths
    "corpus",
    "model_out",
    "vocab_out",
    "analogies",
    "report_out",
    "macro_map",
    // preprocessing
    "num_token",
    "lowercase",
    "separators",
    "alphabet_extra",
    "min_count",
    // training
    "mode",
    "window",
    "negatives",
    "dim",
    "epochs",
    "sample",
    "lr_initial",
    "lr_floor",
    "seed",
    "workers",
    "cbow_mean",
    "window_policy",
    "shuffle",
    "table_size",
    "checkpoint_every",
    // evaluation
    "metric",
    "epsilon",
    "oov_mode",
    "exclude_inputs",
    "cosmul_shift",
    "format",
    "topk",
    "binary",
    "normalize",
];

#[derive(Debug, Default)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    i + 1
                ))
            })?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::usage(format!(
                    "{}:{}: unknown config key `{key}`",
                    path.display(),
                    i + 1
                )));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        debug_assert!(KNOWN_KEYS.contains(&key), "unregistered key {key}");
        self.values.get(key).map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::usage(format!("config key `{key}`: cannot parse `{raw}`"))
            }),
        }
    }

    pub fn parsed_bool(&self, key: &str) -> Result<Option<bool>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some("true") | Some("on") | Some("1") | Some("yes") => Ok(Some(true)),
            Some("false") | Some("off") | Some("0") | Some("no") => Ok(Some(false)),
            Some(raw) => Err(CliError::usage(format!(
                "config key `{key}`: expected a boolean, got `{raw}`"
            ))),
        }
    }
}

/// flag > file > default
pub fn resolve<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Echo one effective setting to standard error.
pub fn echo<T: Display>(key: &str, value: T) {
    eprintln!("{key} = {value}");
}
