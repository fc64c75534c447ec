//! Flat `key = value` configuration files and flag/file/default resolution.
//!
//! A config file only ever supplies defaults: a value given on the command
//! line always wins. Keys use the long flag names (`c-from`, `t-max`, ...);
//! underscores are accepted in place of hyphens. Blank lines and lines
//! starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use thiserror::Error;

/// Every key any subcommand understands. Keys outside this list are
/// rejected so that typos in a config file do not pass silently.
pub const KNOWN_KEYS: &[&str] = &[
    "gamma",
    "lambda",
    "nu",
    "b0",
    "c",
    "n",
    "seed",
    "t-max",
    "burn-in",
    "sample-interval",
    "init",
    "axis",
    "c-from",
    "c-to",
    "b0-from",
    "b0-to",
    "steps",
    "direction",
    "rhs",
    "grid",
    "tol",
    "damping",
    "max-iter",
    "max-ell",
    "lambda-from",
    "lambda-to",
    "lambda-steps",
    "c-steps",
    "log-lambda",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: PathBuf, line: usize },
    #[error("{path}:{line}: key `{key}` given twice")]
    Duplicate { path: PathBuf, line: usize, key: String },
    #[error("{path}:{line}: unknown key `{key}`")]
    UnknownKey { path: PathBuf, line: usize, key: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Value { key: String, value: String, reason: String },
}

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    path: PathBuf,
    /// key -> (raw value, line number)
    entries: BTreeMap<String, (String, usize)>,
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax { path: path.to_owned(), line });
            };
            let key = normalize_key(key);
            let value = value.trim();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { path: path.to_owned(), line });
            }
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey { path: path.to_owned(), line, key });
            }
            if entries.insert(key.clone(), (value.to_owned(), line)).is_some() {
                return Err(ConfigError::Duplicate { path: path.to_owned(), line, key });
            }
        }
        Ok(ConfigFile { path: path.to_owned(), entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Resolves each setting as flag, else config file, else default, and keeps
/// the resolved values in order for the output header.
#[derive(Debug, Default)]
pub struct Resolver {
    file: Option<ConfigFile>,
    resolved: Vec<(String, String)>,
}

impl Resolver {
    pub fn new(file: Option<ConfigFile>) -> Self {
        Resolver { file, resolved: Vec::new() }
    }

    fn file_value<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.file.as_ref().and_then(|f| f.get(key)) {
            None => Ok(None),
            Some(raw) => parse(raw).map(Some).map_err(|reason| ConfigError::Value {
                key: key.to_owned(),
                value: raw.to_owned(),
                reason,
            }),
        }
    }

    /// A setting that may stay unset; echoed only when it has a value.
    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, ConfigError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => self.file_value(key, |s| s.parse::<T>().map_err(|e| e.to_string()))?,
        };
        if let Some(v) = &value {
            self.resolved.push((key.to_owned(), v.to_string()));
        }
        Ok(value)
    }

    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, ConfigError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = self.optional(key, flag)?;
        Ok(value.unwrap_or_else(|| {
            self.resolved.push((key.to_owned(), default.to_string()));
            default
        }))
    }

    /// Like [`Resolver::value`] for a clap value enum.
    pub fn choice<T: ValueEnum + Clone>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, ConfigError> {
        let value = match flag {
            Some(v) => v,
            None => self.file_value(key, |s| T::from_str(s, true))?.unwrap_or(default),
        };
        let name = value
            .to_possible_value()
            .map(|p| p.get_name().to_owned())
            .unwrap_or_default();
        self.resolved.push((key.to_owned(), name));
        Ok(value)
    }

    /// Resolved `(key, value)` pairs in resolution order.
    pub fn resolved(&self) -> &[(String, String)] {
        &self.resolved
    }
}
