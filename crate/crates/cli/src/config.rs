//! `key = value` configuration files.
//!
//! Keys are the long flag names of the subcommand (either `-` or `_` as
//! separator). Blank lines and lines starting with `#` are ignored. A flag
//! given on the command line always wins over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default)]
pub struct ConfigFile {
    path: PathBuf,
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    /// Parses `text`, rejecting keys outside `allowed`.
    pub fn parse(text: &str, path: &Path, allowed: &[&str]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::ConfigSyntax {
                path: path.to_path_buf(),
                line: n + 1,
            })?;
            let key = key.trim().replace('_', "-");
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::UnknownKey {
                    path: path.to_path_buf(),
                    line: n + 1,
                    key,
                });
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self {
            path: path.to_path_buf(),
            values,
        })
    }

    pub fn load(path: &Path, allowed: &[&str]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path, allowed)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|e: T::Err| CliError::BadValue {
                key: key.to_string(),
                value: raw.clone(),
                reason: format!("{e} (in {})", self.path.display()),
            }),
        }
    }

    /// The flag if given, else the file value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.pick_opt(flag, key)?.unwrap_or(default))
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    pub fn pick_required<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.pick_opt(flag, key)?
            .ok_or_else(|| CliError::Missing(key.to_string()))
    }

    /// Boolean switches: set by the flag or by `key = true` in the file.
    pub fn pick_switch(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        Ok(flag || self.get::<bool>(key)?.unwrap_or(false))
    }
}

/// Comma-separated list of numbers; `inf` is accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let items = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<T>().map_err(|e| format!("'{t}': {e}")))
            .collect::<Result<Vec<T>, String>>()?;
        if items.is_empty() {
            return Err("empty list".into());
        }
        Ok(List(items))
    }
}
