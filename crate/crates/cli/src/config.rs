//! `key=value` run configuration. Keys are the long flag names; a flag given
//! on the command line always wins over the file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "out", "quiet", "no-timestamp", "data-dir", "fixture",
    // excess
    "reported", "history", "weights", "smoothing", "no-smoothing",
    // waves
    "excess", "start-threshold", "end-threshold", "persistence", "min-wave-days",
    // fit
    "wave", "whole-series", "beta", "eta", "epsilon", "metric", "top-k", "threads",
    "step", "seed-fraction",
    // forecast
    "prior", "last", "average", "start", "horizon", "onset-threshold",
    // finalsize
    "r0", "curve", "table",
    // simulate
    "model", "days", "i0", "e0", "kappa",
];

#[derive(Clone, Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|msg| CliError::Input(format!("{}: {msg}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(format!("line {}: unknown key {key:?}", n + 1));
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(format!("line {}: duplicate key {key:?}", n + 1));
            }
        }
        Ok(Self { values })
    }

    /// `flag` if given, else the parsed config value, else `None`.
    pub fn pick<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|raw| {
                raw.parse()
                    .map_err(|e| CliError::Usage(format!("config key {key}: {e}")))
            })
            .transpose()
    }

    pub fn pick_or<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.pick(key, flag)?.unwrap_or(default))
    }

    /// Switches: the flag turns it on, otherwise `key=true|false`.
    pub fn switch(&self, key: &str, flag: bool) -> Result<bool, CliError> {
        Ok(flag || self.pick::<bool>(key, None)?.unwrap_or(false))
    }

    /// Repeatable flags; the config holds a comma-separated list.
    pub fn list<T>(&self, key: &str, flag: Vec<T>) -> Result<Vec<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if !flag.is_empty() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(Vec::new()),
            Some(raw) => raw
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse()
                        .map_err(|e| CliError::Usage(format!("config key {key}: {e}")))
                })
                .collect(),
        }
    }
}
