//! Flat key=value configuration files.
//!
//! Every fit/simulate flag has a config-file counterpart under the same
//! kebab-case name (`chains = 4`, `time-scale = 2.5`). Explicit command-line
//! flags always win over file values, so a checked-in config reproduces a run
//! while still allowing one-off overrides. Lines starting with `#` and blank
//! lines are ignored; unknown keys are rejected to catch typos.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Default)]
pub struct Config {
    values: HashMap<String, String>,
}

impl Config {
    /// Parses `path` (when given) and validates keys against `allowed`.
    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self, CliError> {
        let mut values = HashMap::new();
        let Some(path) = path else {
            return Ok(Self { values });
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Validation(format!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    i + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Validation(format!(
                    "{}:{}: unknown config key `{key}` (expected one of: {})",
                    path.display(),
                    i + 1,
                    allowed.join(", ")
                )));
            }
            if values.insert(key.clone(), value).is_some() {
                return Err(CliError::Validation(format!(
                    "{}:{}: duplicate config key `{key}`",
                    path.display(),
                    i + 1
                )));
            }
        }
        Ok(Self { values })
    }

    /// Typed lookup of a config value.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::Validation(format!("config key `{key}`: invalid value `{raw}`: {e}"))
            }),
        }
    }
}

/// Flag-over-config resolution: the command-line value wins when present.
pub fn pick<T: FromStr>(flag: Option<T>, cfg: &Config, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key),
    }
}

/// Like [`pick`] but the value must come from somewhere.
pub fn require<T: FromStr>(flag: Option<T>, cfg: &Config, key: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    pick(flag, cfg, key)?.ok_or_else(|| {
        CliError::Validation(format!("missing required option `--{key}` (or config key `{key}`)"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_keys_comments_and_blanks() {
        let f = write_tmp("# a comment\n\nchains = 8\nseed=42\n");
        let cfg = Config::load(Some(f.path()), &["chains", "seed"]).unwrap();
        assert_eq!(cfg.get::<usize>("chains").unwrap(), Some(8));
        assert_eq!(cfg.get::<u64>("seed").unwrap(), Some(42));
        assert_eq!(cfg.get::<u64>("missing").unwrap(), None);
    }

    #[test]
    fn flags_win_over_config() {
        let f = write_tmp("chains = 8\n");
        let cfg = Config::load(Some(f.path()), &["chains"]).unwrap();
        assert_eq!(pick(Some(2usize), &cfg, "chains").unwrap(), Some(2));
        assert_eq!(pick::<usize>(None, &cfg, "chains").unwrap(), Some(8));
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed_keys() {
        let unknown = write_tmp("chainz = 8\n");
        let err = Config::load(Some(unknown.path()), &["chains"]).unwrap_err();
        assert!(err.to_string().contains("unknown config key `chainz`"));

        let dup = write_tmp("chains = 8\nchains = 9\n");
        let err = Config::load(Some(dup.path()), &["chains"]).unwrap_err();
        assert!(err.to_string().contains("duplicate config key"));

        let bad = write_tmp("chains\n");
        let err = Config::load(Some(bad.path()), &["chains"]).unwrap_err();
        assert!(err.to_string().contains("expected `key = value`"));
    }

    #[test]
    fn typed_parse_errors_name_the_key() {
        let f = write_tmp("chains = lots\n");
        let cfg = Config::load(Some(f.path()), &["chains"]).unwrap();
        let err = cfg.get::<usize>("chains").unwrap_err();
        assert!(err.to_string().contains("config key `chains`"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn require_reports_the_flag_name() {
        let cfg = Config::default();
        let err = require::<u64>(None, &cfg, "seed").unwrap_err();
        assert!(err.to_string().contains("--seed"));
    }
}
