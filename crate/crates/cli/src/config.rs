//! Flat `key = value` configuration files.
//!
//! Keys are the long flag names without the leading dashes; `_` and `-` are
//! interchangeable. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl ConfigFile {
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", k + 1)))?;
            let key = normalize(key);
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", k + 1)));
            }
            values.insert(key, value.trim().to_owned());
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text, allowed)
            }
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {v:?}"))),
        }
    }

    /// Command-line value, else config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// A boolean switch is on if given on the command line or set in the file.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        Ok(flag || self.get(key)?.unwrap_or(false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let c = ConfigFile::parse("# comment\nbeam = 4\nmax_target_len=9\n", &["beam", "max-target-len", "alpha"]).unwrap();
        assert_eq!(c.pick(Some(7usize), "beam", 10).unwrap(), 7);
        assert_eq!(c.pick(None, "beam", 10usize).unwrap(), 4);
        assert_eq!(c.pick(None, "alpha", 0.6).unwrap(), 0.6);
        assert_eq!(c.pick_opt::<usize>(None, "max-target-len").unwrap(), Some(9));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(ConfigFile::parse("beam 4", &["beam"]).is_err());
        assert!(ConfigFile::parse("colour = red", &["beam"]).is_err());
        let c = ConfigFile::parse("beam = many", &["beam"]).unwrap();
        assert!(c.get::<usize>("beam").is_err());
    }
}
