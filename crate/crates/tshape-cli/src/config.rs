//! Key-value config documents: `key = value` lines, `#` comments.
//!
//! Flags win over config values, which win over built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;

/// Config problems are usage errors; the exit-code classifier keys on
/// this type.
#[derive(Debug)]
pub struct ConfigFileError(pub String);

impl std::fmt::Display for ConfigFileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigFileError {}

/// Parsed config document with typed accessors that consume keys; call
/// [`ConfigDoc::finish`] to reject unknown leftovers.
#[derive(Debug, Default)]
pub struct ConfigDoc {
    values: BTreeMap<String, String>,
}

impl ConfigDoc {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigFileError> {
        let Some(path) = path else {
            return Ok(ConfigDoc::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigFileError(format!("{}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigFileError(format!(
                    "{}:{}: expected `key = value`, found `{line}`",
                    path.display(),
                    idx + 1
                ))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigDoc { values })
    }

    pub fn take<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigFileError>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| ConfigFileError(format!("config key `{key}`: {e}"))),
        }
    }

    /// Error on any key no command consumed.
    pub fn finish(self) -> Result<(), ConfigFileError> {
        if let Some(key) = self.values.keys().next() {
            return Err(ConfigFileError(format!("unknown config key `{key}`")));
        }
        Ok(())
    }
}

/// Parse a comma-separated list, e.g. kernel sizes or anomaly kinds.
pub fn parse_list<T: std::str::FromStr>(raw: &str) -> Result<Vec<T>, ConfigFileError>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(|item| {
            item.trim()
                .parse()
                .map_err(|e| ConfigFileError(format!("bad list entry `{}`: {e}", item.trim())))
        })
        .collect()
}
