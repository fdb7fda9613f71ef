//! Flat key-value config files.
//!
//! One `key = value` pair per line, dotted section names (`problem.name`,
//! `schedule.gamma`, ...), `#` comments, no nesting. Values are scalars,
//! comma-separated lists, or semicolon-separated rows of comma-separated
//! numbers. Every parse error carries the file and line it came from, and
//! keys nobody consumed are rejected so typos fail loudly.

use std::cell::RefCell;
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug)]
pub struct Config {
    path: String,
    entries: BTreeMap<String, (usize, String)>,
    used: RefCell<BTreeSet<String>>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&path.display().to_string(), &text)
    }

    pub fn parse(path: &str, text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!(
                    "{path}:{line_no}: expected 'key = value', got '{raw}'"
                ))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError(format!("{path}:{line_no}: empty key")));
            }
            match entries.entry(key) {
                Entry::Vacant(slot) => {
                    slot.insert((line_no, value.trim().to_string()));
                }
                Entry::Occupied(slot) => {
                    return Err(ConfigError(format!(
                        "{path}:{line_no}: duplicate key '{}' (first set on line {})",
                        slot.key(),
                        slot.get().0
                    )));
                }
            }
        }
        Ok(Config {
            path: path.to_string(),
            entries,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    fn err(&self, key: &str, message: &str) -> ConfigError {
        match self.entries.get(key) {
            Some((line, _)) => ConfigError(format!("{}:{line}: key '{key}': {message}", self.path)),
            None => ConfigError(format!("{}: key '{key}': {message}", self.path)),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.raw(key)
            .ok_or_else(|| self.err(key, "missing required key"))
    }

    pub fn get_string(&self, key: &str) -> Result<String, ConfigError> {
        Ok(self.require(key)?.to_string())
    }

    pub fn get_f64(&self, key: &str) -> Result<f64, ConfigError> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| self.err(key, &format!("expected a number, got '{raw}'")))
    }

    pub fn get_f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.raw(key) {
            Some(raw) => raw
                .parse()
                .map_err(|_| self.err(key, &format!("expected a number, got '{raw}'"))),
            None => Ok(default),
        }
    }

    pub fn get_usize(&self, key: &str) -> Result<usize, ConfigError> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| self.err(key, &format!("expected a nonnegative integer, got '{raw}'")))
    }

    pub fn get_usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(key) {
            Some(raw) => raw.parse().map_err(|_| {
                self.err(key, &format!("expected a nonnegative integer, got '{raw}'"))
            }),
            None => Ok(default),
        }
    }

    pub fn get_u64_opt(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.raw(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| self.err(key, &format!("expected an integer, got '{raw}'"))),
            None => Ok(None),
        }
    }

    pub fn get_bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(other) => Err(self.err(key, &format!("expected true or false, got '{other}'"))),
            None => Ok(default),
        }
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.require(key)?;
        parse_f64_list(raw).map_err(|m| self.err(key, &m))
    }

    pub fn get_u64_list(&self, key: &str) -> Result<Vec<u64>, ConfigError> {
        let raw = self.require(key)?;
        raw.split(',')
            .map(|p| p.trim().parse::<u64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| {
                self.err(
                    key,
                    &format!("expected comma-separated integers, got '{raw}'"),
                )
            })
    }

    pub fn get_string_list(&self, key: &str) -> Result<Vec<String>, ConfigError> {
        Ok(self
            .require(key)?
            .split(',')
            .map(|p| p.trim().to_string())
            .collect())
    }

    /// Semicolon-separated rows of comma-separated numbers.
    pub fn get_rows(&self, key: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
        let raw = self.require(key)?;
        raw.split(';')
            .map(parse_f64_list)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|m| self.err(key, &m))
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Fails on keys that no reader consumed: typos and leftovers.
    pub fn reject_unused(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        for (key, (line, _)) in &self.entries {
            if !used.contains(key) {
                return Err(ConfigError(format!(
                    "{}:{line}: unknown key '{key}'",
                    self.path
                )));
            }
        }
        Ok(())
    }
}

fn parse_f64_list(raw: &str) -> Result<Vec<f64>, String> {
    raw.split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| format!("expected comma-separated numbers, got '{raw}'"))
}
