//! Resolution of run parameters: flag, then config file, then environment
//! (seed only), then built-in default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};

/// Seed used when none is given anywhere.
pub const DEFAULT_SEED: u64 = 20_240_607;

/// Environment variable that overrides [`DEFAULT_SEED`].
pub const SEED_ENV: &str = "BFRAC_SEED";

#[derive(Debug)]
pub enum CliError {
    /// Invalid or missing configuration; exit status 2.
    Config(String),
    /// A computation or IO failure; exit status 3.
    Run(String),
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Run(m) => write!(f, "error: {m}"),
        }
    }
}

pub fn config_err(field: &str, msg: impl Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

pub fn run_err(e: impl Display) -> CliError {
    CliError::Run(e.to_string())
}

fn normalise(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_")
}

/// Flat `key = value` file. `#` starts a comment; keys may use `-` or `_`.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Config(format!("config line {}: expected key=value, got `{line}`", i + 1)));
        };
        let key = normalise(k);
        if key.is_empty() {
            return Err(CliError::Config(format!("config line {}: empty key", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// Resolves parameters and remembers every resolved value, so the full
/// configuration can be echoed into each record.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    used: BTreeMap<String, bool>,
    resolved: Map<String, Value>,
}

impl Settings {
    pub fn new(file: BTreeMap<String, String>) -> Self {
        let used = file.keys().map(|k| (k.clone(), false)).collect();
        Self {
            file,
            used,
            resolved: Map::new(),
        }
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err("config", format!("cannot read {}: {e}", p.display())))?;
                Ok(Self::new(parse_config_file(&text)?))
            }
        }
    }

    fn file_value<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.file.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|e| config_err(key, format!("cannot parse `{s}` from config file: {e}"))),
        }
    }

    pub fn record(&mut self, key: &str, v: impl Serialize) {
        if let Some(u) = self.used.get_mut(key) {
            *u = true;
        }
        self.resolved
            .insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    /// Flag, else config file, else `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.record(key, &v);
        Ok(v)
    }

    /// Like [`Settings::get`] with no default; a missing value is an error.
    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self
                .file_value(key)?
                .ok_or_else(|| config_err(key, format!("missing; pass --{key} or set {key} in the config file")))?,
        };
        self.record(key, &v);
        Ok(v)
    }

    /// Flag, else config file, else absent.
    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &v {
            self.record(key, v);
        }
        Ok(v)
    }

    /// Flag, else config file, without echoing the value: for settings such
    /// as the output path that do not affect any computed value.
    pub fn untracked(&mut self, key: &str, flag: Option<String>) -> Option<String> {
        if let Some(u) = self.used.get_mut(key) {
            *u = true;
        }
        flag.or_else(|| self.file.get(key).cloned())
    }

    pub fn positive(&mut self, key: &str, flag: Option<f64>, default: f64) -> Result<f64, CliError> {
        let v = self.get(key, flag, default)?;
        check_positive(key, v)
    }

    pub fn seed(&mut self, flag: Option<u64>) -> Result<u64, CliError> {
        let v = match flag {
            Some(v) => v,
            None => match self.file_value("seed")? {
                Some(v) => v,
                None => match std::env::var(SEED_ENV) {
                    Ok(s) => s
                        .trim()
                        .parse()
                        .map_err(|e| config_err("seed", format!("cannot parse {SEED_ENV}=`{s}`: {e}")))?,
                    Err(_) => DEFAULT_SEED,
                },
            },
        };
        self.record("seed", v);
        Ok(v)
    }

    /// Config-file keys that no subcommand asked for.
    pub fn unused_keys(&self) -> Vec<String> {
        self.used
            .iter()
            .filter(|(_, &u)| !u)
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn resolved(&self) -> Value {
        Value::Object(self.resolved.clone())
    }
}

pub fn check_positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(config_err(key, format!("must be positive and finite, got {v}")))
    }
}

pub fn check_count(key: &str, v: usize) -> Result<usize, CliError> {
    if v > 0 {
        Ok(v)
    } else {
        Err(config_err(key, "must be at least 1"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_files() {
        let m = parse_config_file("# comment\nseed = 5\nn-traces=10 # trailing\n\n").unwrap();
        assert_eq!(m["seed"], "5");
        assert_eq!(m["n_traces"], "10");
        assert!(parse_config_file("novalue\n").is_err());
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let mut s = Settings::new(parse_config_file("L = 4\nR = 2").unwrap());
        assert_eq!(s.get("L", Some(8.0), 1.0).unwrap(), 8.0);
        assert_eq!(s.get("R", None, 1.0).unwrap(), 2.0);
        assert_eq!(s.get("t", None, 0.5).unwrap(), 0.5);
        assert_eq!(s.resolved()["L"], 8.0);
        assert!(s.unused_keys().is_empty());
    }

    #[test]
    fn bad_values_name_their_field() {
        let mut s = Settings::new(parse_config_file("n = many").unwrap());
        match s.get::<usize>("n", None, 1) {
            Err(CliError::Config(m)) => assert!(m.starts_with("n:")),
            other => panic!("{other:?}"),
        }
        assert!(s.require::<f64>("L", None).is_err());
        assert!(check_positive("R", -1.0).is_err());
    }
}
