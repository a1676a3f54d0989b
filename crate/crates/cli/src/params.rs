//! Parameter resolution: config file, flag overrides, typed access and
//! sweep grids.
//!
//! The config file is flat `key = value` text. Blank lines and lines
//! starting with `#` are ignored; keys are the long flag names (`t-max`,
//! `site-cap`, ...), with `_` accepted for `-`. A `manifest.json` written by
//! a previous run is also accepted, in which case its `config` object is used.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub type ParamMap = BTreeMap<String, String>;

pub fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-")
}

pub fn parse_config_text(text: &str) -> Result<ParamMap, CliError> {
    let mut out = ParamMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value, got '{line}'", i + 1)))?;
        out.insert(normalize_key(key), value.trim().to_string());
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<ParamMap, CliError> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let cfg = v
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| CliError::Usage(format!("{}: no 'config' object", path.display())))?;
        return Ok(cfg
            .iter()
            .map(|(k, v)| {
                let s = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (normalize_key(k), s)
            })
            .collect());
    }
    parse_config_text(&text)
}

/// Typed view of a parameter map that remembers every value it hands out,
/// defaults included, for the manifest.
pub struct Reader<'a> {
    values: &'a ParamMap,
    resolved: ParamMap,
}

impl<'a> Reader<'a> {
    pub fn new(values: &'a ParamMap) -> Self {
        Reader {
            values,
            resolved: ParamMap::new(),
        }
    }

    pub fn into_resolved(self) -> ParamMap {
        self.resolved
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse_str<T: FromStr>(&mut self, key: &str, s: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if is_grid(s) {
            return Err(CliError::Usage(format!(
                "--{key} {s}: ranges and lists are only accepted by sweep"
            )));
        }
        let v = s
            .parse::<T>()
            .map_err(|e| CliError::Usage(format!("--{key} {s}: {e}")))?;
        self.resolved.insert(key.to_string(), s.to_string());
        Ok(v)
    }

    pub fn required<T: FromStr>(&mut self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let s = self
            .raw(key)
            .ok_or_else(|| CliError::Usage(format!("missing required parameter --{key}")))?;
        self.parse_str(key, s)
    }

    pub fn or<T: FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            Some(s) => self.parse_str(key, s),
            None => {
                self.resolved.insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    pub fn optional<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            Some(s) => self.parse_str(key, s).map(Some),
            None => Ok(None),
        }
    }
}

fn is_grid(s: &str) -> bool {
    s.contains(',') || s.contains("..")
}

/// Expands one parameter value: `a,b,c`, `a..b` (inclusive integers) or
/// `a..b:step`.
pub fn expand_values(key: &str, s: &str) -> Result<Vec<String>, CliError> {
    if s.contains(',') {
        return Ok(s.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect());
    }
    let Some((lo, rest)) = s.split_once("..") else {
        return Ok(vec![s.to_string()]);
    };
    let bad = || CliError::Usage(format!("--{key} {s}: expected a..b or a..b:step"));
    let (hi, step) = match rest.split_once(':') {
        Some((h, st)) => (h, Some(st)),
        None => (rest, None),
    };
    if let (Ok(a), Ok(b)) = (lo.trim().parse::<i64>(), hi.trim().parse::<i64>()) {
        let step = match step {
            Some(st) => st.trim().parse::<i64>().map_err(|_| bad())?,
            None => 1,
        };
        if step <= 0 || b < a {
            return Err(bad());
        }
        return Ok((a..=b).step_by(step as usize).map(|v| v.to_string()).collect());
    }
    let a: f64 = lo.trim().parse().map_err(|_| bad())?;
    let b: f64 = hi.trim().parse().map_err(|_| bad())?;
    let step: f64 = step.ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
    if !(step > 0.0) || b < a {
        return Err(bad());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            // trim the representation error of a + i * step
            let v = a + i as f64 * step;
            format!("{}", (v * 1e12).round() / 1e12)
        })
        .collect())
}

/// Cartesian product of every expanded parameter. Keys are taken in
/// lexicographic order with the last key varying fastest.
pub fn expand_grid(values: &ParamMap) -> Result<Vec<ParamMap>, CliError> {
    let mut grid = vec![ParamMap::new()];
    for (key, raw) in values {
        let options = expand_values(key, raw)?;
        if options.is_empty() {
            return Err(CliError::Usage(format!("--{key}: empty list")));
        }
        grid = grid
            .into_iter()
            .flat_map(|point| {
                options.iter().map(move |v| {
                    let mut next = point.clone();
                    next.insert(key.clone(), v.clone());
                    next
                })
            })
            .collect();
    }
    Ok(grid)
}
