//! Argument plumbing: counts written like `2e8`, enum values by name, and
//! JSON config files under command-line flags.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::CliError;

/// A nonnegative integer that also accepts float notation such as `2e8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Count(pub u64);

fn count_from_f64(v: f64) -> Result<Count, String> {
    if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(Count(v as u64))
    } else {
        Err(format!("{v} is not a nonnegative integer"))
    }
}

impl FromStr for Count {
    type Err = String;

    fn from_str(s: &str) -> Result<Count, String> {
        let s = s.trim().replace('_', "");
        if let Ok(v) = s.parse::<u64>() {
            return Ok(Count(v));
        }
        let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
        count_from_f64(v)
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Count {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(self.0)
    }
}

impl<'de> Deserialize<'de> for Count {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Count, D::Error> {
        use serde::de::Error;
        match Value::deserialize(d)? {
            Value::Number(n) => match n.as_u64() {
                Some(v) => Ok(Count(v)),
                None => count_from_f64(n.as_f64().unwrap_or(f64::NAN)).map_err(D::Error::custom),
            },
            Value::String(s) => s.parse().map_err(D::Error::custom),
            other => Err(D::Error::custom(format!("expected a count, got {other}"))),
        }
    }
}

/// Parses a library enum from its serialized name; `-` may stand for `_`.
pub fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad grid entry {p:?}"))
        })
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(format!("grid {s:?} must be start:stop:step"));
    };
    if !(step > 0.0) || stop < start {
        return Err(format!("grid {s:?} needs step > 0 and stop >= start"));
    }
    let k = ((stop - start) / step + 1e-9).floor() as usize;
    // Rounded so that 0.4 + 1 * 0.2 prints as 0.6.
    Ok((0..=k)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// Parses a comma-separated list of numbers; the empty string is the empty
/// list.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(|_| format!("bad number {p:?}")))
        .collect()
}

/// Overlays the flags that were actually given onto the config file.
///
/// `None` and `false` count as "not given", so a file can switch a flag on
/// and the command line cannot switch it back off.
pub fn merge_with_file<T>(flags: &T, file: Option<&Path>) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned,
{
    let Some(path) = file else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
    let Value::Object(base) = serde_json::from_str::<Value>(&text)
        .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?
    else {
        return Err(CliError::Validation(format!(
            "config {} is not a JSON object",
            path.display()
        )));
    };
    let Value::Object(over) = serde_json::to_value(flags)? else {
        unreachable!("argument structs serialize to objects");
    };
    let mut merged = Map::new();
    for (k, v) in base {
        if !over.contains_key(&k) {
            return Err(CliError::Validation(format!(
                "config {}: unknown key {k:?}",
                path.display()
            )));
        }
        merged.insert(k, v);
    }
    for (k, v) in over {
        let given = !matches!(v, Value::Null | Value::Bool(false));
        if given || !merged.contains_key(&k) {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
}
