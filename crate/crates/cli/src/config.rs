//! Layered configuration: built-in defaults, then a config file, then flags.
//!
//! A config file is either a JSON object or flat `key = value` lines. A
//! result envelope written by an earlier run is also accepted; its `config`
//! object is used, which is how runs are replayed.

use crate::error::{CliError, CliResult};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use std::path::Path;

pub type Table = Map<String, Value>;

pub fn load(path: &Path, command: &str) -> CliResult<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if text.trim_start().starts_with('{') {
        let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            reason: e.to_string(),
        })?;
        from_json(value, path, command)
    } else {
        parse_key_value(&text, path)
    }
}

fn from_json(value: Value, path: &Path, command: &str) -> CliResult<Table> {
    let Value::Object(mut map) = value else {
        return Err(CliError::Invalid(format!("{}: expected a JSON object", path.display())));
    };
    if map.contains_key("schema") && map.contains_key("config") {
        if let Some(Value::String(recorded)) = map.get("command") {
            if recorded != command {
                return Err(CliError::Invalid(format!(
                    "{}: envelope was written by `{recorded}`, not `{command}`",
                    path.display()
                )));
            }
        }
        return match map.remove("config") {
            Some(Value::Object(config)) => Ok(normalize(config)),
            _ => Err(CliError::Invalid(format!(
                "{}: envelope config is not an object",
                path.display()
            ))),
        };
    }
    Ok(normalize(map))
}

fn normalize(map: Table) -> Table {
    map.into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect()
}

/// `key = value` per line; `#` starts a comment line. Values are read as
/// JSON where possible, comma-separated lists become arrays, anything else
/// is a string.
pub fn parse_key_value(text: &str, path: &Path) -> CliResult<Table> {
    let mut table = Table::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: k as u64 + 1,
                reason: format!("expected `key = value`, found `{line}`"),
            });
        };
        table.insert(key.trim().replace('-', "_"), parse_value(value.trim()));
    }
    Ok(table)
}

fn parse_value(s: &str) -> Value {
    if let Ok(v) = serde_json::from_str(s) {
        return v;
    }
    if s.contains(',') {
        return Value::Array(s.split(',').map(|x| parse_scalar(x.trim())).collect());
    }
    parse_scalar(s)
}

fn parse_scalar(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.trim_matches('"').to_string()))
}

/// Defaults of `C`, overlaid by `file` and then by the flags that were
/// given. Unknown keys are rejected.
pub fn resolve<C>(file: Option<Table>, flags: &impl Serialize) -> CliResult<C>
where
    C: Default + Serialize + DeserializeOwned,
{
    let Value::Object(mut merged) = to_value(&C::default())? else {
        unreachable!("configs serialize as objects");
    };
    let Value::Object(given) = to_value(flags)? else {
        unreachable!("flags serialize as objects");
    };
    for layer in file.into_iter().chain(std::iter::once(given)) {
        for (key, value) in layer {
            if !merged.contains_key(&key) {
                let known: Vec<&str> = merged.keys().map(String::as_str).collect();
                return Err(CliError::Invalid(format!(
                    "unknown key `{key}` (expected one of: {})",
                    known.join(", ")
                )));
            }
            merged.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Invalid(e.to_string()))
}

fn to_value(v: &impl Serialize) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::Invalid(e.to_string()))
}
