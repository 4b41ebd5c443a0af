//! TOML configuration with dotted-key overrides.

use std::path::Path;

use serde::de::DeserializeOwned;
use toml::{Table, Value};

use crate::CliError;

/// Reads `path` (or starts from an empty table) and applies `key.path=value`
/// overrides. Values are parsed as TOML and fall back to plain strings.
pub fn load_table(path: Option<&Path>, overrides: &[String]) -> Result<Table, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            text.parse::<Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for o in overrides {
        let (key, raw) =
            o.split_once('=').ok_or_else(|| CliError::Config(format!("override {o:?} is not key=value")))?;
        set_path(&mut table, key.trim(), parse_value(raw.trim()))?;
    }
    Ok(table)
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key {key:?}")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| CliError::Config(format!("{key}: {part} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Removes and returns a top-level key that the target type does not know.
pub fn take<T: DeserializeOwned>(table: &mut Table, key: &str) -> Result<Option<T>, CliError> {
    table.remove(key).map(|v| v.try_into().map_err(|e| CliError::Config(format!("{key}: {e}")))).transpose()
}

pub fn parse<T: DeserializeOwned>(table: Table) -> Result<T, CliError> {
    Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))
}
