//! Layered run configuration.
//!
//! A run starts from a named preset, overlays an optional TOML file, then
//! overlays individual `key = value` settings (dotted keys reach nested
//! tables, e.g. `hyper.iterations = 50`). Tables merge key by key; any other
//! value is replaced. The merged table is deserialized into the typed config,
//! so an unknown or ill-typed key is reported by name.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{CtrConfig, SimulationConfig, Thm1Config};

/// Merges `over` into `base`, recursing into tables present in both.
pub fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

/// Sets a dotted `key` in `table`, creating intermediate tables.
pub fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::invalid("setting", format!("empty key in `{key}`")))?;
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::invalid("setting", format!("`{part}` in `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses `key=value`. The value is read as a TOML value when possible
/// (`3`, `0.5`, `inf`, `[1, 2]`, `true`) and as a bare string otherwise.
pub fn parse_setting(s: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::invalid("setting", format!("`{s}` is not key=value")))?;
    let (key, raw) = (key.trim(), raw.trim());
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

pub fn to_table(config: &impl Serialize) -> Result<toml::Table> {
    toml::Table::try_from(config).map_err(|e| Error::invalid("config", e.to_string()))
}

/// Preset, then `file`, then `settings`, deserialized into `C`.
pub fn resolve<C>(preset: &C, file: Option<&Path>, settings: &[(String, toml::Value)]) -> Result<C>
where
    C: Serialize + DeserializeOwned,
{
    let mut table = to_table(preset)?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let over: toml::Table = toml::from_str(&text).map_err(|e| Error::invalid("config file", format!("{}: {e}", path.display())))?;
        merge(&mut table, over);
    }
    for (key, value) in settings {
        set_path(&mut table, key, value.clone())?;
    }
    // round-trip through text so type errors point at the offending key
    let text = toml::to_string(&table).map_err(|e| Error::invalid("config", e.to_string()))?;
    toml::from_str(&text).map_err(|e| Error::invalid("config", e.to_string().trim_end().to_string()))
}

/// The resolved config as TOML text.
pub fn render(config: &impl Serialize) -> Result<String> {
    toml::to_string(&to_table(config)?).map_err(|e| Error::invalid("config", e.to_string()))
}

/// `fig1` is the full simulation grid with 1000 trials; `fig1-quick` is the
/// same grid with 100 trials.
pub fn simulation_preset(name: &str) -> Result<SimulationConfig> {
    match name {
        "fig1" => Ok(SimulationConfig::default()),
        "fig1-quick" => Ok(SimulationConfig {
            trials: 100,
            ..Default::default()
        }),
        other => Err(Error::invalid("preset", format!("`{other}` is not fig1 or fig1-quick"))),
    }
}

pub fn thm1_preset(name: &str) -> Result<Thm1Config> {
    match name {
        "thm1" => Ok(Thm1Config::default()),
        other => Err(Error::invalid("preset", format!("`{other}` is not thm1"))),
    }
}

/// `ctr` is the full study on 10^5 synthetic rows; `ctr-quick` uses 10^4
/// rows and 20 clusters.
pub fn ctr_preset(name: &str) -> Result<CtrConfig> {
    match name {
        "ctr" => Ok(CtrConfig::default()),
        "ctr-quick" => Ok(CtrConfig {
            n: 10_000,
            clusters: 20,
            pate_queries: 500,
            ..Default::default()
        }),
        other => Err(Error::invalid("preset", format!("`{other}` is not ctr or ctr-quick"))),
    }
}
