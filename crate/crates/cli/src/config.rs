//! TOML configuration files. A table named after the command path (for example
//! `[optimize]` or `[spectrum.gen.fv-advection]`) overrides the matching flags.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub fn load(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    text.parse::<toml::Table>().with_context(|| format!("parsing config {}", path.display()))
}

/// Applies the config section at `command_path` on top of the parsed flags and
/// returns the merged arguments together with their JSON snapshot.
pub fn overlay<T>(args: T, config: Option<&toml::Table>, command_path: &[&str]) -> Result<(T, Value)>
where
    T: Serialize + DeserializeOwned,
{
    let mut merged = serde_json::to_value(&args)?;
    let Some(mut table) = config else {
        return Ok((args, merged));
    };
    for key in command_path {
        match table.get(*key) {
            Some(toml::Value::Table(t)) => table = t,
            Some(_) => bail!("config entry '{key}' must be a table"),
            None => return Ok((args, merged)),
        }
    }
    let fields = merged.as_object_mut().ok_or_else(|| anyhow!("arguments are not a record"))?;
    for (key, value) in table {
        if value.is_table() {
            continue;
        }
        let name = key.replace('-', "_");
        if !fields.contains_key(&name) {
            bail!("unknown config key '{key}' for command '{}'", command_path.join(" "));
        }
        fields.insert(name, serde_json::to_value(value)?);
    }
    let out: T = serde_json::from_value(merged.clone())
        .with_context(|| format!("invalid config values for '{}'", command_path.join(" ")))?;
    Ok((out, merged))
}
