//! TOML experiment configurations with strict keys and dotted overrides.

use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::experiments::{preset, ExperimentConfig};

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_error(text: &str, err: toml::de::Error) -> Error {
    let (line, column) = err.span().map_or((0, 0), |s| line_column(text, s.start));
    Error::Parse { line, column, message: err.message().to_string() }
}

fn validated(cfg: ExperimentConfig) -> Result<ExperimentConfig> {
    let problems = cfg.violations();
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Validation(problems))
    }
}

/// Parses and validates a configuration. Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    validated(cfg)
}

/// Like [`parse_config`], with `key=value` overrides applied before validation.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    if overrides.is_empty() {
        return parse_config(text);
    }
    let mut table: Table = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    apply_overrides(&mut table, overrides)?;
    from_table(table)
}

pub fn serialize_config(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Parse { line: 0, column: 0, message: e.to_string() })
}

fn from_table(table: Table) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Parse { line: 0, column: 0, message: format!("after overrides: {}", e.message()) })?;
    validated(cfg)
}

fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Applies `a.b.c=value` overrides. `variant=V1|V2` sets the dissipation and
/// the matching heat-source variant together.
pub fn apply_overrides(table: &mut Table, overrides: &[String]) -> Result<()> {
    for ov in overrides {
        let (key, raw) = ov
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: 0, column: 0, message: format!("override `{ov}` is not of the form key=value") })?;
        let (key, raw) = (key.trim(), raw.trim());
        if key == "variant" {
            let heat = match raw {
                "V1" => "Vh1",
                "V2" => "Vh2",
                _ => return Err(Error::Parse { line: 0, column: 0, message: format!("variant must be V1 or V2 (got `{raw}`)") }),
            };
            set_path(table, "material.dissipation_variant", Value::String(raw.into()))?;
            set_path(table, "material.heat_source_variant", Value::String(heat.into()))?;
            continue;
        }
        set_path(table, key, parse_value(raw))?;
    }
    Ok(())
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Parse { line: 0, column: 0, message: format!("malformed override key `{key}`") });
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        cur = match cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new())) {
            Value::Table(t) => t,
            _ => return Err(Error::Parse { line: 0, column: 0, message: format!("override key `{key}`: `{p}` is not a section") }),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Resolves a preset name or a config file path, then applies overrides.
pub fn load_experiment(source: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    if let Some(cfg) = preset(source) {
        if overrides.is_empty() {
            return Ok(cfg);
        }
        let mut table = Table::try_from(&cfg).map_err(|e| Error::Parse { line: 0, column: 0, message: e.to_string() })?;
        apply_overrides(&mut table, overrides)?;
        return from_table(table);
    }
    let path = Path::new(source);
    if !path.is_file() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    parse_config_with(&text, overrides)
}
