use std::fmt;
use std::path::Path;
use std::str::FromStr;

use galois_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

/// Starting point for a training config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Library defaults: lr 0.001, no baseline.
    Library,
    /// lr 0.02 with the mean baseline; also checks the extracted program at
    /// each evaluation.
    #[default]
    Desk,
}

impl Preset {
    pub fn config(self) -> TrainConfig {
        let base = TrainConfig::default();
        match self {
            Preset::Library => base,
            Preset::Desk => TrainConfig {
                lr: 0.02,
                baseline: true,
                program_threshold: Some(0.3),
                ..base
            },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Library => "library",
            Preset::Desk => "desk",
        })
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "library" => Ok(Preset::Library),
            "desk" => Ok(Preset::Desk),
            _ => Err(format!("unknown preset `{s}` (expected library or desk)")),
        }
    }
}

/// Layers of a training config, lowest priority first.
#[derive(Debug, Clone, Default)]
pub struct ConfigSources<'a> {
    pub preset: Option<Preset>,
    pub file: Option<&'a Path>,
    /// Values from dedicated flags such as `--task`.
    pub flags: Vec<(String, Value)>,
    /// `key.path=value` strings from `--set`.
    pub sets: &'a [String],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub preset: Preset,
    pub train: TrainConfig,
    pub task_given: bool,
}

impl ResolvedConfig {
    /// Full config as TOML, loadable with `--config`.
    pub fn to_toml(&self) -> Result<String, CliError> {
        let mut t = Table::new();
        t.insert("preset".into(), Value::String(self.preset.to_string()));
        let body = Value::try_from(&self.train).map_err(|e| CliError::Internal(e.to_string()))?;
        if let Value::Table(b) = body {
            t.extend(b);
        }
        toml::to_string_pretty(&t).map_err(|e| CliError::Internal(e.to_string()))
    }
}

fn merge(into: &mut Table, from: Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
pub fn parse_value(text: &str) -> Value {
    let doc = format!("v = {text}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or(Value::String(text.into())),
        Err(_) => Value::String(text.into()),
    }
}

fn set_path(table: &mut Table, path: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("bad override key `{path}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("`{p}` in `{path}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn resolve(src: &ConfigSources) -> Result<ResolvedConfig, CliError> {
    let mut file_table = Table::new();
    if let Some(path) = src.file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        file_table = text
            .parse::<Table>()
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    }
    let file_preset = match file_table.remove("preset") {
        Some(Value::String(s)) => Some(s.parse::<Preset>().map_err(CliError::Usage)?),
        Some(other) => return Err(CliError::Usage(format!("preset must be a string, got {other}"))),
        None => None,
    };
    let preset = src.preset.or(file_preset).unwrap_or_default();
    let mut table = match Value::try_from(preset.config()) {
        Ok(Value::Table(t)) => t,
        _ => return Err(CliError::Internal("preset does not serialize to a table".into())),
    };
    let mut task_given = file_table.contains_key("task");
    merge(&mut table, file_table);
    for (k, v) in &src.flags {
        task_given |= k == "task";
        set_path(&mut table, k, v.clone())?;
    }
    for s in src.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override `{s}` is not key=value")))?;
        let k = k.trim();
        task_given |= k == "task";
        set_path(&mut table, k, parse_value(v.trim()))?;
    }
    let train: TrainConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("invalid config: {}", e.message())))?;
    train.validate()?;
    Ok(ResolvedConfig {
        preset,
        train,
        task_given,
    })
}

/// Parses `a..b` / `a..=b` (both inclusive) or a comma list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("bad seed list `{text}` (use a..b or a,b,c)"));
    if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let v: Vec<u64> = text
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err(bad());
    }
    Ok(v)
}

/// Like [`parse_seeds`] for sizes; ranges step by 2.
pub fn parse_sizes(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("bad size list `{text}` (use a..b or a,b,c)"));
    if text.trim().is_empty() {
        return Err(CliError::Usage("empty size list".into()));
    }
    if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).step_by(2).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}
