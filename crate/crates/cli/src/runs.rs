use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const RUN_DIR_ENV: &str = "GALOIS_RUN_DIR";

/// Output root: `--out-root`, else `$GALOIS_RUN_DIR`, else `./runs`.
pub fn output_root(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(RUN_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("runs"),
    }
}

/// A fresh directory `root/name`, suffixed `-2`, `-3`, ... if taken.
pub fn fresh_dir(root: &Path, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(root)?;
    let mut n = 1;
    loop {
        let p = if n == 1 { root.join(name) } else { root.join(format!("{name}-{n}")) };
        match fs::create_dir(&p) {
            Ok(()) => return Ok(p),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => n += 1,
            Err(e) => return Err(e.into()),
        }
    }
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn stamp_for_name() -> String {
    chrono::Utc::now().format("%Y%m%dT%H%M%S").to_string()
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub started: String,
    pub finished: Option<String>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Artifact name -> path relative to the run directory.
    pub artifacts: BTreeMap<String, String>,
}

/// A run directory with its manifest.
#[derive(Debug)]
pub struct Run {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl Run {
    pub fn start(dir: PathBuf, command: &str, argv: &[String], seed: Option<u64>, config: serde_json::Value) -> Result<Self, CliError> {
        fs::create_dir_all(&dir)?;
        let run = Run {
            dir,
            manifest: RunManifest {
                command: command.into(),
                argv: argv.to_vec(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed,
                config,
                started: timestamp(),
                finished: None,
                status: RunStatus::Running,
                error: None,
                artifacts: BTreeMap::new(),
            },
        };
        run.save()?;
        Ok(run)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Records an artifact; it must exist when the run is finalized.
    pub fn artifact(&mut self, key: &str, file: &str) {
        self.manifest.artifacts.insert(key.into(), file.into());
    }

    pub fn save(&self) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(&self.manifest)?;
        write_atomic(&self.dir.join("manifest.json"), text.as_bytes())
    }

    pub fn finish(&mut self, outcome: &Result<(), CliError>) -> Result<(), CliError> {
        self.manifest.finished = Some(timestamp());
        match outcome {
            Ok(()) => {
                let missing: Vec<&String> = self
                    .manifest
                    .artifacts
                    .values()
                    .filter(|f| !self.dir.join(f).exists())
                    .collect();
                if !missing.is_empty() {
                    self.manifest.status = RunStatus::Failed;
                    self.manifest.error = Some(format!("missing artifacts: {missing:?}"));
                    self.save()?;
                    return Err(CliError::Internal(format!("missing artifacts {missing:?}")));
                }
                self.manifest.status = RunStatus::Ok;
            }
            Err(e) => {
                self.manifest.status = RunStatus::Failed;
                self.manifest.error = Some(e.to_string());
            }
        }
        self.save()
    }
}

/// One tidy row: a single metric value.
#[derive(Debug, Serialize)]
struct TidyRow<'a> {
    run: &'a str,
    seed: u64,
    kind: &'a str,
    episode: usize,
    metric: &'a str,
    value: f64,
}

/// JSON lines plus a long-format CSV of the same numbers.
pub struct MetricsWriter {
    jsonl: BufWriter<File>,
    csv: csv::Writer<File>,
    run: String,
    seed: u64,
}

impl MetricsWriter {
    pub fn create(dir: &Path, run: &str, seed: u64) -> Result<Self, CliError> {
        Ok(MetricsWriter {
            jsonl: BufWriter::new(File::create(dir.join("metrics.jsonl"))?),
            csv: csv::Writer::from_path(dir.join("metrics.csv"))?,
            run: run.into(),
            seed,
        })
    }

    /// Writes `record` (a JSON object) tagged with `kind`.
    pub fn write(&mut self, kind: &str, episode: usize, record: &impl Serialize) -> Result<(), CliError> {
        let mut v = serde_json::to_value(record)?;
        if let Some(o) = v.as_object_mut() {
            o.insert("kind".into(), kind.into());
            o.insert("seed".into(), self.seed.into());
        }
        serde_json::to_writer(&mut self.jsonl, &v)?;
        self.jsonl.write_all(b"\n")?;
        if let Some(o) = v.as_object() {
            for (k, x) in o {
                let value = match x {
                    serde_json::Value::Number(n) => n.as_f64(),
                    serde_json::Value::Bool(b) => Some(*b as u8 as f64),
                    _ => None,
                };
                if let Some(value) = value {
                    if k == "episode" || k == "seed" {
                        continue;
                    }
                    self.csv.serialize(TidyRow {
                        run: &self.run,
                        seed: self.seed,
                        kind,
                        episode,
                        metric: k,
                        value,
                    })?;
                }
            }
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), CliError> {
        self.jsonl.flush()?;
        self.csv.flush()?;
        Ok(())
    }
}
