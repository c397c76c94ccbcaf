//! Output directory handling: a lock file against concurrent runs, a staging
//! directory that is renamed into place only when a stage succeeds, and the
//! per-stage manifest.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::{sha256_hex, Loaded, RunConfig};
use crate::error::{CliError, Kind, Result};

const LOCK_NAME: &str = ".wfsm.lock";

pub struct OutputDir {
    dir: PathBuf,
    lock: PathBuf,
    staging: PathBuf,
    config_hash: String,
    written: BTreeMap<String, String>,
    committed: bool,
}

impl OutputDir {
    pub fn open(dir: &Path, slug: &str, config_hash: &str) -> Result<OutputDir> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let lock = dir.join(LOCK_NAME);
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    CliError::new(
                        Kind::Io,
                        format!(
                            "{} is in use by another run (remove {} if it is stale)",
                            dir.display(),
                            lock.display()
                        ),
                    )
                } else {
                    CliError::io(&lock, e)
                }
            })?;
        let _ = writeln!(f, "{}", std::process::id());
        let out = OutputDir {
            dir: dir.to_path_buf(),
            lock,
            staging: dir.join(format!(".staging-{slug}")),
            config_hash: config_hash.to_string(),
            written: BTreeMap::new(),
            committed: false,
        };
        if out.staging.exists() {
            fs::remove_dir_all(&out.staging).map_err(|e| CliError::io(&out.staging, e))?;
        }
        fs::create_dir(&out.staging).map_err(|e| CliError::io(&out.staging, e))?;
        Ok(out)
    }

    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        let p = self.staging.join(name);
        fs::write(&p, contents).map_err(|e| CliError::io(&p, e))?;
        self.written.insert(name.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }

    /// CSV with a leading `# config_sha256=` comment line.
    pub fn csv(&mut self, name: &str, body: &str) -> Result<()> {
        let text = format!("# config_sha256={}\n{body}", self.config_hash);
        self.put(name, &text)
    }

    /// JSON object with a `config_sha256` member added.
    pub fn json(&mut self, name: &str, body: &str) -> Result<()> {
        let mut v: serde_json::Value = serde_json::from_str(body).expect("stage output is JSON");
        if let Some(obj) = v.as_object_mut() {
            obj.insert("config_sha256".into(), self.config_hash.clone().into());
        } else {
            v = serde_json::json!({ "config_sha256": self.config_hash, "data": v });
        }
        self.put(name, &(serde_json::to_string_pretty(&v).expect("json") + "\n"))
    }

    pub fn commit(mut self, stage: &str, loaded: &Loaded, seed: Option<u64>, started: u64) -> Result<Vec<PathBuf>> {
        let manifest = Manifest {
            tool: "wfsm",
            version: env!("CARGO_PKG_VERSION"),
            stage,
            config_sha256: &loaded.config_hash,
            seed,
            threads: rayon::current_num_threads(),
            inputs: loaded
                .files
                .iter()
                .map(|(k, (p, _))| {
                    (
                        k.as_str(),
                        InputRecord {
                            path: p.display().to_string(),
                            sha256: &loaded.hashes[k],
                        },
                    )
                })
                .collect(),
            outputs: self.written.clone(),
            config: &loaded.config,
            started_unix: started,
            finished_unix: unix_now(),
        };
        let slug = stage.replace(' ', "_");
        let name = format!("{slug}.manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        let p = self.staging.join(&name);
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;

        let mut names: Vec<String> = self.written.keys().cloned().collect();
        names.push(name);
        let mut placed = Vec::new();
        for n in names {
            let (from, to) = (self.staging.join(&n), self.dir.join(&n));
            fs::rename(&from, &to).map_err(|e| CliError::io(&to, e))?;
            placed.push(to);
        }
        self.committed = true;
        let _ = fs::remove_dir_all(&self.staging);
        Ok(placed)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
        let _ = fs::remove_file(&self.lock);
    }
}

#[derive(Serialize)]
struct InputRecord<'a> {
    path: String,
    sha256: &'a str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    stage: &'a str,
    config_sha256: &'a str,
    seed: Option<u64>,
    threads: usize,
    inputs: BTreeMap<&'a str, InputRecord<'a>>,
    outputs: BTreeMap<String, String>,
    /// Effective configuration; pass this file back as `--config` to rerun.
    config: &'a RunConfig,
    started_unix: u64,
    finished_unix: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
