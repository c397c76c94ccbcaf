//! Run configuration: input file paths plus stage settings.
//!
//! Relative paths in a TOML config resolve against the config file's
//! directory. A stage manifest (`*.manifest.json`) is also accepted as a
//! config; it carries the effective configuration with absolute paths.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wfsm_core::control::Strategy;
use wfsm_core::magnetics::GridSpec;
use wfsm_core::powertrain::HistogramMode;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    pub inputs: Inputs,
    #[serde(default)]
    pub drive: DriveSettings,
    #[serde(default)]
    pub efficiency_map: EfficiencyMapSettings,
    #[serde(default)]
    pub envelope: EnvelopeSettings,
    #[serde(default)]
    pub cycle: CycleSettings,
    #[serde(default)]
    pub report: ReportSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub materials: Vec<PathBuf>,
    pub design: PathBuf,
    pub ratings: PathBuf,
    pub inverter: PathBuf,
    pub gear: PathBuf,
    pub vehicle: PathBuf,
    pub cycle: PathBuf,
    #[serde(default)]
    pub economics: Option<PathBuf>,
    #[serde(default)]
    pub optimization: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSettings {
    pub strategy: Strategy,
    /// Overrides the vehicle file's ratio.
    pub gear_ratio: Option<f64>,
    /// Bus voltage; the vehicle battery voltage when absent.
    pub v_dc: Option<f64>,
    pub grid: GridSpec,
}

impl Default for DriveSettings {
    fn default() -> Self {
        DriveSettings {
            strategy: Strategy::Mtpl,
            gear_ratio: None,
            v_dc: None,
            grid: GridSpec::DEFAULT,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EfficiencyMapSettings {
    pub torque_min: f64,
    pub torque_max: f64,
    pub torque_points: usize,
    pub max_speed_rpm: f64,
    pub speed_points: usize,
}

impl Default for EfficiencyMapSettings {
    fn default() -> Self {
        EfficiencyMapSettings {
            torque_min: -300.0,
            torque_max: 600.0,
            torque_points: 19,
            max_speed_rpm: 12000.0,
            speed_points: 13,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvelopeSettings {
    pub max_speed_rpm: f64,
    pub points: usize,
}

impl Default for EnvelopeSettings {
    fn default() -> Self {
        EnvelopeSettings {
            max_speed_rpm: 16000.0,
            points: 33,
        }
    }
}

impl EnvelopeSettings {
    pub fn speeds(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n).map(|k| self.max_speed_rpm * k as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleSettings {
    /// Row name in comparison reports; the cycle file stem when absent.
    pub label: Option<String>,
    pub cruise_kmh: Vec<f64>,
    pub torque_bins: usize,
    pub speed_bins: usize,
    pub histogram: HistogramMode,
}

impl Default for CycleSettings {
    fn default() -> Self {
        CycleSettings {
            label: None,
            cruise_kmh: vec![70.0, 130.0],
            torque_bins: 10,
            speed_bins: 10,
            histogram: HistogramMode::Throughput,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSettings {
    /// Config of the machine to compare against.
    pub baseline: Option<PathBuf>,
}

/// Command-line and environment overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// A config with every input file read and hashed.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    /// Input key to (path, contents).
    pub files: BTreeMap<String, (PathBuf, String)>,
    pub hashes: BTreeMap<String, String>,
    pub config_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Deserialize)]
struct ManifestConfig {
    config: RunConfig,
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let m: ManifestConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: not a stage manifest: {e}", path.display())))?;
            return Ok(m.config);
        }
        let mut c: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let dir = std::fs::canonicalize(dir).map_err(|e| CliError::config(format!("{}: {e}", dir.display())))?;
        c.resolve_paths(&dir);
        Ok(c)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                let joined = dir.join(&*p);
                *p = std::fs::canonicalize(&joined).unwrap_or_else(|_| lexical(&joined));
            }
        };
        let i = &mut self.inputs;
        i.materials.iter_mut().for_each(fix);
        for p in [
            &mut i.design,
            &mut i.ratings,
            &mut i.inverter,
            &mut i.gear,
            &mut i.vehicle,
            &mut i.cycle,
        ] {
            fix(p);
        }
        i.economics.iter_mut().for_each(fix);
        i.optimization.iter_mut().for_each(fix);
        self.out.iter_mut().for_each(fix);
        self.report.baseline.iter_mut().for_each(fix);
    }

    fn input_paths(&self) -> Vec<(String, PathBuf)> {
        let i = &self.inputs;
        let mut v: Vec<(String, PathBuf)> = i
            .materials
            .iter()
            .enumerate()
            .map(|(k, p)| (format!("materials.{k}"), p.clone()))
            .collect();
        v.push(("design".into(), i.design.clone()));
        v.push(("ratings".into(), i.ratings.clone()));
        v.push(("inverter".into(), i.inverter.clone()));
        v.push(("gear".into(), i.gear.clone()));
        v.push(("vehicle".into(), i.vehicle.clone()));
        v.push(("cycle".into(), i.cycle.clone()));
        if let Some(p) = &i.economics {
            v.push(("economics".into(), p.clone()));
        }
        if let Some(p) = &i.optimization {
            v.push(("optimization".into(), p.clone()));
        }
        if let Some(p) = &self.report.baseline {
            v.push(("report.baseline".into(), p.clone()));
        }
        v
    }
}

/// Drops `.` and folds `..` without touching the filesystem.
fn lexical(p: &Path) -> PathBuf {
    use std::path::Component;
    let mut out = PathBuf::new();
    for c in p.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            c => out.push(c),
        }
    }
    out
}

impl Loaded {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Loaded> {
        let mut config = RunConfig::read(path)?;
        if let Some(o) = &overrides.out {
            config.out = Some(std::path::absolute(o).map_err(|e| CliError::config(format!("{}: {e}", o.display())))?);
        }
        if overrides.seed.is_some() {
            config.seed = overrides.seed;
        }
        if overrides.threads.is_some() {
            config.threads = overrides.threads;
        }
        if config.threads == Some(0) {
            return Err(CliError::config("threads must be at least 1"));
        }
        let mut files = BTreeMap::new();
        let mut hashes = BTreeMap::new();
        for (key, p) in config.input_paths() {
            let text = std::fs::read_to_string(&p)
                .map_err(|e| CliError::config(format!("input {key} ({}): {e}", p.display())))?;
            hashes.insert(key.clone(), sha256_hex(text.as_bytes()));
            files.insert(key, (p, text));
        }
        let config_hash = config_hash(&config, &hashes);
        Ok(Loaded {
            config,
            files,
            hashes,
            config_hash,
        })
    }

    pub fn text(&self, key: &str) -> Option<(&Path, &str)> {
        self.files.get(key).map(|(p, t)| (p.as_path(), t.as_str()))
    }

    pub fn required(&self, key: &str) -> Result<(&Path, &str)> {
        self.text(key)
            .ok_or_else(|| CliError::config(format!("config has no inputs.{key}")))
    }

    pub fn material_texts(&self) -> impl Iterator<Item = (&Path, &str)> {
        self.files
            .iter()
            .filter(|(k, _)| k.starts_with("materials."))
            .map(|(_, (p, t))| (p.as_path(), t.as_str()))
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        self.config
            .out
            .clone()
            .ok_or_else(|| CliError::config("no output directory (use --out, WFSM_OUT or `out` in the config)"))
    }
}

/// Hash of the settings that affect results plus the contents of every
/// input. Paths, output directory and thread count are left out.
fn config_hash(config: &RunConfig, hashes: &BTreeMap<String, String>) -> String {
    let mut v = serde_json::to_value(config).expect("config serializes");
    let obj = v.as_object_mut().expect("config is an object");
    for k in ["inputs", "out", "threads"] {
        obj.remove(k);
    }
    if let Some(r) = obj.get_mut("report").and_then(|r| r.as_object_mut()) {
        r.remove("baseline");
    }
    let doc = serde_json::json!({ "settings": v, "inputs": hashes });
    sha256_hex(doc.to_string().as_bytes())
}
