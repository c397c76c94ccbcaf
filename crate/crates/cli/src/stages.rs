use std::path::{Path, PathBuf};

use wfsm_core::control::{build_efficiency_map, Drive, MapGrid, Strategy};
use wfsm_core::losses::{GearParams, InverterParams, LossConfig};
use wfsm_core::magnetics::{build_flux_map, DesignFile, MachineDesign, MachineRatings};
use wfsm_core::materials::{MaterialSpec, SurrogateGradeLibrary};
use wfsm_core::optimize::{
    archive_csv, evaluate_candidate, finalists_csv, run_optimization, ConstraintSpec, DesignVariables, Economics,
    EduContext, EvaluationSettings, OptimizationConfig,
};
use wfsm_core::powertrain::{
    cruise_efficiency, demand_trace, energy_histogram, run_cycle, CycleResult, DriveCycle, Edu, VehicleParams,
};
use wfsm_core::{data, peak_envelope};

use crate::config::{Loaded, Overrides};
use crate::error::{CliError, Kind, Result};
use crate::output::{unix_now, OutputDir};

fn toml_checked<'a>(path: &Path, text: &'a str) -> Result<&'a str> {
    text.parse::<toml::Table>()
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok(text)
}

fn at<T, E: Into<CliError>>(path: &Path, r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| e.into().context(path.display()))
}

/// Typed inputs of one config.
pub struct Session<'a> {
    pub loaded: &'a Loaded,
}

impl<'a> Session<'a> {
    pub fn library(&self) -> Result<SurrogateGradeLibrary> {
        let mut texts = self.loaded.material_texts().peekable();
        if texts.peek().is_none() {
            return Ok(SurrogateGradeLibrary::shipped());
        }
        let mut lib = SurrogateGradeLibrary {
            grades: Default::default(),
        };
        for (p, t) in texts {
            lib.insert(at(p, MaterialSpec::from_toml(toml_checked(p, t)?))?);
        }
        Ok(lib)
    }

    pub fn design(&self) -> Result<MachineDesign> {
        let (p, t) = self.loaded.required("design")?;
        let file = at(p, DesignFile::from_toml(toml_checked(p, t)?))?;
        at(p, file.resolve(&self.library()?))
    }

    pub fn ratings(&self) -> Result<MachineRatings> {
        let (p, t) = self.loaded.required("ratings")?;
        at(p, MachineRatings::from_toml(toml_checked(p, t)?))
    }

    pub fn inverter(&self) -> Result<InverterParams> {
        let (p, t) = self.loaded.required("inverter")?;
        at(p, InverterParams::from_toml(toml_checked(p, t)?))
    }

    pub fn gear(&self) -> Result<GearParams> {
        let (p, t) = self.loaded.required("gear")?;
        at(p, GearParams::from_toml(toml_checked(p, t)?))
    }

    pub fn vehicle(&self) -> Result<VehicleParams> {
        let (p, t) = self.loaded.required("vehicle")?;
        let v = at(p, VehicleParams::from_toml(toml_checked(p, t)?))?;
        Ok(match self.loaded.config.drive.gear_ratio {
            Some(r) => v.with_gear_ratio(r),
            None => v,
        })
    }

    pub fn cycle(&self) -> Result<DriveCycle> {
        let (p, t) = self.loaded.required("cycle")?;
        at(p, DriveCycle::from_csv(t))
    }

    pub fn economics(&self) -> Result<Economics> {
        let (p, t) = self.loaded.required("economics")?;
        at(p, Economics::from_toml(toml_checked(p, t)?))
    }

    pub fn optimization(&self) -> Result<OptimizationConfig> {
        let (p, t) = self.loaded.required("optimization")?;
        let mut c = at(p, OptimizationConfig::from_toml(toml_checked(p, t)?))?;
        if let Some(seed) = self.loaded.config.seed {
            c.ga.seed = seed;
        }
        Ok(c)
    }

    pub fn v_dc(&self) -> Result<f64> {
        match self.loaded.config.drive.v_dc {
            Some(v) => Ok(v),
            None => Ok(self.vehicle()?.battery_voltage),
        }
    }

    pub fn drive(&self) -> Result<Drive> {
        let design = self.design()?;
        let ratings = self.ratings()?;
        let map = build_flux_map(&design, &ratings, self.loaded.config.drive.grid)?;
        Ok(Drive::new(&design, map, ratings, LossConfig::default()).with_inverter(self.inverter()?))
    }

    pub fn edu(&self) -> Result<Edu> {
        Ok(Edu {
            name: self.loaded.config.name.clone(),
            drive: self.drive()?,
            strategy: self.loaded.config.drive.strategy,
            gear: self.gear()?,
            v_dc: self.v_dc()?,
        })
    }

    fn cycle_label(&self) -> String {
        self.loaded.config.cycle.label.clone().unwrap_or_else(|| {
            self.loaded
                .config
                .inputs
                .cycle
                .file_stem()
                .map_or("cycle".into(), |s| s.to_string_lossy().into_owned())
        })
    }
}

/// Runs `body` with the output directory locked and staged.
fn staged(
    loaded: &Loaded,
    stage: &str,
    seed: Option<u64>,
    body: impl FnOnce(&mut OutputDir) -> Result<()>,
) -> Result<Vec<PathBuf>> {
    let started = unix_now();
    let dir = loaded.out_dir()?;
    let mut out = OutputDir::open(&dir, &stage.replace(' ', "_"), &loaded.config_hash)?;
    body(&mut out)?;
    out.commit(stage, loaded, seed, started)
}

pub struct MaterialReport {
    pub lines: Vec<String>,
    pub failure: Option<Kind>,
}

/// Validates material files; with none given, the shipped grades.
pub fn materials_validate(files: &[(PathBuf, String)]) -> MaterialReport {
    let shipped: Vec<(PathBuf, String)>;
    let files = if files.is_empty() {
        shipped = data::MATERIAL_FILES
            .iter()
            .map(|(k, t)| (PathBuf::from(format!("<shipped {k}>")), t.to_string()))
            .collect();
        &shipped
    } else {
        files
    };
    let mut lines = Vec::new();
    let mut failure = None;
    for (p, t) in files {
        let r = toml_checked(p, t).and_then(|t| MaterialSpec::from_toml(t).map_err(CliError::from));
        match r {
            Ok(m) => lines.push(format!("PASS {} ({}, {:?})", p.display(), m.name, m.kind)),
            Err(e) => {
                lines.push(format!("FAIL {}: {}", p.display(), e.message));
                failure = Some(match (failure, e.kind) {
                    (Some(Kind::Validation), _) | (_, Kind::Validation) => Kind::Validation,
                    (_, k) => k,
                });
            }
        }
    }
    MaterialReport { lines, failure }
}

pub fn map_build(loaded: &Loaded) -> Result<Vec<PathBuf>> {
    let s = Session { loaded };
    staged(loaded, "map build", loaded.config.seed, |out| {
        let map = build_flux_map(&s.design()?, &s.ratings()?, loaded.config.drive.grid)?;
        out.json("flux_map.json", &map.to_json())
    })
}

pub fn control_map(loaded: &Loaded, strategy: Strategy) -> Result<Vec<PathBuf>> {
    let s = Session { loaded };
    staged(loaded, "control mtpl", loaded.config.seed, |out| {
        let m = &loaded.config.efficiency_map;
        let grid = MapGrid::uniform(
            m.torque_min,
            m.torque_max,
            m.torque_points,
            m.max_speed_rpm,
            m.speed_points,
        );
        let map = build_efficiency_map(&s.drive()?, strategy, &grid, s.v_dc()?);
        out.csv("efficiency_map.csv", &map.to_csv())
    })
}

pub fn control_envelope(loaded: &Loaded) -> Result<Vec<PathBuf>> {
    let s = Session { loaded };
    staged(loaded, "control envelope", loaded.config.seed, |out| {
        let env = peak_envelope(&s.drive()?, s.v_dc()?, &loaded.config.envelope.speeds());
        out.csv("envelope.csv", &env.to_csv())
    })
}

fn run_edu_cycle(s: &Session, edu: &Edu) -> Result<CycleResult> {
    let vehicle = s.vehicle()?;
    let cycle = s.cycle()?;
    Ok(run_cycle(&demand_trace(&cycle, &vehicle), edu, &vehicle)?)
}

fn cruise_rows(s: &Session, edu: &Edu, speeds: &[f64]) -> Result<Vec<f64>> {
    let vehicle = s.vehicle()?;
    speeds
        .iter()
        .map(|&v| cruise_efficiency(v, &vehicle, edu).map_err(CliError::from))
        .collect()
}

pub fn cycle_run(loaded: &Loaded) -> Result<Vec<PathBuf>> {
    let s = Session { loaded };
    let c = &loaded.config.cycle;
    staged(loaded, "cycle run", loaded.config.seed, |out| {
        let edu = s.edu()?;
        let r = run_edu_cycle(&s, &edu)?;
        let h = energy_histogram(&r, c.torque_bins, c.speed_bins, c.histogram);
        let mut cruise = String::from("speed_kmh,edu_efficiency\n");
        for (v, eta) in c.cruise_kmh.iter().zip(cruise_rows(&s, &edu, &c.cruise_kmh)?) {
            cruise.push_str(&format!("{v},{eta}\n"));
        }
        out.csv("cycle_trace.csv", &r.trace_csv())?;
        out.json("cycle_summary.json", &r.summary_json())?;
        out.csv("histogram.csv", &h.to_csv())?;
        out.csv("cruise.csv", &cruise)
    })
}

pub fn optimize_run(loaded: &Loaded) -> Result<Vec<PathBuf>> {
    let s = Session { loaded };
    let config = s.optimization()?;
    staged(loaded, "optimize run", Some(config.ga.seed), |out| {
        let base = s.design()?;
        let ratings = s.ratings()?;
        let ctx = EduContext {
            inverter: s.inverter()?,
            gear: s.gear()?,
            vehicle: s.vehicle()?,
            cycle: s.cycle()?,
            strategy: loaded.config.drive.strategy,
        };
        let o = run_optimization(&base, &ratings, &config, &ctx, &s.economics()?)?;
        let front: Vec<_> = o.front.iter().map(|&i| o.ga.archive[i].clone()).collect();
        out.csv("archive.csv", &archive_csv(&o.ga.archive))?;
        out.csv("front.csv", &archive_csv(&front))?;
        out.csv("finalists.csv", &finalists_csv(&o.finalists, o.selected))?;
        if let Some(best) = o.selected_candidate() {
            out.json(
                "selected.json",
                &serde_json::to_string(best).expect("candidate serializes"),
            )?;
        }
        Ok(())
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

struct Side {
    name: String,
    peak_torque: f64,
    peak_power: f64,
    op: [f64; 2],
    cycle: f64,
    cruise: Vec<f64>,
    histogram: String,
}

fn report_side(s: &Session, settings: &EvaluationSettings, spec: &ConstraintSpec, primary: &Loaded) -> Result<Side> {
    let design = s.design()?;
    let ratings = s.ratings()?;
    let grid = s.loaded.config.drive.grid;
    let bench = evaluate_candidate(&DesignVariables::of(&design), &design, &ratings, spec, settings, grid);
    if let Some(f) = bench.failure {
        return Err(CliError::new(Kind::Validation, f).context(&s.loaded.config.name));
    }
    let edu = s.edu()?;
    let r = run_edu_cycle(s, &edu)?;
    let c = &primary.config.cycle;
    Ok(Side {
        name: s.loaded.config.name.clone(),
        peak_torque: bench.peak_torque,
        peak_power: bench.peak_power,
        op: bench.objectives,
        cycle: r
            .edu_efficiency
            .ok_or_else(|| CliError::new(Kind::InfeasibleCycle, "cycle moves no energy"))?,
        cruise: cruise_rows(s, &edu, &c.cruise_kmh)?,
        histogram: energy_histogram(&r, c.torque_bins, c.speed_bins, c.histogram).to_csv(),
    })
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

/// Benchmark and EDU comparison of the config's machine against its baseline.
pub fn report_compare(loaded: &Loaded) -> Result<Vec<PathBuf>> {
    let s = Session { loaded };
    let Some(base_path) = loaded.config.report.baseline.clone() else {
        return Err(CliError::config("report compare needs `report.baseline`"));
    };
    let baseline = Loaded::load(&base_path, &Overrides::default()).map_err(|e| e.context("baseline"))?;
    let (settings, spec) = match loaded.text("optimization") {
        Some(_) => {
            let c = s.optimization()?;
            (c.evaluation.clone(), c.constraint_spec())
        }
        None => (EvaluationSettings::default(), ConstraintSpec::benchmark()),
    };
    staged(loaded, "report compare", loaded.config.seed, |out| {
        let b = report_side(&Session { loaded: &baseline }, &settings, &spec, loaded)?;
        let p = report_side(&s, &settings, &spec, loaded)?;

        let mut bench = String::from("motor,peak_torque_nm,peak_power_kw,op1_efficiency,op2_efficiency\n");
        for side in [&b, &p] {
            bench.push_str(&format!(
                "{},{},{},{},{}\n",
                csv_field(&side.name),
                side.peak_torque,
                side.peak_power / 1e3,
                side.op[0],
                side.op[1]
            ));
        }
        let mut edu = format!("characteristic,{},{}\n", csv_field(&b.name), csv_field(&p.name));
        edu.push_str(&format!(
            "{} efficiency,{},{}\n",
            csv_field(&s.cycle_label()),
            b.cycle,
            p.cycle
        ));
        for (k, v) in loaded.config.cycle.cruise_kmh.iter().enumerate() {
            edu.push_str(&format!("{v} km/h efficiency,{},{}\n", b.cruise[k], p.cruise[k]));
        }
        out.csv("benchmark.csv", &bench)?;
        out.csv("edu_comparison.csv", &edu)?;
        out.csv(&format!("histogram_{}.csv", slug(&b.name)), &b.histogram)?;
        out.csv(&format!("histogram_{}.csv", slug(&p.name)), &p.histogram)
    })
}
