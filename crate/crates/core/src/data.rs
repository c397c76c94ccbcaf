//! Data files compiled into the library.

use crate::losses::{GearParams, InverterParams};
use crate::magnetics::{DesignFile, MachineDesign, MachineRatings};
use crate::materials::SurrogateGradeLibrary;
use crate::optimize::{Economics, OptimizationConfig};
use crate::powertrain::{DriveCycle, VehicleParams};

pub const MATERIAL_FILES: &[(&str, &str)] = &[
    ("no25", include_str!("../../../data/materials/no25.toml")),
    ("no35", include_str!("../../../data/materials/no35.toml")),
    ("smc_a", include_str!("../../../data/materials/smc_a.toml")),
    ("smc_b", include_str!("../../../data/materials/smc_b.toml")),
    ("smc_c", include_str!("../../../data/materials/smc_c.toml")),
];

pub const MACHINE_FILES: &[(&str, &str)] = &[
    ("wfsm_m0", include_str!("../../../data/machines/wfsm_m0.toml")),
    ("wfsm_m6", include_str!("../../../data/machines/wfsm_m6.toml")),
    ("pmsm", include_str!("../../../data/machines/pmsm.toml")),
];

pub const RATINGS_FILES: &[(&str, &str)] = &[
    ("wfsm", include_str!("../../../data/machines/ratings_wfsm.toml")),
    ("pmsm", include_str!("../../../data/machines/ratings_pmsm.toml")),
];

pub const INVERTER_FILES: &[(&str, &str)] = &[("sic", include_str!("../../../data/devices/sic.toml"))];

pub const GEAR_FILES: &[(&str, &str)] = &[
    ("single_stage", include_str!("../../../data/gears/single_stage.toml")),
    ("two_stage", include_str!("../../../data/gears/two_stage.toml")),
];

pub const VEHICLE_FILES: &[(&str, &str)] = &[("sedan", include_str!("../../../data/vehicles/sedan.toml"))];

pub const ECONOMICS_FILES: &[(&str, &str)] = &[("default", include_str!("../../../data/economics/default.toml"))];

pub const OPTIMIZATION_FILES: &[(&str, &str)] = &[("wfsm_smc", include_str!("../../../data/optimize/wfsm_smc.toml"))];

/// Synthetic four-phase urban-to-motorway trace with class-3 phase lengths and peak speeds.
pub const CYCLE_FILES: &[(&str, &str)] = &[(
    "synthetic_class3",
    include_str!("../../../data/cycles/synthetic_class3.csv"),
)];

fn lookup(files: &[(&'static str, &'static str)], key: &str) -> Option<&'static str> {
    files.iter().find(|(k, _)| *k == key).map(|(_, t)| *t)
}

/// Shipped design file by key (`wfsm_m0`, `wfsm_m6`, `pmsm`).
pub fn design_file(key: &str) -> Option<DesignFile> {
    lookup(MACHINE_FILES, key).map(|t| DesignFile::from_toml(t).expect("shipped design parses"))
}

/// Shipped design resolved against the shipped material library.
///
/// Panics on an unknown key.
pub fn design(key: &str) -> MachineDesign {
    design_file(key)
        .unwrap_or_else(|| panic!("no shipped design {key}"))
        .resolve(&SurrogateGradeLibrary::shipped())
        .expect("shipped design resolves")
}

pub fn ratings(key: &str) -> MachineRatings {
    MachineRatings::from_toml(lookup(RATINGS_FILES, key).unwrap_or_else(|| panic!("no ratings {key}")))
        .expect("shipped ratings parse")
}

pub fn inverter(key: &str) -> InverterParams {
    InverterParams::from_toml(lookup(INVERTER_FILES, key).unwrap_or_else(|| panic!("no inverter {key}")))
        .expect("shipped inverter parses")
}

pub fn gear(key: &str) -> GearParams {
    GearParams::from_toml(lookup(GEAR_FILES, key).unwrap_or_else(|| panic!("no gear {key}")))
        .expect("shipped gear parses")
}

pub fn vehicle_text(key: &str) -> Option<&'static str> {
    lookup(VEHICLE_FILES, key)
}

pub fn vehicle(key: &str) -> VehicleParams {
    VehicleParams::from_toml(vehicle_text(key).unwrap_or_else(|| panic!("no vehicle {key}")))
        .expect("shipped vehicle parses")
}

pub fn cycle(key: &str) -> DriveCycle {
    DriveCycle::from_csv(lookup(CYCLE_FILES, key).unwrap_or_else(|| panic!("no cycle {key}")))
        .expect("shipped cycle parses")
}

pub fn economics(key: &str) -> Economics {
    Economics::from_toml(lookup(ECONOMICS_FILES, key).unwrap_or_else(|| panic!("no economics {key}")))
        .expect("shipped economics parse")
}

pub fn optimization(key: &str) -> OptimizationConfig {
    OptimizationConfig::from_toml(
        lookup(OPTIMIZATION_FILES, key).unwrap_or_else(|| panic!("no optimization config {key}")),
    )
    .expect("shipped optimization config parses")
}
