//! Shared setup for the criterion benches.

use wfsm_core::control::Drive;
use wfsm_core::magnetics::{build_flux_map, GridSpec};
use wfsm_core::{data, LossConfig};

/// Shipped design `key` with its ratings and the SiC inverter.
pub fn drive(key: &str, grid: GridSpec) -> Drive {
    let ratings = data::ratings(if key == "pmsm" { "pmsm" } else { "wfsm" });
    let design = data::design(key);
    let map = build_flux_map(&design, &ratings, grid).expect("shipped design maps");
    Drive::new(&design, map, ratings, LossConfig::default()).with_inverter(data::inverter("sic"))
}
