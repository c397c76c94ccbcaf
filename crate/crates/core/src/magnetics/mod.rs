//! Machine geometry and the magnetic-equivalent-circuit surrogate.

pub mod design;
pub mod fluxmap;
pub mod network;
pub mod solver;

pub use design::{DesignError, DesignFile, Geometry, MachineDesign, MachineRatings, ToothTip, Topology};
pub use fluxmap::{
    build_flux_map, steady_voltage, torque, voltage_feasible, DqVoltage, FluxLinkageMap, GridSpec, MapError, MapSample,
    DEFAULT_MODULATION_LIMIT,
};
pub use network::{build_reluctance_network, Excitation, ReluctanceNetwork};
pub use solver::{solve_network, NetworkSolution, SolveError};
