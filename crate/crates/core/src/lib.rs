//! Design models for wound-field synchronous traction machines: materials,
//! magnetic equivalent circuits, losses, control, drive-cycle energy and
//! multi-objective optimization.

pub mod control;
pub mod data;
pub mod losses;
pub mod magnetics;
pub mod materials;
pub mod optimize;
pub mod powertrain;

pub use control::{mtpa_solve, mtpl_solve, peak_envelope, ControlSolution, Drive, Strategy};
pub use losses::{GearParams, InverterParams, LossBreakdown, LossConfig};
pub use magnetics::{FluxLinkageMap, GridSpec, MachineDesign, MachineRatings, Topology};
pub use materials::{MaterialKind, MaterialSpec, SurrogateGradeLibrary};
pub use optimize::{
    evaluate_candidate, nsga2_run, pareto_front, run_optimization, select_best, tbv_score, ConstraintSpec,
    DesignVariables, Economics, EvaluatedCandidate, OptimizationConfig,
};
pub use powertrain::{
    cruise_efficiency, demand_trace, energy_histogram, run_cycle, CycleResult, DriveCycle, Edu, EnergyHistogram,
    HistogramMode, VehicleParams,
};
