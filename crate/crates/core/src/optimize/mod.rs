//! Stator dimension optimization: weighted constraints, candidate
//! evaluation on a coarse flux map, NSGA-II search, fine re-evaluation of
//! the front and business-value selection.

pub mod nsga2;
pub mod pareto;
pub mod tbv;

pub use nsga2::{nsga2_run, BenchmarkProblem, GaConfig, GaResult, Member, Problem, Scored};
pub use pareto::{dominates, hypervolume, pareto_front};
pub use tbv::{tbv_score, Economics, TbvBreakdown, TbvInputs};

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ControlError, ControlSolution, Drive, Strategy};
use crate::losses::{GearParams, InverterParams, LossConfig};
use crate::magnetics::{build_flux_map, GridSpec, MachineDesign, MachineRatings, Topology};
use crate::materials::MaterialKind;
use crate::powertrain::{demand_trace, run_cycle, DriveCycle, Edu, VehicleParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("config: {0}")]
    Config(String),
    #[error("no feasible candidate in the archive")]
    AllInfeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Op1Torque,
    Op1Efficiency,
    Op2Torque,
    Op2Efficiency,
    PeakTorque,
    PeakPower,
    DcVoltage,
}

impl Quantity {
    pub const ALL: [Quantity; 7] = [
        Quantity::Op1Torque,
        Quantity::Op1Efficiency,
        Quantity::Op2Torque,
        Quantity::Op2Efficiency,
        Quantity::PeakTorque,
        Quantity::PeakPower,
        Quantity::DcVoltage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Op1Torque => "op1_torque",
            Quantity::Op1Efficiency => "op1_efficiency",
            Quantity::Op2Torque => "op2_torque",
            Quantity::Op2Efficiency => "op2_efficiency",
            Quantity::PeakTorque => "peak_torque",
            Quantity::PeakPower => "peak_power",
            Quantity::DcVoltage => "dc_voltage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    LowerBound,
    UpperBound,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraint {
    pub quantity: Quantity,
    pub kind: ConstraintKind,
    #[serde(default)]
    pub threshold: Option<f64>,
    pub weight: u32,
}

impl Constraint {
    /// Relative amount by which `value` misses the threshold; zero when met
    /// and for objectives.
    pub fn relative_violation(&self, value: f64) -> f64 {
        match (self.kind, self.threshold) {
            (ConstraintKind::LowerBound, Some(t)) if value <= t => (t - value) / t.abs(),
            (ConstraintKind::UpperBound, Some(t)) if value >= t => (value - t) / t.abs(),
            _ => 0.0,
        }
    }
}

/// Hard limits and objectives with integer weights 1-10.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec(pub Vec<Constraint>);

impl ConstraintSpec {
    /// The weighted benchmark set (SI units: N·m, W, V).
    pub fn benchmark() -> Self {
        use ConstraintKind::*;
        use Quantity::*;
        let c = |quantity, kind, threshold, weight| Constraint {
            quantity,
            kind,
            threshold,
            weight,
        };
        ConstraintSpec(vec![
            c(Op1Torque, LowerBound, Some(145.0), 6),
            c(Op1Efficiency, Maximize, None, 8),
            c(Op2Torque, LowerBound, Some(40.0), 6),
            c(Op2Efficiency, Maximize, None, 7),
            c(PeakTorque, LowerBound, Some(550.0), 10),
            c(PeakPower, LowerBound, Some(200_000.0), 8),
            c(DcVoltage, UpperBound, Some(625.0), 8),
        ])
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        let mut seen = Vec::new();
        for c in &self.0 {
            if !(1..=10).contains(&c.weight) {
                return Err(OptimizeError::Config(format!(
                    "{}: weight {} outside 1..=10",
                    c.quantity.name(),
                    c.weight
                )));
            }
            if seen.contains(&c.quantity) {
                return Err(OptimizeError::Config(format!("{} listed twice", c.quantity.name())));
            }
            seen.push(c.quantity);
            match (c.kind, c.threshold) {
                (ConstraintKind::Maximize, None) => {}
                (ConstraintKind::Maximize, Some(_)) => {
                    return Err(OptimizeError::Config(format!(
                        "{}: objective takes no threshold",
                        c.quantity.name()
                    )))
                }
                (_, Some(t)) if t.is_finite() && t != 0.0 => {}
                _ => {
                    return Err(OptimizeError::Config(format!(
                        "{}: bound needs a finite non-zero threshold",
                        c.quantity.name()
                    )))
                }
            }
        }
        let objectives: Vec<Quantity> = self
            .0
            .iter()
            .filter(|c| c.kind == ConstraintKind::Maximize)
            .map(|c| c.quantity)
            .collect();
        if objectives != [Quantity::Op1Efficiency, Quantity::Op2Efficiency] {
            return Err(OptimizeError::Config(
                "objectives must be exactly op1_efficiency and op2_efficiency".into(),
            ));
        }
        Ok(())
    }

    /// Σ weight · relative violation over bound constraints.
    pub fn penalty(&self, value_of: impl Fn(Quantity) -> f64) -> f64 {
        self.0
            .iter()
            .map(|c| c.weight as f64 * c.relative_violation(value_of(c.quantity)))
            .fold(0.0, |a, b| a + b)
    }

    /// Weight-averaged objective value.
    pub fn weighted_objective(&self, value_of: impl Fn(Quantity) -> f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for c in self.0.iter().filter(|c| c.kind == ConstraintKind::Maximize) {
            num += c.weight as f64 * value_of(c.quantity);
            den += c.weight as f64;
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignVariables {
    pub slot_width: f64,
    pub slot_depth: f64,
    pub stator_yoke_width: f64,
    #[serde(default)]
    pub turns_per_phase: Option<u32>,
}

impl DesignVariables {
    pub fn of(design: &MachineDesign) -> Self {
        DesignVariables {
            slot_width: design.slot_width,
            slot_depth: design.slot_depth,
            stator_yoke_width: design.stator_yoke_width,
            turns_per_phase: None,
        }
    }

    pub fn apply(&self, base: &MachineDesign) -> MachineDesign {
        MachineDesign {
            slot_width: self.slot_width,
            slot_depth: self.slot_depth,
            stator_yoke_width: self.stator_yoke_width,
            turns_per_phase: self.turns_per_phase.unwrap_or(base.turns_per_phase),
            ..base.clone()
        }
    }

    fn key(&self) -> [f64; 4] {
        [
            self.slot_width,
            self.slot_depth,
            self.stator_yoke_width,
            self.turns_per_phase.map_or(0.0, |n| n as f64),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableBounds {
    pub slot_width: [f64; 2],
    pub slot_depth: [f64; 2],
    pub stator_yoke_width: [f64; 2],
    /// Turns per phase become a fourth (rounded) variable when set.
    #[serde(default)]
    pub turns_per_phase: Option<[u32; 2]>,
}

impl VariableBounds {
    pub fn as_ranges(&self) -> Vec<(f64, f64)> {
        let mut b = vec![
            (self.slot_width[0], self.slot_width[1]),
            (self.slot_depth[0], self.slot_depth[1]),
            (self.stator_yoke_width[0], self.stator_yoke_width[1]),
        ];
        if let Some([lo, hi]) = self.turns_per_phase {
            b.push((lo as f64, hi as f64));
        }
        b
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        for (name, [lo, hi]) in [
            ("slot_width", self.slot_width),
            ("slot_depth", self.slot_depth),
            ("stator_yoke_width", self.stator_yoke_width),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(OptimizeError::Config(format!("bounds: {name} = [{lo}, {hi}] invalid")));
            }
        }
        if let Some([lo, hi]) = self.turns_per_phase {
            if lo == 0 || hi < lo {
                return Err(OptimizeError::Config(format!(
                    "bounds: turns_per_phase = [{lo}, {hi}] invalid"
                )));
            }
        }
        Ok(())
    }

    pub fn decode(&self, x: &[f64]) -> DesignVariables {
        DesignVariables {
            slot_width: x[0],
            slot_depth: x[1],
            stator_yoke_width: x[2],
            turns_per_phase: self.turns_per_phase.map(|_| x[3].round() as u32),
        }
    }

    pub fn contains(&self, v: &DesignVariables) -> bool {
        let inside = |x: f64, [lo, hi]: [f64; 2]| x >= lo && x <= hi;
        inside(v.slot_width, self.slot_width)
            && inside(v.slot_depth, self.slot_depth)
            && inside(v.stator_yoke_width, self.stator_yoke_width)
            && match (self.turns_per_phase, v.turns_per_phase) {
                (Some([lo, hi]), Some(n)) => n >= lo && n <= hi,
                (None, None) => true,
                _ => false,
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// [N·m]
    pub torque: f64,
    pub speed_rpm: f64,
}

impl OperatingPoint {
    pub const OP1: OperatingPoint = OperatingPoint {
        torque: 150.0,
        speed_rpm: 1500.0,
    };
    pub const OP2: OperatingPoint = OperatingPoint {
        torque: 42.0,
        speed_rpm: 5500.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSettings {
    /// Bus voltage for every evaluation [V].
    pub v_dc: f64,
    pub peak_torque_speed_rpm: f64,
    pub peak_power_speed_rpm: f64,
    pub op1: OperatingPoint,
    pub op2: OperatingPoint,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        EvaluationSettings {
            v_dc: 625.0,
            peak_torque_speed_rpm: 100.0,
            peak_power_speed_rpm: 3500.0,
            op1: OperatingPoint::OP1,
            op2: OperatingPoint::OP2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintValue {
    pub quantity: Quantity,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedCandidate {
    pub variables: DesignVariables,
    /// (OP1 efficiency, OP2 efficiency)
    pub objectives: [f64; 2],
    pub constraint_values: Vec<ConstraintValue>,
    pub penalty: f64,
    pub feasible: bool,
    pub weighted_objective: f64,
    /// [N·m]
    pub peak_torque: f64,
    /// [W]
    pub peak_power: f64,
    pub stator_core_mass: f64,
    pub rotor_core_mass: f64,
    pub magnet_mass: f64,
    /// Core material at list price.
    pub material_cost: f64,
    /// Set by fine re-evaluation.
    pub eta_wltp: Option<f64>,
    pub tbv: Option<TbvBreakdown>,
    /// Why evaluation failed, if it did; such candidates carry an infinite penalty.
    pub failure: Option<String>,
}

impl EvaluatedCandidate {
    pub fn value(&self, q: Quantity) -> Option<f64> {
        self.constraint_values.iter().find(|c| c.quantity == q).map(|c| c.value)
    }

    fn failed(variables: DesignVariables, why: String) -> Self {
        EvaluatedCandidate {
            variables,
            objectives: [0.0, 0.0],
            constraint_values: Vec::new(),
            penalty: f64::INFINITY,
            feasible: false,
            weighted_objective: 0.0,
            peak_torque: 0.0,
            peak_power: 0.0,
            stator_core_mass: 0.0,
            rotor_core_mass: 0.0,
            magnet_mass: 0.0,
            material_cost: 0.0,
            eta_wltp: None,
            tbv: None,
            failure: Some(why),
        }
    }

    pub fn tbv_inputs(&self, design: &MachineDesign, eta_wltp: f64) -> TbvInputs {
        TbvInputs {
            eta_wltp,
            peak_torque: self.peak_torque,
            stator_core_mass: self.stator_core_mass,
            stator_price: design.stator_material.cost,
            rotor_core_mass: self.rotor_core_mass,
            rotor_price: design.rotor_material.cost,
            magnet_mass: self.magnet_mass,
            smc_stator: design.stator_material.kind == MaterialKind::Smc,
        }
    }
}

/// Solves an operating point, falling back to the reachable maximum.
fn solve_or_clip(drive: &Drive, op: OperatingPoint, v_dc: f64) -> Result<ControlSolution, ControlError> {
    match drive.solve(Strategy::Mtpl, op.torque, op.speed_rpm, v_dc) {
        Err(ControlError::Infeasible { max_torque, .. }) if max_torque > 0.0 => {
            drive.solve(Strategy::Mtpl, max_torque * (1.0 - 1e-4), op.speed_rpm, v_dc)
        }
        r => r,
    }
}

/// DC bus voltage needed for a solved point at the drive's modulation limit.
fn required_dc_voltage(drive: &Drive, s: &ControlSolution) -> f64 {
    3f64.sqrt() * s.v_d.hypot(s.v_q) / drive.modulation_limit
}

/// Pure function of its inputs; never panics on a bad design, it marks the
/// candidate failed instead.
pub fn evaluate_candidate(
    vars: &DesignVariables,
    base: &MachineDesign,
    ratings: &MachineRatings,
    constraints: &ConstraintSpec,
    settings: &EvaluationSettings,
    grid: GridSpec,
) -> EvaluatedCandidate {
    let design = vars.apply(base);
    if let Err(e) = design.validate() {
        return EvaluatedCandidate::failed(*vars, format!("design: {e}"));
    }
    let map = match build_flux_map(&design, ratings, grid) {
        Ok(m) => m,
        Err(e) => return EvaluatedCandidate::failed(*vars, format!("flux map: {e}")),
    };
    let drive = Drive::new(&design, map, ratings.clone(), LossConfig::default());
    let v_dc = settings.v_dc;
    let (op1, op2) = match (
        solve_or_clip(&drive, settings.op1, v_dc),
        solve_or_clip(&drive, settings.op2, v_dc),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return EvaluatedCandidate::failed(*vars, format!("operating point: {e}")),
    };
    let peak_torque = drive.max_torque(settings.peak_torque_speed_rpm, v_dc, 1.0);
    let w_pp = crate::control::rpm_to_rad(settings.peak_power_speed_rpm);
    let peak_power = drive.max_torque(settings.peak_power_speed_rpm, v_dc, 1.0) * w_pp;
    let dc_voltage = required_dc_voltage(&drive, &op1).max(required_dc_voltage(&drive, &op2));

    let eff = |s: &ControlSolution| s.efficiency.unwrap_or(0.0);
    let values: Vec<ConstraintValue> = Quantity::ALL
        .iter()
        .map(|&q| ConstraintValue {
            quantity: q,
            value: match q {
                Quantity::Op1Torque => op1.torque_achieved,
                Quantity::Op1Efficiency => eff(&op1),
                Quantity::Op2Torque => op2.torque_achieved,
                Quantity::Op2Efficiency => eff(&op2),
                Quantity::PeakTorque => peak_torque,
                Quantity::PeakPower => peak_power,
                Quantity::DcVoltage => dc_voltage,
            },
        })
        .collect();
    let value_of = |q: Quantity| values.iter().find(|c| c.quantity == q).map_or(0.0, |c| c.value);
    let penalty = constraints.penalty(value_of);
    let weighted_objective = constraints.weighted_objective(value_of);
    let g = design.geometry();
    let stator_core_mass = g.stator_mass();
    let material_cost = stator_core_mass * design.stator_material.cost + g.rotor_mass * design.rotor_material.cost;
    EvaluatedCandidate {
        variables: *vars,
        objectives: [eff(&op1), eff(&op2)],
        constraint_values: values,
        penalty,
        feasible: penalty == 0.0,
        weighted_objective,
        peak_torque,
        peak_power,
        stator_core_mass,
        rotor_core_mass: g.rotor_mass,
        magnet_mass: if design.topology == Topology::Pmsm {
            g.magnet_mass
        } else {
            0.0
        },
        material_cost,
        eta_wltp: None,
        tbv: None,
        failure: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationConfig {
    pub ga: GaConfig,
    pub bounds: VariableBounds,
    #[serde(default)]
    pub evaluation: EvaluationSettings,
    pub constraints: Vec<Constraint>,
    #[serde(default = "coarse")]
    pub search_grid: GridSpec,
    #[serde(default)]
    pub final_grid: GridSpec,
    /// Largest number of front members carried to fine re-evaluation.
    #[serde(default = "default_front_evaluations")]
    pub max_front_evaluations: usize,
}

fn coarse() -> GridSpec {
    GridSpec::COARSE
}

fn default_front_evaluations() -> usize {
    8
}

impl OptimizationConfig {
    pub fn from_toml(text: &str) -> Result<Self, OptimizeError> {
        let c: OptimizationConfig = toml::from_str(text).map_err(|e| OptimizeError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        self.ga.validate()?;
        self.bounds.validate()?;
        self.constraint_spec().validate()?;
        if self.max_front_evaluations == 0 {
            return Err(OptimizeError::Config("max_front_evaluations must be positive".into()));
        }
        let e = &self.evaluation;
        if !(e.v_dc > 0.0 && e.peak_torque_speed_rpm > 0.0 && e.peak_power_speed_rpm > 0.0) {
            return Err(OptimizeError::Config(
                "evaluation voltage and speeds must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn constraint_spec(&self) -> ConstraintSpec {
        ConstraintSpec(self.constraints.clone())
    }
}

/// Search problem over the stator variables of `base`.
pub struct DesignProblem<'a> {
    pub base: &'a MachineDesign,
    pub ratings: &'a MachineRatings,
    pub config: &'a OptimizationConfig,
    constraints: ConstraintSpec,
    ranges: Vec<(f64, f64)>,
}

impl<'a> DesignProblem<'a> {
    pub fn new(base: &'a MachineDesign, ratings: &'a MachineRatings, config: &'a OptimizationConfig) -> Self {
        DesignProblem {
            base,
            ratings,
            config,
            constraints: config.constraint_spec(),
            ranges: config.bounds.as_ranges(),
        }
    }
}

impl Problem for DesignProblem<'_> {
    type Detail = EvaluatedCandidate;

    fn bounds(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    fn evaluate(&self, x: &[f64]) -> Scored<EvaluatedCandidate> {
        let vars = self.config.bounds.decode(x);
        let c = evaluate_candidate(
            &vars,
            self.base,
            self.ratings,
            &self.constraints,
            &self.config.evaluation,
            self.config.search_grid,
        );
        Scored {
            objectives: c.objectives,
            penalty: c.penalty,
            detail: c,
        }
    }
}

/// Everything needed to put a machine into a vehicle.
#[derive(Debug, Clone)]
pub struct EduContext {
    pub inverter: InverterParams,
    pub gear: GearParams,
    pub vehicle: VehicleParams,
    pub cycle: DriveCycle,
    pub strategy: Strategy,
}

impl EduContext {
    pub fn edu(
        &self,
        name: &str,
        design: &MachineDesign,
        ratings: &MachineRatings,
        grid: GridSpec,
    ) -> Result<Edu, String> {
        let map = build_flux_map(design, ratings, grid).map_err(|e| e.to_string())?;
        let drive = Drive::new(design, map, ratings.clone(), LossConfig::default()).with_inverter(self.inverter);
        Ok(Edu {
            name: name.to_string(),
            drive,
            strategy: self.strategy,
            gear: self.gear,
            v_dc: self.vehicle.battery_voltage,
        })
    }

    pub fn cycle_efficiency(&self, edu: &Edu) -> Result<f64, String> {
        let trace = demand_trace(&self.cycle, &self.vehicle);
        let r = run_cycle(&trace, edu, &self.vehicle).map_err(|e| e.to_string())?;
        r.edu_efficiency.ok_or_else(|| "cycle moves no energy".to_string())
    }
}

/// Up to `k` front members spread evenly along the first objective.
pub fn thin_front(candidates: &[EvaluatedCandidate], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[a].objectives[0]
            .total_cmp(&candidates[b].objectives[0])
            .then(a.cmp(&b))
    });
    if order.len() <= k {
        return order;
    }
    let n = order.len();
    let mut picked: Vec<usize> = (0..k)
        .map(|i| order[if k == 1 { 0 } else { i * (n - 1) / (k - 1) }])
        .collect();
    picked.dedup();
    picked
}

/// Candidate with the highest TBV; ties go to higher OP2 efficiency, then
/// the lexicographically smaller variable vector. Candidates without a TBV
/// are skipped.
pub fn select_best(front: &[EvaluatedCandidate]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in front.iter().enumerate() {
        let Some(t) = c.tbv else { continue };
        best = match best {
            None => Some(i),
            Some(b) => {
                let tb = front[b].tbv.expect("only scored candidates are kept").total;
                let ord = t
                    .total
                    .total_cmp(&tb)
                    .then(c.objectives[1].total_cmp(&front[b].objectives[1]))
                    .then_with(|| {
                        let (x, y) = (c.variables.key(), front[b].variables.key());
                        y.iter()
                            .zip(&x)
                            .map(|(a, b)| a.total_cmp(b))
                            .find(|o| o.is_ne())
                            .unwrap_or(std::cmp::Ordering::Equal)
                    });
                if ord.is_gt() {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

#[derive(Debug, Clone)]
pub struct OptimizationOutcome {
    pub ga: GaResult<EvaluatedCandidate>,
    /// Archive indices of the coarse feasible front.
    pub front: Vec<usize>,
    /// Front members re-evaluated on the final grid and scored.
    pub finalists: Vec<EvaluatedCandidate>,
    /// Index into `finalists`.
    pub selected: Option<usize>,
}

impl OptimizationOutcome {
    pub fn selected_candidate(&self) -> Option<&EvaluatedCandidate> {
        self.selected.map(|i| &self.finalists[i])
    }
}

/// Search, fine re-evaluation of the thinned front with a cycle run per
/// finalist, and TBV selection among feasible finalists.
pub fn run_optimization(
    base: &MachineDesign,
    ratings: &MachineRatings,
    config: &OptimizationConfig,
    edu: &EduContext,
    economics: &Economics,
) -> Result<OptimizationOutcome, OptimizeError> {
    config.validate()?;
    let problem = DesignProblem::new(base, ratings, config);
    let ga = nsga2_run(&problem, &config.ga)?;
    if ga.all_infeasible {
        return Err(OptimizeError::AllInfeasible);
    }
    let front = ga.front();
    let coarse: Vec<EvaluatedCandidate> = front.iter().map(|&i| ga.archive[i].score.detail.clone()).collect();
    let picked = thin_front(&coarse, config.max_front_evaluations);
    let spec = config.constraint_spec();
    let finalists: Vec<EvaluatedCandidate> = picked
        .par_iter()
        .map(|&k| {
            let vars = coarse[k].variables;
            let mut c = evaluate_candidate(&vars, base, ratings, &spec, &config.evaluation, config.final_grid);
            if c.failure.is_some() {
                return c;
            }
            let design = vars.apply(base);
            let eta = edu
                .edu(&base.name, &design, ratings, config.final_grid)
                .and_then(|e| edu.cycle_efficiency(&e));
            match eta {
                Ok(eta) => {
                    c.eta_wltp = Some(eta);
                    c.tbv = Some(tbv_score(&c.tbv_inputs(&design, eta), economics));
                }
                Err(e) => c.failure = Some(format!("cycle: {e}")),
            }
            c
        })
        .collect();
    let feasible: Vec<EvaluatedCandidate> = finalists
        .iter()
        .map(|c| {
            let mut c = c.clone();
            if !c.feasible {
                c.tbv = None;
            }
            c
        })
        .collect();
    let selected = select_best(&feasible);
    Ok(OptimizationOutcome {
        ga,
        front,
        finalists,
        selected,
    })
}

fn candidate_header(out: &mut String) {
    out.push_str("slot_width_m,slot_depth_m,stator_yoke_width_m,turns_per_phase");
    for q in Quantity::ALL {
        let _ = write!(out, ",{}", q.name());
    }
    out.push_str(",penalty,feasible,weighted_objective,material_cost");
}

fn candidate_row(out: &mut String, c: &EvaluatedCandidate) {
    let v = &c.variables;
    let turns = v.turns_per_phase.map_or(String::new(), |n| n.to_string());
    let _ = write!(
        out,
        "{},{},{},{}",
        v.slot_width, v.slot_depth, v.stator_yoke_width, turns
    );
    for q in Quantity::ALL {
        match c.value(q) {
            Some(x) => {
                let _ = write!(out, ",{x}");
            }
            None => out.push(','),
        }
    }
    let _ = write!(
        out,
        ",{},{},{},{}",
        c.penalty, c.feasible as u8, c.weighted_objective, c.material_cost
    );
}

/// One row per evaluated member.
pub fn archive_csv(archive: &[Member<EvaluatedCandidate>]) -> String {
    let mut out = String::from("generation,");
    candidate_header(&mut out);
    out.push('\n');
    for m in archive {
        let _ = write!(out, "{},", m.generation);
        candidate_row(&mut out, &m.score.detail);
        out.push('\n');
    }
    out
}

/// Finalists with cycle efficiency and TBV terms.
pub fn finalists_csv(finalists: &[EvaluatedCandidate], selected: Option<usize>) -> String {
    let mut out = String::new();
    candidate_header(&mut out);
    out.push_str(
        ",eta_wltp,tbv_efficiency,tbv_torque,tbv_core_material,tbv_magnet,tbv_production,tbv_total,selected\n",
    );
    for (i, c) in finalists.iter().enumerate() {
        candidate_row(&mut out, c);
        let eta = c.eta_wltp.map_or(String::new(), |e| e.to_string());
        match c.tbv {
            Some(t) => {
                let _ = write!(
                    out,
                    ",{eta},{},{},{},{},{},{}",
                    t.efficiency_value,
                    t.torque_value,
                    t.core_material_cost,
                    t.magnet_cost,
                    t.production_adder,
                    t.total
                );
            }
            None => {
                let _ = write!(out, ",{eta},,,,,,");
            }
        }
        let _ = writeln!(out, ",{}", (selected == Some(i)) as u8);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_met(q: Quantity) -> f64 {
        match q {
            Quantity::Op1Torque => 150.0,
            Quantity::Op2Torque => 42.0,
            Quantity::PeakTorque => 610.0,
            Quantity::PeakPower => 210_000.0,
            Quantity::DcVoltage => 600.0,
            _ => 0.9,
        }
    }

    #[test]
    fn benchmark_spec_is_valid() {
        ConstraintSpec::benchmark().validate().unwrap();
    }

    #[test]
    fn m0_like_is_feasible() {
        assert_eq!(ConstraintSpec::benchmark().penalty(all_met), 0.0);
    }

    #[test]
    fn torque_shortfall_penalty() {
        let p = ConstraintSpec::benchmark().penalty(|q| if q == Quantity::PeakTorque { 540.0 } else { all_met(q) });
        assert!((p - 10.0 * 10.0 / 550.0).abs() < 1e-12);
        assert!((p - 0.18181818181818182).abs() < 1e-12);
    }

    #[test]
    fn m1_like_is_feasible() {
        let spec = ConstraintSpec::benchmark();
        let p = spec.penalty(|q| match q {
            Quantity::PeakTorque => 554.0,
            Quantity::PeakPower => 207_000.0,
            q => all_met(q),
        });
        assert_eq!(p, 0.0);
    }

    #[test]
    fn bad_weights_rejected() {
        let mut spec = ConstraintSpec::benchmark();
        spec.0[0].weight = 11;
        assert!(spec.validate().is_err());
        spec.0[0].weight = 0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn select_best_tie_breaks() {
        let mut a = EvaluatedCandidate::failed(
            DesignVariables {
                slot_width: 0.005,
                slot_depth: 0.02,
                stator_yoke_width: 0.014,
                turns_per_phase: None,
            },
            String::new(),
        );
        a.tbv = Some(TbvBreakdown {
            efficiency_value: 0.0,
            torque_value: 0.0,
            core_material_cost: 0.0,
            magnet_cost: 0.0,
            production_adder: 0.0,
            total: 10.0,
        });
        a.objectives = [0.9, 0.95];
        let mut b = a.clone();
        b.objectives = [0.9, 0.96];
        assert_eq!(select_best(&[a.clone(), b.clone()]), Some(1));
        let mut c = a.clone();
        c.variables.slot_width = 0.004;
        assert_eq!(select_best(&[a.clone(), c]), Some(1));
        assert_eq!(select_best(&[a.clone()]), Some(0));
        assert_eq!(select_best(&[EvaluatedCandidate { tbv: None, ..a }]), None);
    }

    #[test]
    fn thinning_keeps_extremes() {
        let mk = |x: f64| {
            let mut c = EvaluatedCandidate::failed(DesignVariables::of(&crate::data::design("wfsm_m6")), String::new());
            c.objectives = [x, 1.0 - x];
            c
        };
        let cands: Vec<_> = (0..10).map(|i| mk(i as f64 / 10.0)).collect();
        let t = thin_front(&cands, 3);
        assert_eq!(t, vec![0, 4, 9]);
        assert_eq!(thin_front(&cands[..2], 3), vec![0, 1]);
    }
}
