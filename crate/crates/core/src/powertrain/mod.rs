//! Vehicle longitudinal model, drive cycles, EDU (machine + inverter +
//! gearbox) cycle simulation and energy histograms.

mod cycle;
mod histogram;

pub use cycle::{DriveCycle, CYCLE_HEADER};
pub use histogram::{energy_histogram, energy_histogram_with_edges, EnergyHistogram, HistogramMode};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{rad_to_rpm, ControlError, ControlSolution, Drive, Strategy};
use crate::losses::{gearbox_loss, GearParams, LossBreakdown};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CycleError {
    #[error("cycle: {0}")]
    Cycle(String),
    #[error("vehicle: {0}")]
    Vehicle(String),
    #[error("{clipped_fraction:.3} of cycle energy falls outside the drive envelope")]
    Clipped { clipped_fraction: f64 },
    #[error(transparent)]
    Control(#[from] ControlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Driveline {
    #[default]
    Rwd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// [kg]
    pub mass: f64,
    /// Drag coefficient times frontal area [m²].
    pub drag_area: f64,
    pub rolling_coeff: f64,
    /// [m]
    pub wheel_radius: f64,
    /// Motor speed over wheel speed.
    pub gear_ratio: f64,
    #[serde(default)]
    pub driveline: Driveline,
    /// Constant auxiliary load on the battery [W].
    pub aux_power: f64,
    /// [kg/m³]
    pub air_density: f64,
    /// Share of braking energy routed to the motor; the rest goes to friction brakes.
    pub regen_fraction: f64,
    /// [V]
    pub battery_voltage: f64,
}

impl VehicleParams {
    pub fn from_toml(text: &str) -> Result<Self, CycleError> {
        let v: VehicleParams = toml::from_str(text).map_err(|e| CycleError::Vehicle(e.to_string()))?;
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<(), CycleError> {
        let positive = [
            ("mass", self.mass),
            ("drag_area", self.drag_area),
            ("rolling_coeff", self.rolling_coeff),
            ("wheel_radius", self.wheel_radius),
            ("gear_ratio", self.gear_ratio),
            ("aux_power", self.aux_power),
            ("air_density", self.air_density),
            ("battery_voltage", self.battery_voltage),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(CycleError::Vehicle(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.regen_fraction > 0.0 && self.regen_fraction <= 1.0) {
            return Err(CycleError::Vehicle(format!(
                "regen_fraction must be in (0, 1], got {}",
                self.regen_fraction
            )));
        }
        Ok(())
    }

    pub fn with_gear_ratio(&self, gear_ratio: f64) -> Self {
        VehicleParams {
            gear_ratio,
            ..self.clone()
        }
    }

    /// Tractive force [N] at speed `v` [m/s] and acceleration `a` [m/s²].
    pub fn tractive_force(&self, v: f64, a: f64) -> f64 {
        let rolling = if v > 0.0 {
            self.mass * GRAVITY * self.rolling_coeff
        } else {
            0.0
        };
        self.mass * a + 0.5 * self.air_density * self.drag_area * v * v + rolling
    }
}

/// Motor-side demand over one cycle interval, before gearbox losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandStep {
    /// Interval start [s].
    pub time: f64,
    pub dt: f64,
    /// Interval-mean vehicle speed [m/s].
    pub vehicle_speed: f64,
    /// Tractive force at the wheels [N]; negative when braking.
    pub force: f64,
    /// [rad/s]
    pub motor_speed: f64,
    /// Lossless motor torque [N·m]; braking torque is scaled by the regen share.
    pub motor_torque: f64,
}

/// Interval-mean speed and finite-difference acceleration per sample pair.
pub fn demand_trace(cycle: &DriveCycle, vehicle: &VehicleParams) -> Vec<DemandStep> {
    cycle
        .samples
        .windows(2)
        .map(|w| {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            let dt = t1 - t0;
            let v = 0.5 * (v0 + v1);
            let a = (v1 - v0) / dt;
            let force = if v == 0.0 && a == 0.0 {
                0.0
            } else {
                vehicle.tractive_force(v, a)
            };
            let wheel_torque = force * vehicle.wheel_radius;
            let share = if force < 0.0 { vehicle.regen_fraction } else { 1.0 };
            DemandStep {
                time: t0,
                dt,
                vehicle_speed: v,
                force,
                motor_speed: v * vehicle.gear_ratio / vehicle.wheel_radius,
                motor_torque: share * wheel_torque / vehicle.gear_ratio,
            }
        })
        .collect()
}

/// Motor torque that delivers `load_torque` (referred to the motor shaft)
/// through the gearbox at motor speed `speed`.
pub fn motor_torque_through_gear(load_torque: f64, speed: f64, gear: &GearParams) -> f64 {
    let n = gear.stages as f64;
    let k = n * (1.0 - gear.stage_efficiency);
    let drag = if speed > 0.0 { n * gear.drag_coeff } else { 0.0 };
    let pull = load_torque + drag;
    if pull >= 0.0 {
        pull / (1.0 - k)
    } else {
        pull / (1.0 + k)
    }
}

/// Electric drive unit: machine with its inverter, control strategy and gearbox.
#[derive(Debug, Clone)]
pub struct Edu {
    pub name: String,
    pub drive: Drive,
    pub strategy: Strategy,
    pub gear: GearParams,
    pub v_dc: f64,
}

impl Edu {
    /// Operating point delivering `load_torque` at the gearbox output
    /// (referred to the motor shaft) at motor speed `speed` [rad/s].
    pub fn operate(&self, load_torque: f64, speed: f64) -> Result<EduPoint, ControlError> {
        let torque = motor_torque_through_gear(load_torque, speed, &self.gear);
        let sol = self.drive.solve(self.strategy, torque, rad_to_rpm(speed), self.v_dc)?;
        Ok(self.account(sol, speed))
    }

    /// Closest reachable point when the demand is outside the envelope.
    fn operate_clipped(&self, load_torque: f64, speed: f64) -> Result<(EduPoint, f64), ControlError> {
        let torque = motor_torque_through_gear(load_torque, speed, &self.gear);
        let rpm = rad_to_rpm(speed);
        match self.drive.solve(self.strategy, torque, rpm, self.v_dc) {
            Ok(sol) => Ok((self.account(sol, speed), 0.0)),
            Err(ControlError::Infeasible { max_torque, .. }) => {
                // back off slightly so the limit point itself is solvable
                let clipped = max_torque * (1.0 - 1e-4);
                let sol = self.drive.solve(self.strategy, clipped, rpm, self.v_dc)?;
                Ok((self.account(sol, speed), (torque - clipped).abs() * speed))
            }
            Err(e) => Err(e),
        }
    }

    fn account(&self, sol: ControlSolution, speed: f64) -> EduPoint {
        let gear = gearbox_loss(sol.torque_achieved, speed, &self.gear);
        let mut losses = sol.losses;
        losses.gearbox = gear;
        let output_power = sol.shaft_power - gear;
        EduPoint {
            solution: sol,
            output_power,
            losses,
            input_power: output_power + losses.total(),
        }
    }
}

/// EDU-level bookkeeping for one operating point. `input_power` is defined
/// as `output_power + losses.total()`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EduPoint {
    pub solution: ControlSolution,
    /// Mechanical power at the gearbox output [W].
    pub output_power: f64,
    pub losses: LossBreakdown,
    /// DC power into the inverter [W].
    pub input_power: f64,
}

impl EduPoint {
    pub fn efficiency(&self) -> Option<f64> {
        if self.output_power > 0.0 && self.input_power > 0.0 {
            Some(self.output_power / self.input_power)
        } else if self.output_power < 0.0 && self.input_power < 0.0 {
            Some(self.input_power / self.output_power)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: f64,
    pub dt: f64,
    pub vehicle_speed: f64,
    pub motor_speed_rpm: f64,
    pub motor_torque: f64,
    pub i_d: f64,
    pub i_q: f64,
    pub i_f: f64,
    /// Motor shaft power [W].
    pub shaft_power: f64,
    /// Gearbox output power [W].
    pub output_power: f64,
    pub losses: LossBreakdown,
    pub input_power: f64,
    /// EDU input plus auxiliary load [W].
    pub battery_power: f64,
    pub clipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CycleTotals {
    /// Positive gearbox-output energy [J].
    pub traction_energy: f64,
    /// Braking energy returned to the DC bus [J], positive.
    pub recovered_energy: f64,
    /// Net gearbox-output energy [J].
    pub net_output_energy: f64,
    /// Net DC energy into the EDU [J].
    pub net_input_energy: f64,
    pub loss_energy: LossBreakdown,
    pub aux_energy: f64,
    pub battery_energy: f64,
    pub clipped_energy: f64,
    pub clipped_steps: usize,
    /// Σ |motor shaft power|·dt [J].
    pub processed_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleResult {
    pub edu: String,
    pub steps: Vec<StepRecord>,
    pub totals: CycleTotals,
    /// Net output over net input; `None` when no energy flows.
    pub edu_efficiency: Option<f64>,
}

/// Largest allowed share of cycle energy in clipped steps.
pub const MAX_CLIPPED_FRACTION: f64 = 0.01;

pub fn run_cycle(trace: &[DemandStep], edu: &Edu, vehicle: &VehicleParams) -> Result<CycleResult, CycleError> {
    let solved: Vec<Result<Option<(EduPoint, f64)>, ControlError>> = trace
        .par_iter()
        .map(|d| {
            if d.motor_speed == 0.0 && d.motor_torque == 0.0 {
                Ok(None)
            } else {
                edu.operate_clipped(d.motor_torque, d.motor_speed).map(Some)
            }
        })
        .collect();

    let mut steps = Vec::with_capacity(trace.len());
    let mut t = CycleTotals::default();
    for (d, r) in trace.iter().zip(solved) {
        let (point, clipped_power) = match r? {
            Some(p) => p,
            None => {
                steps.push(StepRecord {
                    time: d.time,
                    dt: d.dt,
                    vehicle_speed: d.vehicle_speed,
                    motor_speed_rpm: 0.0,
                    motor_torque: 0.0,
                    i_d: 0.0,
                    i_q: 0.0,
                    i_f: 0.0,
                    shaft_power: 0.0,
                    output_power: 0.0,
                    losses: LossBreakdown::default(),
                    input_power: 0.0,
                    battery_power: vehicle.aux_power,
                    clipped: false,
                });
                t.aux_energy += vehicle.aux_power * d.dt;
                t.battery_energy += vehicle.aux_power * d.dt;
                continue;
            }
        };
        let s = point.solution;
        let rec = StepRecord {
            time: d.time,
            dt: d.dt,
            vehicle_speed: d.vehicle_speed,
            motor_speed_rpm: s.speed_rpm,
            motor_torque: s.torque_achieved,
            i_d: s.i_d,
            i_q: s.i_q,
            i_f: s.i_f,
            shaft_power: s.shaft_power,
            output_power: point.output_power,
            losses: point.losses,
            input_power: point.input_power,
            battery_power: point.input_power + vehicle.aux_power,
            clipped: clipped_power > 0.0,
        };
        if rec.output_power > 0.0 {
            t.traction_energy += rec.output_power * d.dt;
        }
        if rec.input_power < 0.0 {
            t.recovered_energy -= rec.input_power * d.dt;
        }
        t.net_output_energy += rec.output_power * d.dt;
        t.net_input_energy += rec.input_power * d.dt;
        t.loss_energy = add_scaled(&t.loss_energy, &rec.losses, d.dt);
        t.aux_energy += vehicle.aux_power * d.dt;
        t.battery_energy += rec.battery_power * d.dt;
        t.processed_energy += s.shaft_power.abs() * d.dt;
        if rec.clipped {
            t.clipped_steps += 1;
            t.clipped_energy += clipped_power * d.dt;
        }
        steps.push(rec);
    }
    let reference = t.processed_energy + t.clipped_energy;
    if reference > 0.0 && t.clipped_energy / reference > MAX_CLIPPED_FRACTION {
        return Err(CycleError::Clipped {
            clipped_fraction: t.clipped_energy / reference,
        });
    }
    let edu_efficiency = if t.net_output_energy > 0.0 && t.net_input_energy > 0.0 {
        Some(t.net_output_energy / t.net_input_energy)
    } else {
        None
    };
    Ok(CycleResult {
        edu: edu.name.clone(),
        steps,
        totals: t,
        edu_efficiency,
    })
}

fn add_scaled(acc: &LossBreakdown, l: &LossBreakdown, dt: f64) -> LossBreakdown {
    LossBreakdown {
        iron_stator: acc.iron_stator + l.iron_stator * dt,
        iron_rotor: acc.iron_rotor + l.iron_rotor * dt,
        copper_dc: acc.copper_dc + l.copper_dc * dt,
        copper_ac: acc.copper_ac + l.copper_ac * dt,
        field_copper: acc.field_copper + l.field_copper * dt,
        transformer: acc.transformer + l.transformer * dt,
        inverter: acc.inverter + l.inverter * dt,
        gearbox: acc.gearbox + l.gearbox * dt,
        pwm_correction_applied: l.pwm_correction_applied,
    }
}

/// Steady road load at `v_kmh` [km/h].
pub fn cruise_point(v_kmh: f64, vehicle: &VehicleParams, edu: &Edu) -> Result<EduPoint, CycleError> {
    if !(v_kmh > 0.0) {
        return Err(CycleError::Cycle(format!("cruise speed must be positive, got {v_kmh}")));
    }
    let v = v_kmh / 3.6;
    let force = vehicle.tractive_force(v, 0.0);
    let speed = v * vehicle.gear_ratio / vehicle.wheel_radius;
    let load = force * vehicle.wheel_radius / vehicle.gear_ratio;
    Ok(edu.operate(load, speed)?)
}

/// Steady-state EDU efficiency at a cruise speed.
pub fn cruise_efficiency(v_kmh: f64, vehicle: &VehicleParams, edu: &Edu) -> Result<f64, CycleError> {
    let p = cruise_point(v_kmh, vehicle, edu)?;
    p.efficiency()
        .ok_or_else(|| CycleError::Cycle("no power flow at cruise point".into()))
}

impl CycleResult {
    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            edu: &'a str,
            edu_efficiency: Option<f64>,
            totals: &'a CycleTotals,
            steps: usize,
        }
        serde_json::to_string_pretty(&Summary {
            edu: &self.edu,
            edu_efficiency: self.edu_efficiency,
            totals: &self.totals,
            steps: self.steps.len(),
        })
        .expect("summary serializes")
    }

    pub fn trace_csv(&self) -> String {
        let mut out =
            String::from("time_s,dt_s,vehicle_speed_mps,motor_speed_rpm,motor_torque_nm,i_d,i_q,i_f,output_w");
        for c in LossBreakdown::COMPONENTS {
            out.push(',');
            out.push_str(c);
            out.push_str("_w");
        }
        out.push_str(",input_w,battery_w,clipped\n");
        for s in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}",
                s.time, s.dt, s.vehicle_speed, s.motor_speed_rpm, s.motor_torque, s.i_d, s.i_q, s.i_f, s.output_power
            ));
            for v in s.losses.components() {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{},{},{}\n", s.input_power, s.battery_power, s.clipped as u8));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sedan() -> VehicleParams {
        crate::data::vehicle("sedan")
    }

    #[test]
    fn zero_speed_cycle_is_all_zero() {
        let c = DriveCycle::new(vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).unwrap();
        let tr = demand_trace(&c, &sedan());
        assert!(tr
            .iter()
            .all(|d| d.motor_speed == 0.0 && d.motor_torque == 0.0 && d.force == 0.0));
    }

    #[test]
    fn cruise_force_hand_value() {
        // 70 km/h: 0.372·(19.4444)² + 1900·9.81·0.009 = 140.648148 + 167.751
        let v = 70.0 / 3.6;
        let c = DriveCycle::new(vec![(0.0, v), (1.0, v), (2.0, v)]).unwrap();
        let tr = demand_trace(&c, &sedan());
        let expected = 0.5 * 1.2 * 0.62 * v * v + 1900.0 * 9.81 * 0.009;
        assert!((expected - 308.399148148148).abs() < 1e-9);
        for d in &tr {
            assert!((d.force - expected).abs() < 1e-9);
            assert_eq!(d.motor_speed, tr[0].motor_speed);
        }
    }

    #[test]
    fn gear_ratio_algebra() {
        let c = DriveCycle::new(vec![(0.0, 10.0), (1.0, 11.0)]).unwrap();
        let a = demand_trace(&c, &sedan().with_gear_ratio(7.0))[0];
        let b = demand_trace(&c, &sedan().with_gear_ratio(9.5))[0];
        assert!((b.motor_speed / a.motor_speed - 9.5 / 7.0).abs() < 1e-12);
        assert!((b.motor_torque / a.motor_torque - 7.0 / 9.5).abs() < 1e-12);
    }

    #[test]
    fn braking_uses_regen_share() {
        let c = DriveCycle::new(vec![(0.0, 20.0), (1.0, 18.0)]).unwrap();
        let v = sedan();
        let d = demand_trace(&c, &v)[0];
        assert!(d.force < 0.0);
        let full = d.force * v.wheel_radius / v.gear_ratio;
        assert!((d.motor_torque - 0.85 * full).abs() < 1e-9);
    }

    #[test]
    fn gear_torque_inverse() {
        let g = crate::data::gear("two_stage");
        for &(load, w) in &[(50.0, 500.0), (-40.0, 300.0), (0.0, 100.0)] {
            let tm = motor_torque_through_gear(load, w, &g);
            let out = tm * w - gearbox_loss(tm, w, &g);
            assert!((out - load * w).abs() < 1e-9 * (1.0 + (load * w).abs()));
        }
    }
}
