//! Loss mechanisms at an operating point: iron, stator copper (DC and AC),
//! field copper and rotating transformer, inverter, and gearbox.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::magnetics::{FluxLinkageMap, Geometry, MachineDesign, MapError};
use crate::materials::MaterialSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("field power {demand:.1} W exceeds rotating-transformer limit {limit:.1} W")]
    FieldPowerExceeded { demand: f64, limit: f64 },
    #[error("negative speed {0}")]
    NegativeSpeed(f64),
    #[error("parse: {0}")]
    Parse(String),
}

/// Loss components [W].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub iron_stator: f64,
    pub iron_rotor: f64,
    pub copper_dc: f64,
    pub copper_ac: f64,
    pub field_copper: f64,
    pub transformer: f64,
    pub inverter: f64,
    pub gearbox: f64,
    pub pwm_correction_applied: f64,
}

impl LossBreakdown {
    pub const COMPONENTS: [&'static str; 8] = [
        "iron_stator",
        "iron_rotor",
        "copper_dc",
        "copper_ac",
        "field_copper",
        "transformer",
        "inverter",
        "gearbox",
    ];

    pub fn components(&self) -> [f64; 8] {
        [
            self.iron_stator,
            self.iron_rotor,
            self.copper_dc,
            self.copper_ac,
            self.field_copper,
            self.transformer,
            self.inverter,
            self.gearbox,
        ]
    }

    /// Sum of all components, always accumulated in [`Self::COMPONENTS`] order.
    pub fn total(&self) -> f64 {
        self.components().iter().fold(0.0, |acc, c| acc + c)
    }

    /// Iron, stator copper, field and transformer losses.
    pub fn machine_electromagnetic(&self) -> f64 {
        self.iron_stator + self.iron_rotor + self.copper_dc + self.copper_ac + self.field_copper + self.transformer
    }

    pub fn scaled(&self, k: f64) -> LossBreakdown {
        LossBreakdown {
            iron_stator: self.iron_stator * k,
            iron_rotor: self.iron_rotor * k,
            copper_dc: self.copper_dc * k,
            copper_ac: self.copper_ac * k,
            field_copper: self.field_copper * k,
            transformer: self.transformer * k,
            inverter: self.inverter * k,
            gearbox: self.gearbox * k,
            pwm_correction_applied: self.pwm_correction_applied,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// [°C]
    pub winding_temp_c: f64,
    /// Scalar applied to iron and stator copper losses.
    pub pwm_correction: f64,
    pub transformer_efficiency: f64,
    /// Power deliverable to the field winding [W].
    pub max_field_power: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            winding_temp_c: 120.0,
            pwm_correction: 1.05,
            transformer_efficiency: 0.92,
            max_field_power: 8200.0,
        }
    }
}

/// Electrical frequency [Hz] for mechanical speed [rad/s].
pub fn electrical_frequency(pole_pairs: u32, speed_mech: f64) -> f64 {
    pole_pairs as f64 * speed_mech / (2.0 * PI)
}

/// Design constants the loss model needs at every point.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineLossModel {
    pub pole_pairs: u32,
    pub stator: MaterialSpec,
    pub rotor: MaterialSpec,
    pub stator_teeth_mass: f64,
    pub stator_yoke_mass: f64,
    pub rotor_mass: f64,
    /// Stator phase resistance at winding temperature [Ω].
    pub r_s: f64,
    /// Field resistance at winding temperature [Ω].
    pub r_f: f64,
    pub ac_copper_coeff: f64,
    pub config: LossConfig,
}

impl MachineLossModel {
    pub fn new(design: &MachineDesign, config: LossConfig) -> Self {
        let g: Geometry = design.geometry();
        MachineLossModel {
            pole_pairs: design.pole_pairs,
            stator: design.stator_material.clone(),
            rotor: design.rotor_material.clone(),
            stator_teeth_mass: g.stator_teeth_mass,
            stator_yoke_mass: g.stator_yoke_mass,
            rotor_mass: g.rotor_mass,
            r_s: design.stator_resistance(config.winding_temp_c),
            r_f: design.field_resistance(config.winding_temp_c),
            ac_copper_coeff: design.ac_copper_coeff,
            config,
        }
    }

    /// Machine losses given already-sampled flux densities.
    pub fn evaluate(
        &self,
        b_tooth: f64,
        b_yoke: f64,
        b_rotor: f64,
        i_d: f64,
        i_q: f64,
        i_f: f64,
        speed_mech: f64,
    ) -> Result<LossBreakdown, LossError> {
        if !(speed_mech >= 0.0) {
            return Err(LossError::NegativeSpeed(speed_mech));
        }
        let f = electrical_frequency(self.pole_pairs, speed_mech);
        let iron_stator = self.stator.loss_terms(b_tooth, f).total() * self.stator_teeth_mass
            + self.stator.loss_terms(b_yoke, f).total() * self.stator_yoke_mass;
        let iron_rotor = self.rotor.loss_terms(b_rotor, f).total() * self.rotor_mass;
        let i_rms_sq = (i_d * i_d + i_q * i_q) / 2.0;
        let copper_dc = 3.0 * i_rms_sq * self.r_s;
        let copper_ac = copper_dc * (self.ac_copper_coeff * f * f);
        let field_copper = i_f * i_f * self.r_f;
        if field_copper > self.config.max_field_power {
            return Err(LossError::FieldPowerExceeded {
                demand: field_copper,
                limit: self.config.max_field_power,
            });
        }
        let transformer = field_copper * (1.0 / self.config.transformer_efficiency - 1.0);
        let k = self.config.pwm_correction;
        Ok(LossBreakdown {
            iron_stator: iron_stator * k,
            iron_rotor: iron_rotor * k,
            copper_dc: copper_dc * k,
            copper_ac: copper_ac * k,
            field_copper,
            transformer,
            inverter: 0.0,
            gearbox: 0.0,
            pwm_correction_applied: k,
        })
    }
}

/// Machine-only losses at a map point. Inverter and gearbox fields are zero.
pub fn machine_losses(
    design: &MachineDesign,
    map: &FluxLinkageMap,
    i_d: f64,
    i_q: f64,
    i_f: f64,
    speed_mech: f64,
    config: &LossConfig,
) -> Result<LossBreakdown, LossError> {
    let model = MachineLossModel::new(design, *config);
    let s = map.sample(i_d, i_q, i_f)?;
    model.evaluate(s.b_tooth, s.b_yoke, s.b_rotor, i_d, i_q, i_f, speed_mech)
}

/// Inverter device parameters; switching energies are per inverter at
/// `(i_ref, v_ref)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverterParams {
    /// Forward voltage drop [V].
    pub v_on: f64,
    /// On-state resistance [Ω].
    pub r_on: f64,
    /// [J]
    pub e_on: f64,
    pub e_off: f64,
    pub e_rr: f64,
    /// [A rms]
    pub i_ref: f64,
    /// [V]
    pub v_ref: f64,
    /// Switching frequency [Hz].
    pub f_sw: f64,
}

impl InverterParams {
    pub fn from_toml(text: &str) -> Result<Self, LossError> {
        toml::from_str(text).map_err(|e| LossError::Parse(e.to_string()))
    }
}

/// Conduction `3·(v_on·I_avg + r_on·I_rms²)` with `I_avg = 2√2/π · I_rms`
/// (rectified sine mean) plus switching `f_sw·ΣE·(I/I_ref)·(V/V_ref)`.
pub fn inverter_losses(i_rms: f64, v_dc: f64, f_sw: f64, p: &InverterParams) -> f64 {
    let i_avg = 2.0 * SQRT_2 / PI * i_rms;
    let conduction = 3.0 * (p.v_on * i_avg + p.r_on * i_rms * i_rms);
    let switching = f_sw * (p.e_on + p.e_off + p.e_rr) * (i_rms / p.i_ref) * (v_dc / p.v_ref);
    conduction + switching
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GearParams {
    pub stages: u32,
    pub stage_efficiency: f64,
    /// Speed-proportional drag per stage [W per rad/s of input speed].
    pub drag_coeff: f64,
}

impl GearParams {
    pub fn from_toml(text: &str) -> Result<Self, LossError> {
        toml::from_str(text).map_err(|e| LossError::Parse(e.to_string()))
    }

    pub fn lossless() -> Self {
        GearParams {
            stages: 1,
            stage_efficiency: 1.0,
            drag_coeff: 0.0,
        }
    }
}

/// Per stage `(1 - η)·|P| + drag·ω`, summed over stages.
pub fn gearbox_loss(input_torque: f64, input_speed: f64, gear: &GearParams) -> f64 {
    let through = (input_torque * input_speed).abs();
    let per_stage = (1.0 - gear.stage_efficiency) * through + gear.drag_coeff * input_speed.abs();
    gear.stages as f64 * per_stage
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;
    use crate::magnetics::{build_flux_map, GridSpec, MachineRatings};

    fn sic() -> InverterParams {
        data::inverter("sic")
    }

    #[test]
    fn inverter_zero_activity() {
        assert_eq!(inverter_losses(0.0, 800.0, 0.0, &sic()), 0.0);
        assert_eq!(inverter_losses(0.0, 800.0, 10_000.0, &sic()), 0.0);
    }

    #[test]
    fn inverter_switching_linear_in_voltage() {
        let p = sic();
        let cond = inverter_losses(100.0, 400.0, 0.0, &p);
        let s1 = inverter_losses(100.0, 400.0, 10_000.0, &p) - cond;
        let s2 = inverter_losses(100.0, 800.0, 10_000.0, &p) - cond;
        assert!((s2 - 2.0 * s1).abs() < 1e-9 * s2);
    }

    #[test]
    fn inverter_hand_evaluation() {
        // Shipped SiC file: v_on 0.3 V, r_on 2.5 mΩ, ΣE = 57 mJ at 400 A / 800 V.
        // 3·(0.3·0.900316316·100 + 0.0025·1e4) + 1e4·0.057·0.25·1 = 81.0284685 + 75 + 142.5
        let expected = 3.0 * (0.3 * 90.03163161571061 + 0.0025 * 10_000.0) + 142.5;
        let got = inverter_losses(100.0, 800.0, 10_000.0, &sic());
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        assert!((got - 298.52846845413955).abs() < 1e-9);
    }

    #[test]
    fn gearbox_formula() {
        let g = GearParams {
            stages: 1,
            stage_efficiency: 0.99,
            drag_coeff: 0.0,
        };
        assert_eq!(gearbox_loss(0.0, 0.0, &g), 0.0);
        assert!((gearbox_loss(10.0, 1000.0, &g) - 100.0).abs() < 1e-9);
        let g2 = GearParams { stages: 2, ..g };
        assert_eq!(gearbox_loss(10.0, 1000.0, &g2), 2.0 * gearbox_loss(10.0, 1000.0, &g));
    }

    #[test]
    fn copper_hand_values() {
        let model = MachineLossModel {
            pole_pairs: 4,
            stator: crate::materials::MaterialSpec::linear("l", 1000.0),
            rotor: crate::materials::MaterialSpec::linear("l", 1000.0),
            stator_teeth_mass: 1.0,
            stator_yoke_mass: 1.0,
            rotor_mass: 1.0,
            r_s: 0.010,
            r_f: 1.0,
            ac_copper_coeff: 1e-6,
            config: LossConfig {
                pwm_correction: 1.0,
                ..LossConfig::default()
            },
        };
        // 100 A rms = 141.42 A peak on the q axis
        let l = model.evaluate(0.0, 0.0, 0.0, 0.0, 100.0 * SQRT_2, 0.0, 0.0).unwrap();
        assert!((l.copper_dc - 300.0).abs() < 1e-9);
        assert_eq!(l.copper_ac, 0.0);
    }

    #[test]
    fn field_power_limit() {
        let d = data::design("wfsm_m0");
        let map = build_flux_map(&d, &MachineRatings::wfsm_m0(), GridSpec::COARSE).unwrap();
        let cfg = LossConfig {
            max_field_power: 1000.0,
            ..LossConfig::default()
        };
        let err = machine_losses(&d, &map, 0.0, 0.0, 32.0, 100.0, &cfg).unwrap_err();
        assert!(matches!(err, LossError::FieldPowerExceeded { .. }));
        assert!(machine_losses(&d, &map, 0.0, 0.0, 32.0, 100.0, &LossConfig::default()).is_ok());
    }

    #[test]
    fn no_load_wfsm_is_lossless() {
        let d = data::design("wfsm_m0");
        let map = build_flux_map(&d, &MachineRatings::wfsm_m0(), GridSpec::COARSE).unwrap();
        for speed in [0.0, 100.0, 1000.0, 1500.0] {
            let l = machine_losses(&d, &map, 0.0, 0.0, 0.0, speed, &LossConfig::default()).unwrap();
            assert_eq!(l.total(), 0.0);
        }
    }

    #[test]
    fn pwm_factor_scales_exactly() {
        let d = data::design("wfsm_m0");
        let map = build_flux_map(&d, &MachineRatings::wfsm_m0(), GridSpec::COARSE).unwrap();
        let unity = LossConfig {
            pwm_correction: 1.0,
            ..LossConfig::default()
        };
        let base = machine_losses(&d, &map, -100.0, 200.0, 10.0, 400.0, &unity).unwrap();
        let corr = machine_losses(&d, &map, -100.0, 200.0, 10.0, 400.0, &LossConfig::default()).unwrap();
        assert_eq!(corr.iron_stator, base.iron_stator * 1.05);
        assert_eq!(corr.copper_dc, base.copper_dc * 1.05);
        assert_eq!(corr.field_copper, base.field_copper);
    }
}
