//! Parametric radial-flux machine geometry and ratings.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::materials::{MaterialKind, MaterialSpec, SurrogateGradeLibrary};

/// Copper resistivity at 20 °C [Ω·m].
pub const COPPER_RESISTIVITY_20C: f64 = 1.72e-8;
/// Copper temperature coefficient [1/K].
pub const COPPER_TEMP_COEFF: f64 = 0.00393;
/// Slot opening of a semi-closed slot as a fraction of slot width.
pub const SEMI_CLOSED_OPENING_RATIO: f64 = 0.4;
/// End-winding length as a multiple of the coil pitch.
const END_WINDING_FACTOR: f64 = 1.2;
const MAGNET_DENSITY: f64 = 7500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Wfsm,
    Pmsm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToothTip {
    OpenSlot,
    SemiClosed,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("positive_length: {0} must be positive")]
    NonPositive(&'static str),
    #[error("tooth_width: slot_width * slot_count must be below pi * airgap_diameter")]
    ToothWidth,
    #[error(
        "radial_build: slot_depth + stator_yoke_width must be below (stator_outer_diameter - airgap_diameter) / 2"
    )]
    RadialBuild,
    #[error("rotor_build: rotor pole height plus rotor yoke width leave no shaft")]
    RotorBuild,
    #[error("pole_arc: rotor pole widths must fit within a rotor pole pitch")]
    PoleArc,
    #[error("smc_open_slot: SMC stators require open slots")]
    SmcOpenSlot,
    #[error("topology_fields: {0}")]
    TopologyFields(&'static str),
    #[error("unknown material '{0}'")]
    UnknownMaterial(String),
    #[error("parse: {0}")]
    Parse(String),
}

/// Radial-flux machine design. All lengths in metres.
///
/// The stator radial build is `tip zone + slot_depth + stator_yoke_width`;
/// the tip zone is whatever radial space the slot and yoke leave free and
/// must be positive.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineDesign {
    pub name: String,
    pub topology: Topology,
    pub pole_pairs: u32,
    pub slot_count: u32,
    pub stator_outer_diameter: f64,
    pub airgap_diameter: f64,
    pub airgap_length: f64,
    pub active_length: f64,
    pub slot_width: f64,
    pub slot_depth: f64,
    pub stator_yoke_width: f64,
    pub tooth_tip: ToothTip,
    pub turns_per_phase: u32,
    pub winding_factor: f64,
    pub slot_fill_factor: f64,
    /// [1/Hz²]
    pub ac_copper_coeff: f64,
    /// Pole-shoe arc width (wfsm) or magnet width (pmsm).
    pub rotor_pole_width: f64,
    pub rotor_pole_body_width: f64,
    pub rotor_pole_height: f64,
    pub rotor_yoke_width: f64,
    /// Extra effective gap over the interpolar region (wfsm only).
    pub interpolar_gap: f64,
    /// Field turns per pole.
    pub field_turns: Option<u32>,
    /// Field winding resistance at 20 °C [Ω].
    pub field_resistance_20c: Option<f64>,
    /// [T]
    pub magnet_remanence: Option<f64>,
    pub magnet_thickness: Option<f64>,
    pub stator_material: MaterialSpec,
    pub rotor_material: MaterialSpec,
}

/// On-disk form of [`MachineDesign`]; materials are referenced by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub name: String,
    pub topology: Topology,
    pub pole_pairs: u32,
    pub slot_count: u32,
    pub stator_outer_diameter: f64,
    pub airgap_diameter: f64,
    pub airgap_length: f64,
    pub active_length: f64,
    pub slot_width: f64,
    pub slot_depth: f64,
    pub stator_yoke_width: f64,
    pub tooth_tip: ToothTip,
    pub turns_per_phase: u32,
    #[serde(default = "default_winding_factor")]
    pub winding_factor: f64,
    #[serde(default = "default_fill")]
    pub slot_fill_factor: f64,
    pub ac_copper_coeff: f64,
    pub rotor_pole_width: f64,
    pub rotor_pole_body_width: f64,
    pub rotor_pole_height: f64,
    pub rotor_yoke_width: f64,
    #[serde(default)]
    pub interpolar_gap: f64,
    #[serde(default)]
    pub field_turns: Option<u32>,
    #[serde(default)]
    pub field_resistance_20c: Option<f64>,
    #[serde(default)]
    pub magnet_remanence: Option<f64>,
    #[serde(default)]
    pub magnet_thickness: Option<f64>,
    pub stator_material: String,
    pub rotor_material: String,
}

fn default_winding_factor() -> f64 {
    0.966
}

fn default_fill() -> f64 {
    0.45
}

impl DesignFile {
    pub fn from_toml(text: &str) -> Result<Self, DesignError> {
        toml::from_str(text).map_err(|e| DesignError::Parse(e.to_string()))
    }

    pub fn resolve(&self, library: &SurrogateGradeLibrary) -> Result<MachineDesign, DesignError> {
        let lookup = |name: &str| {
            library
                .get(name)
                .cloned()
                .ok_or_else(|| DesignError::UnknownMaterial(name.to_string()))
        };
        let d = MachineDesign {
            name: self.name.clone(),
            topology: self.topology,
            pole_pairs: self.pole_pairs,
            slot_count: self.slot_count,
            stator_outer_diameter: self.stator_outer_diameter,
            airgap_diameter: self.airgap_diameter,
            airgap_length: self.airgap_length,
            active_length: self.active_length,
            slot_width: self.slot_width,
            slot_depth: self.slot_depth,
            stator_yoke_width: self.stator_yoke_width,
            tooth_tip: self.tooth_tip,
            turns_per_phase: self.turns_per_phase,
            winding_factor: self.winding_factor,
            slot_fill_factor: self.slot_fill_factor,
            ac_copper_coeff: self.ac_copper_coeff,
            rotor_pole_width: self.rotor_pole_width,
            rotor_pole_body_width: self.rotor_pole_body_width,
            rotor_pole_height: self.rotor_pole_height,
            rotor_yoke_width: self.rotor_yoke_width,
            interpolar_gap: self.interpolar_gap,
            field_turns: self.field_turns,
            field_resistance_20c: self.field_resistance_20c,
            magnet_remanence: self.magnet_remanence,
            magnet_thickness: self.magnet_thickness,
            stator_material: lookup(&self.stator_material)?,
            rotor_material: lookup(&self.rotor_material)?,
        };
        d.validate()?;
        Ok(d)
    }
}

impl MachineDesign {
    pub fn to_file(&self) -> DesignFile {
        DesignFile {
            name: self.name.clone(),
            topology: self.topology,
            pole_pairs: self.pole_pairs,
            slot_count: self.slot_count,
            stator_outer_diameter: self.stator_outer_diameter,
            airgap_diameter: self.airgap_diameter,
            airgap_length: self.airgap_length,
            active_length: self.active_length,
            slot_width: self.slot_width,
            slot_depth: self.slot_depth,
            stator_yoke_width: self.stator_yoke_width,
            tooth_tip: self.tooth_tip,
            turns_per_phase: self.turns_per_phase,
            winding_factor: self.winding_factor,
            slot_fill_factor: self.slot_fill_factor,
            ac_copper_coeff: self.ac_copper_coeff,
            rotor_pole_width: self.rotor_pole_width,
            rotor_pole_body_width: self.rotor_pole_body_width,
            rotor_pole_height: self.rotor_pole_height,
            rotor_yoke_width: self.rotor_yoke_width,
            interpolar_gap: self.interpolar_gap,
            field_turns: self.field_turns,
            field_resistance_20c: self.field_resistance_20c,
            magnet_remanence: self.magnet_remanence,
            magnet_thickness: self.magnet_thickness,
            stator_material: self.stator_material.name.clone(),
            rotor_material: self.rotor_material.name.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        let positive = [
            ("stator_outer_diameter", self.stator_outer_diameter),
            ("airgap_diameter", self.airgap_diameter),
            ("airgap_length", self.airgap_length),
            ("active_length", self.active_length),
            ("slot_width", self.slot_width),
            ("slot_depth", self.slot_depth),
            ("stator_yoke_width", self.stator_yoke_width),
            ("rotor_pole_width", self.rotor_pole_width),
            ("rotor_pole_body_width", self.rotor_pole_body_width),
            ("rotor_pole_height", self.rotor_pole_height),
            ("rotor_yoke_width", self.rotor_yoke_width),
            ("winding_factor", self.winding_factor),
            ("slot_fill_factor", self.slot_fill_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(DesignError::NonPositive(name));
            }
        }
        if self.pole_pairs == 0 {
            return Err(DesignError::NonPositive("pole_pairs"));
        }
        if self.slot_count == 0 {
            return Err(DesignError::NonPositive("slot_count"));
        }
        if self.turns_per_phase == 0 {
            return Err(DesignError::NonPositive("turns_per_phase"));
        }
        if !(self.ac_copper_coeff >= 0.0) || !(self.interpolar_gap >= 0.0) {
            return Err(DesignError::NonPositive("ac_copper_coeff/interpolar_gap"));
        }
        if self.slot_width * self.slot_count as f64 >= PI * self.airgap_diameter {
            return Err(DesignError::ToothWidth);
        }
        if self.slot_depth + self.stator_yoke_width >= (self.stator_outer_diameter - self.airgap_diameter) / 2.0 {
            return Err(DesignError::RadialBuild);
        }
        let r_rotor = self.airgap_diameter / 2.0 - self.airgap_length;
        if r_rotor <= 0.0 || self.rotor_pole_height + self.rotor_yoke_width >= r_rotor {
            return Err(DesignError::RotorBuild);
        }
        let rotor_pitch = PI * 2.0 * r_rotor / (2 * self.pole_pairs) as f64;
        if self.rotor_pole_width >= rotor_pitch || self.rotor_pole_body_width > self.rotor_pole_width {
            return Err(DesignError::PoleArc);
        }
        if self.stator_material.kind == MaterialKind::Smc && self.tooth_tip != ToothTip::OpenSlot {
            return Err(DesignError::SmcOpenSlot);
        }
        match self.topology {
            Topology::Wfsm => {
                if !matches!(self.field_turns, Some(n) if n > 0) {
                    return Err(DesignError::TopologyFields("wfsm needs field_turns"));
                }
                if !matches!(self.field_resistance_20c, Some(r) if r > 0.0) {
                    return Err(DesignError::TopologyFields("wfsm needs field_resistance_20c"));
                }
            }
            Topology::Pmsm => {
                if !matches!(self.magnet_remanence, Some(b) if b > 0.0) {
                    return Err(DesignError::TopologyFields("pmsm needs magnet_remanence"));
                }
                if !matches!(self.magnet_thickness, Some(t) if t > 0.0) {
                    return Err(DesignError::TopologyFields("pmsm needs magnet_thickness"));
                }
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::of(self)
    }

    /// Stator phase resistance at `temp_c` [Ω].
    pub fn stator_resistance(&self, temp_c: f64) -> f64 {
        self.geometry().phase_resistance_20c * (1.0 + COPPER_TEMP_COEFF * (temp_c - 20.0))
    }

    /// Field winding resistance at `temp_c` [Ω]; zero for magnet machines.
    pub fn field_resistance(&self, temp_c: f64) -> f64 {
        self.field_resistance_20c.unwrap_or(0.0) * (1.0 + COPPER_TEMP_COEFF * (temp_c - 20.0))
    }

    /// Stator MMF per tooth group per ampere of peak phase current [A-turns/A].
    pub fn stator_mmf_per_amp(&self) -> f64 {
        3.0 / PI * self.winding_factor * self.turns_per_phase as f64 / self.pole_pairs as f64
    }

    pub fn field_mmf_per_amp(&self) -> f64 {
        self.field_turns.unwrap_or(0) as f64
    }

    /// Magnet MMF `B_r * t / mu0` [A-turns].
    pub fn magnet_mmf(&self) -> f64 {
        match (self.magnet_remanence, self.magnet_thickness) {
            (Some(br), Some(t)) => br * t / crate::materials::MU0,
            _ => 0.0,
        }
    }
}

/// Derived geometric quantities shared by the network builder and the loss model.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub r_bore: f64,
    pub r_outer: f64,
    pub r_rotor: f64,
    pub r_shaft: f64,
    pub tip_height: f64,
    pub slot_pitch: f64,
    pub slot_opening: f64,
    pub carter_factor: f64,
    pub tooth_width_bore: f64,
    pub tooth_width_mean: f64,
    pub teeth_per_group: f64,
    pub stator_magnetic_length: f64,
    pub rotor_magnetic_length: f64,
    pub stator_teeth_mass: f64,
    pub stator_yoke_mass: f64,
    pub rotor_mass: f64,
    pub magnet_mass: f64,
    pub phase_resistance_20c: f64,
}

/// Carter coefficient for slot opening `opening`, slot pitch `pitch` and gap `gap`.
pub fn carter_factor(pitch: f64, opening: f64, gap: f64) -> f64 {
    let x = opening / (2.0 * gap);
    let gamma = 4.0 / PI * (x * x.atan() - (1.0 + x * x).sqrt().ln());
    pitch / (pitch - gamma * gap)
}

impl Geometry {
    pub fn of(d: &MachineDesign) -> Self {
        let q = d.slot_count as f64;
        let p = d.pole_pairs as f64;
        let r_bore = d.airgap_diameter / 2.0;
        let r_outer = d.stator_outer_diameter / 2.0;
        let r_rotor = r_bore - d.airgap_length;
        let r_shaft = r_rotor - d.rotor_pole_height - d.rotor_yoke_width;
        let tip_height = r_outer - r_bore - d.slot_depth - d.stator_yoke_width;
        let slot_pitch = 2.0 * PI * r_bore / q;
        let slot_opening = match d.tooth_tip {
            ToothTip::OpenSlot => d.slot_width,
            ToothTip::SemiClosed => SEMI_CLOSED_OPENING_RATIO * d.slot_width,
        };
        let carter = carter_factor(slot_pitch, slot_opening, d.airgap_length);
        let tooth_width_bore = slot_pitch - d.slot_width;
        let tooth_len = tip_height + d.slot_depth;
        let tooth_width_mean = 2.0 * PI * (r_bore + tooth_len / 2.0) / q - d.slot_width;

        let ls = d
            .stator_material
            .effective_stack_properties(d.active_length)
            .magnetic_length;
        let lr = d
            .rotor_material
            .effective_stack_properties(d.active_length)
            .magnetic_length;
        let rho_s = d.stator_material.density;
        let rho_r = d.rotor_material.density;
        let stator_teeth_mass = q * tooth_width_mean * tooth_len * ls * rho_s;
        let r_yoke_in = r_outer - d.stator_yoke_width;
        let stator_yoke_mass = PI * (r_outer * r_outer - r_yoke_in * r_yoke_in) * ls * rho_s;

        let poles = 2.0 * p;
        let r_yoke_out = r_shaft + d.rotor_yoke_width;
        let yoke_area = PI * (r_yoke_out * r_yoke_out - r_shaft * r_shaft);
        let (rotor_area, magnet_mass) = match d.topology {
            Topology::Wfsm => {
                let bodies = poles * d.rotor_pole_body_width * d.rotor_pole_height;
                let shoes = poles * (d.rotor_pole_width - d.rotor_pole_body_width) * 0.25 * d.rotor_pole_height;
                (yoke_area + bodies + shoes, 0.0)
            }
            Topology::Pmsm => {
                let tm = d.magnet_thickness.unwrap_or(0.0);
                let pole_region = PI * (r_rotor * r_rotor - r_yoke_out * r_yoke_out);
                let magnets = poles * d.rotor_pole_width * tm;
                let area = yoke_area + 0.9 * pole_region - magnets;
                (area, magnets * d.active_length * MAGNET_DENSITY)
            }
        };
        let rotor_mass = rotor_area * lr * rho_r;

        let slot_cu = d.slot_fill_factor * d.slot_width * d.slot_depth;
        let n = d.turns_per_phase as f64;
        let conductor_area = q * slot_cu / (6.0 * n);
        let coil_pitch = PI * (d.airgap_diameter + 2.0 * tip_height + d.slot_depth) / poles;
        let turn_length = 2.0 * d.active_length + 2.0 * END_WINDING_FACTOR * coil_pitch;
        let phase_resistance_20c = COPPER_RESISTIVITY_20C * n * turn_length / conductor_area;

        Geometry {
            r_bore,
            r_outer,
            r_rotor,
            r_shaft,
            tip_height,
            slot_pitch,
            slot_opening,
            carter_factor: carter,
            tooth_width_bore,
            tooth_width_mean,
            teeth_per_group: q / (4.0 * p),
            stator_magnetic_length: ls,
            rotor_magnetic_length: lr,
            stator_teeth_mass,
            stator_yoke_mass,
            rotor_mass,
            magnet_mass,
            phase_resistance_20c,
        }
    }

    pub fn stator_mass(&self) -> f64 {
        self.stator_teeth_mass + self.stator_yoke_mass
    }
}

/// Machine ratings and excitation limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineRatings {
    /// [N·m]
    pub peak_torque: f64,
    /// [W]
    pub peak_power: f64,
    /// [V]
    pub rated_voltage: f64,
    /// [V]
    pub max_voltage: f64,
    /// Machine current limit [A rms].
    pub max_stator_current: f64,
    /// Inverter current rating [A rms]; informational.
    #[serde(default)]
    pub inverter_current_limit: Option<f64>,
    /// [A]
    pub max_field_current: f64,
    /// Power deliverable to the field winding through the rotating transformer [W].
    #[serde(default = "default_field_power")]
    pub max_field_power: f64,
}

fn default_field_power() -> f64 {
    8200.0
}

impl MachineRatings {
    /// WFSM M0 reference ratings.
    pub fn wfsm_m0() -> Self {
        MachineRatings {
            peak_torque: 610.0,
            peak_power: 210_000.0,
            rated_voltage: 625.0,
            max_voltage: 900.0,
            max_stator_current: 400.0,
            inverter_current_limit: Some(440.0),
            max_field_current: 32.0,
            max_field_power: 8200.0,
        }
    }

    /// Reference PMSM ratings.
    pub fn pmsm_reference() -> Self {
        MachineRatings {
            peak_torque: 450.0,
            peak_power: 270_000.0,
            rated_voltage: 625.0,
            max_voltage: 900.0,
            max_stator_current: 550.0,
            inverter_current_limit: Some(530.0),
            max_field_current: 0.0,
            max_field_power: 0.0,
        }
    }

    /// Peak stator current amplitude [A].
    pub fn max_current_peak(&self) -> f64 {
        self.max_stator_current * std::f64::consts::SQRT_2
    }

    pub fn from_toml(text: &str) -> Result<Self, DesignError> {
        let r: MachineRatings = toml::from_str(text).map_err(|e| DesignError::Parse(e.to_string()))?;
        if !(r.peak_torque > 0.0
            && r.peak_power > 0.0
            && r.rated_voltage > 0.0
            && r.max_voltage > 0.0
            && r.max_stator_current > 0.0
            && r.max_field_current >= 0.0
            && r.max_field_power >= 0.0)
        {
            return Err(DesignError::NonPositive("ratings"));
        }
        Ok(r)
    }
}
