//! Total business value of a candidate.

use serde::{Deserialize, Serialize};

use super::OptimizeError;

/// Currency coefficients. Every field is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Economics {
    /// Value of one percentage point of cycle efficiency.
    pub value_per_pp_wltp: f64,
    /// Reference cycle efficiency (fraction).
    pub eta_ref: f64,
    /// Value per N·m of peak torque above `torque_ref`.
    pub value_per_nm: f64,
    /// [N·m]
    pub torque_ref: f64,
    /// Multiplier on the per-kg core material prices.
    pub material_price_factor: f64,
    /// [currency/kg]
    pub magnet_cost_per_kg: f64,
    pub production_adder_laminated: f64,
    pub production_adder_smc: f64,
}

impl Economics {
    pub fn from_toml(text: &str) -> Result<Self, OptimizeError> {
        let e: Economics = toml::from_str(text).map_err(|e| OptimizeError::Config(format!("economics: {e}")))?;
        for (name, v) in [
            ("value_per_pp_wltp", e.value_per_pp_wltp),
            ("value_per_nm", e.value_per_nm),
            ("torque_ref", e.torque_ref),
            ("material_price_factor", e.material_price_factor),
            ("magnet_cost_per_kg", e.magnet_cost_per_kg),
            ("production_adder_laminated", e.production_adder_laminated),
            ("production_adder_smc", e.production_adder_smc),
        ] {
            if !(v >= 0.0) {
                return Err(OptimizeError::Config(format!("economics: {name} must be non-negative")));
            }
        }
        if !(e.eta_ref > 0.0 && e.eta_ref < 1.0) {
            return Err(OptimizeError::Config("economics: eta_ref must be in (0, 1)".into()));
        }
        Ok(e)
    }

    /// Every currency coefficient multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Economics {
        Economics {
            value_per_pp_wltp: self.value_per_pp_wltp * c,
            value_per_nm: self.value_per_nm * c,
            material_price_factor: self.material_price_factor * c,
            magnet_cost_per_kg: self.magnet_cost_per_kg * c,
            production_adder_laminated: self.production_adder_laminated * c,
            production_adder_smc: self.production_adder_smc * c,
            ..self.clone()
        }
    }
}

/// Physical quantities the score needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TbvInputs {
    pub eta_wltp: f64,
    pub peak_torque: f64,
    /// [kg]
    pub stator_core_mass: f64,
    /// Material list price [currency/kg].
    pub stator_price: f64,
    pub rotor_core_mass: f64,
    pub rotor_price: f64,
    pub magnet_mass: f64,
    pub smc_stator: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TbvBreakdown {
    pub efficiency_value: f64,
    pub torque_value: f64,
    pub core_material_cost: f64,
    pub magnet_cost: f64,
    pub production_adder: f64,
    pub total: f64,
}

pub fn tbv_score(x: &TbvInputs, e: &Economics) -> TbvBreakdown {
    let efficiency_value = e.value_per_pp_wltp * (x.eta_wltp - e.eta_ref) * 100.0;
    let torque_value = e.value_per_nm * (x.peak_torque - e.torque_ref).max(0.0);
    let core_material_cost =
        e.material_price_factor * (x.stator_core_mass * x.stator_price + x.rotor_core_mass * x.rotor_price);
    let magnet_cost = e.magnet_cost_per_kg * x.magnet_mass;
    let production_adder = if x.smc_stator {
        e.production_adder_smc
    } else {
        e.production_adder_laminated
    };
    TbvBreakdown {
        efficiency_value,
        torque_value,
        core_material_cost,
        magnet_cost,
        production_adder,
        total: efficiency_value + torque_value - core_material_cost - magnet_cost - production_adder,
    }
}
