//! Soft-magnetic material models.
//!
//! A [`MaterialSpec`] carries a monotone B-H curve and three-term loss
//! separation coefficients (hysteresis, classical eddy, excess). Laminated
//! steels scale the eddy term with the square of the sheet thickness and lose
//! part of the stack length to insulation; soft magnetic composites have no
//! stacking penalty and a particle-level eddy term.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vacuum permeability [H/m].
pub const MU0: f64 = 4.0e-7 * PI;

/// Reference sheet thickness for `k_e_ref` [m].
pub const EDDY_REFERENCE_THICKNESS: f64 = 0.25e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    Laminated,
    Smc,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("bh_curve: needs at least two points, got {0}")]
    BhTooShort(usize),
    #[error("bh_origin: first B-H point must be (0, 0), got ({h}, {b})")]
    BhOrigin { h: f64, b: f64 },
    #[error("bh_monotone: B-H curve not strictly increasing at knot {index}")]
    BhNonMonotone { index: usize },
    #[error("bh_min_slope: segment ending at knot {index} has slope below mu0")]
    BhSlopeBelowVacuum { index: usize },
    #[error("stacking_factor_range: {0} outside [0.90, 1.0]")]
    StackingFactorRange(f64),
    #[error("smc_stacking_factor: SMC grades must have stacking factor 1.0, got {0}")]
    SmcStackingFactor(f64),
    #[error("coefficient_sign: {0} must be non-negative")]
    NegativeCoefficient(&'static str),
    #[error("alpha_range: Steinmetz exponent {0} outside [1.5, 2.5]")]
    AlphaRange(f64),
    #[error("lamination_thickness: laminated grades need a positive thickness")]
    MissingThickness,
    #[error("density: must be positive, got {0}")]
    Density(f64),
    #[error("domain: {what} must be non-negative, got {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("parse: {0}")]
    Parse(String),
}

/// Soft-magnetic material.
///
/// Units: `bh_curve` rows are (H [A/m], B [T]); `k_h` [W·s/kg/T^alpha];
/// `k_e_ref` [W·s²/kg/T²] at [`EDDY_REFERENCE_THICKNESS`]; `k_exc`
/// [W·s^1.5/kg/T^1.5]; `thickness` [m]; `density` [kg/m³]; `cost` [currency/kg].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub name: String,
    pub kind: MaterialKind,
    pub k_h: f64,
    pub alpha: f64,
    pub k_e_ref: f64,
    pub k_exc: f64,
    #[serde(default)]
    pub thickness: Option<f64>,
    pub stacking_factor: f64,
    pub density: f64,
    pub cost: f64,
    pub bh_curve: Vec<[f64; 2]>,
}

/// Loss density split into its three physical terms [W/kg].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IronLossComponents {
    pub hysteresis: f64,
    pub eddy: f64,
    pub excess: f64,
}

impl IronLossComponents {
    pub fn total(&self) -> f64 {
        self.hysteresis + self.eddy + self.excess
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackProperties {
    /// Length of magnetic material in the stack [m].
    pub magnetic_length: f64,
    /// Core mass per unit of lamination face area [kg/m²].
    pub core_mass_per_area: f64,
}

impl MaterialSpec {
    pub fn from_toml(text: &str) -> Result<Self, MaterialError> {
        let spec: MaterialSpec = toml::from_str(text).map_err(|e| MaterialError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Checks every material invariant; the first violation is returned.
    pub fn validate(&self) -> Result<(), MaterialError> {
        let curve = &self.bh_curve;
        if curve.len() < 2 {
            return Err(MaterialError::BhTooShort(curve.len()));
        }
        if curve[0] != [0.0, 0.0] {
            return Err(MaterialError::BhOrigin {
                h: curve[0][0],
                b: curve[0][1],
            });
        }
        for i in 1..curve.len() {
            let [h0, b0] = curve[i - 1];
            let [h1, b1] = curve[i];
            if !(h1 > h0 && b1 > b0) {
                return Err(MaterialError::BhNonMonotone { index: i });
            }
            if (b1 - b0) / (h1 - h0) < MU0 {
                return Err(MaterialError::BhSlopeBelowVacuum { index: i });
            }
        }
        if !(0.90..=1.0).contains(&self.stacking_factor) {
            return Err(MaterialError::StackingFactorRange(self.stacking_factor));
        }
        if self.kind == MaterialKind::Smc && self.stacking_factor != 1.0 {
            return Err(MaterialError::SmcStackingFactor(self.stacking_factor));
        }
        for (name, v) in [("k_h", self.k_h), ("k_e_ref", self.k_e_ref), ("k_exc", self.k_exc)] {
            if !(v >= 0.0) {
                return Err(MaterialError::NegativeCoefficient(name));
            }
        }
        if !(1.5..=2.5).contains(&self.alpha) {
            return Err(MaterialError::AlphaRange(self.alpha));
        }
        if self.kind == MaterialKind::Laminated && !matches!(self.thickness, Some(t) if t > 0.0) {
            return Err(MaterialError::MissingThickness);
        }
        if !(self.density > 0.0) {
            return Err(MaterialError::Density(self.density));
        }
        if !(self.cost >= 0.0) {
            return Err(MaterialError::NegativeCoefficient("cost"));
        }
        Ok(())
    }

    /// Flux density for a non-negative field strength.
    pub fn bh_lookup(&self, h: f64) -> Result<f64, MaterialError> {
        if !(h >= 0.0) {
            return Err(MaterialError::Domain {
                what: "field strength",
                value: h,
            });
        }
        Ok(self.flux_density(h).0)
    }

    /// Odd extension of the B-H curve: returns `(B, dB/dH)` for any signed `h`.
    ///
    /// At a knot the slope of the segment to the right is reported. Past the
    /// last knot the curve continues with slope `MU0`.
    pub fn flux_density(&self, h: f64) -> (f64, f64) {
        let sign = if h < 0.0 { -1.0 } else { 1.0 };
        let x = h.abs();
        let curve = &self.bh_curve;
        let last = curve.len() - 1;
        if x >= curve[last][0] {
            let [hl, bl] = curve[last];
            return (sign * (bl + MU0 * (x - hl)), MU0);
        }
        // index of the first knot strictly to the right of x
        let j = curve.partition_point(|p| p[0] <= x);
        let [h0, b0] = curve[j - 1];
        let [h1, b1] = curve[j];
        let slope = (b1 - b0) / (h1 - h0);
        (sign * (b0 + slope * (x - h0)), slope)
    }

    /// Magnetic co-energy density `∫0^|h| B dh` [J/m³].
    pub fn coenergy_density(&self, h: f64) -> f64 {
        let x = h.abs();
        let curve = &self.bh_curve;
        let mut acc = 0.0;
        for w in curve.windows(2) {
            let [h0, b0] = w[0];
            let [h1, b1] = w[1];
            if x <= h1 {
                let slope = (b1 - b0) / (h1 - h0);
                let dx = x - h0;
                return acc + b0 * dx + 0.5 * slope * dx * dx;
            }
            acc += 0.5 * (b0 + b1) * (h1 - h0);
        }
        let [hl, bl] = curve[curve.len() - 1];
        let dx = x - hl;
        acc + bl * dx + 0.5 * MU0 * dx * dx
    }

    /// Eddy coefficient after thickness scaling.
    pub fn eddy_coefficient(&self) -> f64 {
        match (self.kind, self.thickness) {
            (MaterialKind::Laminated, Some(t)) => {
                let r = t / EDDY_REFERENCE_THICKNESS;
                self.k_e_ref * r * r
            }
            _ => self.k_e_ref,
        }
    }

    pub fn iron_loss_components(&self, b_peak: f64, f: f64) -> Result<IronLossComponents, MaterialError> {
        if !(b_peak >= 0.0) {
            return Err(MaterialError::Domain {
                what: "peak flux density",
                value: b_peak,
            });
        }
        if !(f >= 0.0) {
            return Err(MaterialError::Domain {
                what: "frequency",
                value: f,
            });
        }
        Ok(self.loss_terms(b_peak, f))
    }

    /// Total iron loss density [W/kg] at sinusoidal peak flux density `b_peak`.
    pub fn iron_loss_density(&self, b_peak: f64, f: f64) -> Result<f64, MaterialError> {
        self.iron_loss_components(b_peak, f).map(|c| c.total())
    }

    pub(crate) fn loss_terms(&self, b: f64, f: f64) -> IronLossComponents {
        if b == 0.0 || f == 0.0 {
            return IronLossComponents::default();
        }
        IronLossComponents {
            hysteresis: self.k_h * f * b.powf(self.alpha),
            eddy: self.eddy_coefficient() * f * f * b * b,
            excess: self.k_exc * (f * b).powf(1.5),
        }
    }

    pub fn effective_stack_properties(&self, gross_length: f64) -> StackProperties {
        let magnetic_length = match self.kind {
            MaterialKind::Smc => gross_length,
            MaterialKind::Laminated => self.stacking_factor * gross_length,
        };
        StackProperties {
            magnetic_length,
            core_mass_per_area: self.density * magnetic_length,
        }
    }

    /// Ideal linear material with relative permeability `mu_r`, used for
    /// closed-form circuit checks. The single knot sits far above any field
    /// the network can reach.
    pub fn linear(name: &str, mu_r: f64) -> Self {
        let h = 1.0e12;
        MaterialSpec {
            name: name.to_string(),
            kind: MaterialKind::Smc,
            k_h: 0.0,
            alpha: 2.0,
            k_e_ref: 0.0,
            k_exc: 0.0,
            thickness: None,
            stacking_factor: 1.0,
            density: 7600.0,
            cost: 1.0,
            bh_curve: vec![[0.0, 0.0], [h, MU0 * mu_r * h]],
        }
    }
}

/// The shipped surrogate grades, keyed by name.
#[derive(Debug, Clone)]
pub struct SurrogateGradeLibrary {
    pub grades: BTreeMap<String, MaterialSpec>,
}

pub const NO25: &str = "NO25-like";
pub const NO35: &str = "NO35-like";
pub const SMC_A: &str = "SMC-A-like";
pub const SMC_B: &str = "SMC-B-like";
pub const SMC_C: &str = "SMC-C-like";

impl SurrogateGradeLibrary {
    pub fn shipped() -> Self {
        let mut grades = BTreeMap::new();
        for (_, text) in crate::data::MATERIAL_FILES {
            let spec = MaterialSpec::from_toml(text).expect("shipped material file is valid");
            grades.insert(spec.name.clone(), spec);
        }
        SurrogateGradeLibrary { grades }
    }

    pub fn get(&self, name: &str) -> Option<&MaterialSpec> {
        self.grades.get(name)
    }

    pub fn insert(&mut self, spec: MaterialSpec) {
        self.grades.insert(spec.name.clone(), spec);
    }
}
