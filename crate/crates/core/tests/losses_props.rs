use std::sync::OnceLock;

use proptest::prelude::*;
use wfsm_core::data;
use wfsm_core::losses::{inverter_losses, machine_losses, LossBreakdown, LossConfig, MachineLossModel};
use wfsm_core::magnetics::{build_flux_map, GridSpec};
use wfsm_core::{FluxLinkageMap, MachineDesign};

fn m6() -> &'static (MachineDesign, FluxLinkageMap) {
    static M: OnceLock<(MachineDesign, FluxLinkageMap)> = OnceLock::new();
    M.get_or_init(|| {
        let d = data::design("wfsm_m6");
        let map = build_flux_map(&d, &data::ratings("wfsm"), GridSpec::COARSE).unwrap();
        (d, map)
    })
}

fn model(pwm: f64) -> MachineLossModel {
    MachineLossModel::new(
        &m6().0,
        LossConfig {
            pwm_correction: pwm,
            ..LossConfig::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn total_is_component_sum(c in prop::array::uniform8(0.0..1e4f64)) {
        let l = LossBreakdown {
            iron_stator: c[0], iron_rotor: c[1], copper_dc: c[2], copper_ac: c[3],
            field_copper: c[4], transformer: c[5], inverter: c[6], gearbox: c[7],
            pwm_correction_applied: 1.0,
        };
        let mut acc = 0.0;
        for x in c {
            acc += x;
        }
        prop_assert_eq!(l.total(), acc);
    }

    #[test]
    fn sign_flip_evenness(mag in 0.0..560.0f64, angle in 0.0..std::f64::consts::TAU, w in 10.0..1200.0f64) {
        let (d, map) = m6();
        let (i_d, i_q) = (mag * angle.cos(), mag * angle.sin());
        let cfg = LossConfig::default();
        let a = machine_losses(d, map, i_d, i_q, 0.0, w, &cfg).unwrap();
        let b = machine_losses(d, map, -i_d, -i_q, 0.0, w, &cfg).unwrap();
        prop_assert_eq!(a.copper_dc, b.copper_dc);
        prop_assert_eq!(a.copper_ac, b.copper_ac);
        prop_assert!((a.iron_stator - b.iron_stator).abs() <= 1e-9 * a.iron_stator.max(1.0));
        prop_assert!((a.iron_rotor - b.iron_rotor).abs() <= 1e-9 * a.iron_rotor.max(1.0));
    }

    #[test]
    fn copper_monotone_in_current(i in 0.0..500.0f64, di in 0.0..100.0f64, w in 0.0..1200.0f64) {
        let m = model(1.05);
        let a = m.evaluate(1.0, 1.0, 0.1, 0.0, i, 10.0, w).unwrap();
        let b = m.evaluate(1.0, 1.0, 0.1, 0.0, i + di, 10.0, w).unwrap();
        prop_assert!(b.copper_dc >= a.copper_dc);
        prop_assert!(b.copper_ac >= a.copper_ac);
    }

    #[test]
    fn iron_monotone_in_speed(bt in 0.0..2.0f64, by in 0.0..2.0f64, br in 0.0..0.3f64, w in 0.0..1200.0f64, dw in 0.0..300.0f64) {
        let m = model(1.05);
        let a = m.evaluate(bt, by, br, 0.0, 0.0, 0.0, w).unwrap();
        let b = m.evaluate(bt, by, br, 0.0, 0.0, 0.0, w + dw).unwrap();
        prop_assert!(b.iron_stator >= a.iron_stator);
        prop_assert!(b.iron_rotor >= a.iron_rotor);
    }

    #[test]
    fn switching_monotone_in_frequency(i in 0.0..450.0f64, f in 0.0..40e3f64, df in 0.0..10e3f64) {
        let inv = data::inverter("sic");
        prop_assert!(inverter_losses(i, 800.0, f + df, &inv) >= inverter_losses(i, 800.0, f, &inv));
    }

    #[test]
    fn pwm_factor_scales_iron_and_stator_copper(
        k in 1.0..1.2f64,
        bt in 0.0..2.0f64,
        i_q in 0.0..560.0f64,
        i_f in 0.0..20.0f64,
        w in 0.0..1200.0f64,
    ) {
        let plain = model(1.0).evaluate(bt, bt * 0.7, 0.05, -50.0, i_q, i_f, w).unwrap();
        let corrected = model(k).evaluate(bt, bt * 0.7, 0.05, -50.0, i_q, i_f, w).unwrap();
        prop_assert_eq!(corrected.iron_stator, plain.iron_stator * k);
        prop_assert_eq!(corrected.iron_rotor, plain.iron_rotor * k);
        prop_assert_eq!(corrected.copper_dc, plain.copper_dc * k);
        prop_assert_eq!(corrected.copper_ac, plain.copper_ac * k);
        prop_assert_eq!(corrected.field_copper, plain.field_copper);
        prop_assert_eq!(corrected.transformer, plain.transformer);
    }
}

#[test]
fn unit_pwm_reproduces_uncorrected_terms() {
    let m = model(1.0);
    let l = m.evaluate(1.2, 1.0, 0.05, -100.0, 300.0, 12.0, 600.0).unwrap();
    let f = 4.0 * 600.0 / std::f64::consts::TAU;
    let stator = m.stator.iron_loss_density(1.2, f).unwrap() * m.stator_teeth_mass
        + m.stator.iron_loss_density(1.0, f).unwrap() * m.stator_yoke_mass;
    assert_eq!(l.iron_stator, stator);
    assert_eq!(l.copper_dc, 3.0 * (100.0f64.powi(2) + 300.0f64.powi(2)) / 2.0 * m.r_s);
}

#[test]
fn wfsm_no_load_is_lossless_at_every_speed() {
    let (d, map) = m6();
    for w in [0.0, 50.0, 500.0, 1500.0] {
        let l = machine_losses(d, map, 0.0, 0.0, 0.0, w, &LossConfig::default()).unwrap();
        assert_eq!(l.total(), 0.0);
    }
}

#[test]
fn field_power_over_limit_is_error() {
    let m = MachineLossModel::new(
        &m6().0,
        LossConfig {
            max_field_power: 10.0,
            ..LossConfig::default()
        },
    );
    assert!(m.evaluate(0.0, 0.0, 0.0, 0.0, 0.0, 30.0, 100.0).is_err());
}
