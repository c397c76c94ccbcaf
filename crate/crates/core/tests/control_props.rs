use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wfsm_core::control::{mtpa_solve, mtpl_solve, Drive};
use wfsm_core::data;
use wfsm_core::magnetics::{build_flux_map, GridSpec};
use wfsm_core::LossConfig;

fn m6() -> &'static Drive {
    static D: OnceLock<Drive> = OnceLock::new();
    D.get_or_init(|| {
        let d = data::design("wfsm_m6");
        let r = data::ratings("wfsm");
        let map = build_flux_map(&d, &r, GridSpec::COARSE).unwrap();
        Drive::new(&d, map, r, LossConfig::default()).with_inverter(data::inverter("sic"))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn min_loss_nondecreasing_in_torque(t in 5.0..250.0f64, dt in 1.0..100.0f64, n in 500.0..7000.0f64, sign in prop::bool::ANY) {
        let s = if sign { 1.0 } else { -1.0 };
        let a = mtpl_solve(m6(), s * t, n, 800.0).unwrap();
        let b = mtpl_solve(m6(), s * (t + dt), n, 800.0).unwrap();
        prop_assert!(b.losses.total() >= a.losses.total() * (1.0 - 1e-3));
    }

    #[test]
    fn solve_is_deterministic(t in -250.0..250.0f64, n in 0.0..9000.0f64) {
        let a = mtpl_solve(m6(), t, n, 800.0);
        let b = mtpl_solve(m6(), t, n, 800.0);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn solution_balances_and_meets_torque(t in -250.0..250.0f64, n in 100.0..9000.0f64) {
        if let Ok(s) = mtpl_solve(m6(), t, n, 800.0) {
            prop_assert_eq!(s.electrical_input_power, s.shaft_power + s.losses.total());
            prop_assert!((s.torque_achieved - t).abs() <= (0.1f64).max(1e-3 * t.abs()));
            prop_assert!(s.i_d.hypot(s.i_q) <= m6().current_limit() * (1.0 + 1e-12));
            prop_assert!((0.0..=m6().field_limit()).contains(&s.i_f));
            if s.shaft_power > 0.0 {
                let eta = s.efficiency.unwrap();
                prop_assert!(eta > 0.0 && eta <= 1.0);
            }
        }
    }
}

#[test]
fn zero_torque_is_lossless_no_load() {
    let s = mtpl_solve(m6(), 0.0, 3000.0, 800.0).unwrap();
    assert_eq!((s.i_d, s.i_q, s.i_f), (0.0, 0.0, 0.0));
    assert_eq!(s.losses.machine_electromagnetic(), 0.0);
}

#[test]
fn unreachable_torque_reports_max() {
    let err = mtpl_solve(m6(), 5000.0, 2000.0, 800.0).unwrap_err();
    assert!(err.to_string().contains("not reachable"));
}

#[test]
fn mtpa_uses_peak_field_at_least_as_often() {
    let drive = m6();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let peak = drive.field_limit() * (1.0 - 1e-6);
    let (mut mtpa, mut mtpl, mut points) = (0, 0, 0);
    while points < 50 {
        let t = rng.random_range(80.0..300.0);
        let n = rng.random_range(500.0..6000.0);
        let (Ok(a), Ok(l)) = (mtpa_solve(drive, t, n, 800.0), mtpl_solve(drive, t, n, 800.0)) else {
            continue;
        };
        points += 1;
        mtpa += (a.i_f >= peak) as usize;
        mtpl += (l.i_f >= peak) as usize;
    }
    assert!(mtpa >= mtpl, "mtpa {mtpa} mtpl {mtpl}");
}
