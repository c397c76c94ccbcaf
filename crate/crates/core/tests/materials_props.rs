use proptest::prelude::*;
use wfsm_core::materials::{MaterialKind, MaterialSpec, SurrogateGradeLibrary, MU0};

fn grades() -> Vec<MaterialSpec> {
    SurrogateGradeLibrary::shipped().grades.into_values().collect()
}

fn grade_index() -> impl Strategy<Value = usize> {
    0..grades().len()
}

proptest! {
    #[test]
    fn bh_lookup_is_monotone(g in grade_index(), h1 in 0.0..3.0e5f64, dh in 0.0..1.0e5f64) {
        let m = &grades()[g];
        let b1 = m.bh_lookup(h1).unwrap();
        let b2 = m.bh_lookup(h1 + dh).unwrap();
        prop_assert!(b2 >= b1);
    }

    #[test]
    fn differential_permeability_at_least_mu0(g in grade_index(), h in 0.0..4.0e5f64) {
        let m = &grades()[g];
        let (_, slope) = m.flux_density(h);
        let last = m.bh_curve.last().unwrap()[0];
        if h >= last {
            prop_assert_eq!(slope, MU0);
        } else {
            prop_assert!(slope >= MU0);
        }
    }

    #[test]
    fn iron_loss_monotone_in_b_and_f(
        g in grade_index(),
        b in 0.0..2.2f64,
        db in 0.0..0.5f64,
        f in 0.0..2000.0f64,
        df in 0.0..500.0f64,
    ) {
        let m = &grades()[g];
        let p = m.iron_loss_density(b, f).unwrap();
        prop_assert!(m.iron_loss_density(b + db, f).unwrap() >= p);
        prop_assert!(m.iron_loss_density(b, f + df).unwrap() >= p);
    }

    #[test]
    fn iron_loss_zero_iff_b_or_f_zero(g in grade_index(), b in 1e-6..2.2f64, f in 1e-3..2000.0f64) {
        let m = &grades()[g];
        prop_assert_eq!(m.iron_loss_density(0.0, f).unwrap(), 0.0);
        prop_assert_eq!(m.iron_loss_density(b, 0.0).unwrap(), 0.0);
        prop_assert!(m.iron_loss_density(b, f).unwrap() > 0.0);
    }

    #[test]
    fn eddy_ratio_is_thickness_squared(
        d1 in 0.1e-3..0.5e-3f64,
        d2 in 0.1e-3..0.5e-3f64,
        b in 0.05..2.0f64,
        f in 1.0..1500.0f64,
    ) {
        let base = SurrogateGradeLibrary::shipped().get("NO25-like").unwrap().clone();
        let a = MaterialSpec { thickness: Some(d1), ..base.clone() };
        let c = MaterialSpec { thickness: Some(d2), ..base };
        let ea = a.iron_loss_components(b, f).unwrap().eddy;
        let ec = c.iron_loss_components(b, f).unwrap().eddy;
        let expected = (d2 / d1) * (d2 / d1);
        prop_assert!((ec / ea - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn smc_rejects_stacking_below_one(sf in 0.90..0.9999f64) {
        for m in grades().into_iter().filter(|m| m.kind == MaterialKind::Smc) {
            prop_assert_eq!(m.stacking_factor, 1.0);
            let bad = MaterialSpec { stacking_factor: sf, ..m };
            prop_assert!(bad.validate().is_err());
        }
    }
}

#[test]
fn negative_inputs_are_domain_errors() {
    let m = &grades()[0];
    assert!(m.bh_lookup(-1.0).is_err());
    assert!(m.iron_loss_density(-0.1, 50.0).is_err());
    assert!(m.iron_loss_density(1.0, -50.0).is_err());
}

#[test]
fn shipped_thicknesses() {
    let lib = SurrogateGradeLibrary::shipped();
    assert_eq!(lib.get("NO35-like").unwrap().thickness, Some(0.35e-3));
    assert_eq!(lib.get("NO25-like").unwrap().thickness, Some(0.25e-3));
}
