//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Pass criterion numbers as arguments to run
//! a subset; set `WLTP_CSV` to a `time_s,speed_kmh` file to replace the
//! shipped cycle.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wfsm_core::control::{build_efficiency_map, MapGrid};
use wfsm_core::control::{Drive, Strategy};
use wfsm_core::data;
use wfsm_core::losses::machine_losses;
use wfsm_core::magnetics::fluxmap::solve_point;
use wfsm_core::magnetics::network::{BranchKind, BranchLaw};
use wfsm_core::magnetics::{build_flux_map, build_reluctance_network, GridSpec, MachineDesign};
use wfsm_core::materials::{MaterialSpec, NO25, NO35};
use wfsm_core::optimize::pareto::dominates;
use wfsm_core::optimize::{
    archive_csv, nsga2_run, run_optimization, BenchmarkProblem, DesignProblem, EduContext, GaConfig,
};
use wfsm_core::powertrain::{
    cruise_efficiency, demand_trace, energy_histogram, run_cycle, DriveCycle, Edu, HistogramMode,
};
use wfsm_core::{pareto_front, LossConfig, SurrogateGradeLibrary};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

const DESIGNS: [(&str, &str); 3] = [("wfsm_m0", "wfsm"), ("wfsm_m6", "wfsm"), ("pmsm", "pmsm")];
const RATED_DC: f64 = 625.0;

fn drive(design: &str, ratings: &str, grid: GridSpec) -> Drive {
    let d = data::design(design);
    let r = data::ratings(ratings);
    let map = build_flux_map(&d, &r, grid).unwrap();
    Drive::new(&d, map, r, LossConfig::default()).with_inverter(data::inverter("sic"))
}

fn cycle() -> (DriveCycle, String) {
    match std::env::var("WLTP_CSV") {
        Ok(path) => {
            let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
            (DriveCycle::from_csv(&text).unwrap(), path)
        }
        Err(_) => (data::cycle("synthetic_class3"), "shipped synthetic cycle".into()),
    }
}

fn wfsm_context(cycle: DriveCycle) -> EduContext {
    EduContext {
        inverter: data::inverter("sic"),
        gear: data::gear("single_stage"),
        vehicle: data::vehicle("sedan").with_gear_ratio(7.0),
        cycle,
        strategy: Strategy::Mtpl,
    }
}

fn pmsm_context(cycle: DriveCycle) -> EduContext {
    EduContext {
        inverter: data::inverter("sic"),
        gear: data::gear("two_stage"),
        vehicle: data::vehicle("sedan").with_gear_ratio(9.5),
        cycle,
        strategy: Strategy::Mtpa,
    }
}

fn objective(strategy: Strategy, s: &wfsm_core::ControlSolution) -> f64 {
    match strategy {
        Strategy::Mtpl => s.losses.total(),
        Strategy::Mtpa => s.current_magnitude(),
    }
}

/// Exhaustive search: 101 i_d values by 33 i_f values; along each line the
/// smallest |i_q| meeting the torque is found by a 100-point scan and bisection.
fn grid_oracle(d: &Drive, strategy: Strategy, torque: f64, rpm: f64, v_dc: f64) -> Option<f64> {
    let i_max = d.current_limit();
    let f_max = d.field_limit();
    let nf = if f_max > 0.0 { 33 } else { 1 };
    let sign = torque.signum();
    let mut best: Option<f64> = None;
    for a in 0..101 {
        let i_d = -i_max + 2.0 * i_max * a as f64 / 100.0;
        let iq_max = (i_max * i_max - i_d * i_d).max(0.0).sqrt();
        for c in 0..nf {
            let i_f = if nf > 1 { f_max * c as f64 / 32.0 } else { 0.0 };
            let short = |iq: f64| sign * (d.map.torque(i_d, iq, i_f).unwrap() - torque);
            let mut lo = 0.0;
            let mut hi = None;
            for k in 1..=100 {
                let iq = sign * iq_max * k as f64 / 100.0;
                if short(iq) >= 0.0 {
                    hi = Some(iq);
                    break;
                }
                lo = iq;
            }
            let Some(mut hi) = hi else { continue };
            for _ in 0..80 {
                let m = 0.5 * (lo + hi);
                if short(m) >= 0.0 {
                    hi = m;
                } else {
                    lo = m;
                }
            }
            if let Some(s) = d.evaluate(i_d, hi, i_f, rpm, v_dc) {
                let obj = objective(strategy, &s);
                if best.is_none_or(|b| obj < b) {
                    best = Some(obj);
                }
            }
        }
    }
    best
}

fn oracle_equivalence(strategy: Strategy) -> Outcome {
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    let mut pass = true;
    for (k, (name, ratings)) in DESIGNS.iter().enumerate() {
        let d = drive(name, ratings, GridSpec::DEFAULT);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + k as u64);
        let mut checked = 0;
        while checked < 20 {
            let rpm = rng.random_range(200.0..9000.0);
            let t_max = d.max_torque(rpm, RATED_DC, 1.0);
            let torque = rng.random_range(0.02..0.95) * t_max * if rng.random_bool(0.25) { -1.0 } else { 1.0 };
            let Ok(s) = d.solve(strategy, torque, rpm, RATED_DC) else {
                continue;
            };
            checked += 1;
            let obj = objective(strategy, &s);
            if let Some(o) = grid_oracle(&d, strategy, torque, rpm, RATED_DC) {
                let ratio = obj / o;
                worst = worst.max(ratio);
                if ratio > 1.001 {
                    pass = false;
                    notes.push(format!("{name} {torque:.1} N·m @ {rpm:.0} rpm ratio {ratio:.5}"));
                }
            }
        }
    }
    let mut detail = format!("60 points, worst solver/oracle {worst:.5}");
    if !notes.is_empty() {
        detail.push_str(&format!("; {}", notes.join("; ")));
    }
    outcome(pass, detail)
}

fn c1() -> Outcome {
    oracle_equivalence(Strategy::Mtpl)
}

fn c2() -> Outcome {
    oracle_equivalence(Strategy::Mtpa)
}

fn c3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<[f64; 2]> = (0..1000)
        .map(|i| {
            if i % 2 == 0 {
                [rng.random_range(0..40) as f64, rng.random_range(0..40) as f64]
            } else {
                [rng.random(), rng.random()]
            }
        })
        .collect();
    let oracle: Vec<usize> = (0..points.len())
        .filter(|&i| !points.iter().any(|&q| dominates(q, points[i])))
        .collect();
    let random_ok = pareto_front(&points) == oracle;

    let table = [
        ("M0", 90.7, 94.8),
        ("M1", 89.7, 93.6),
        ("M2", 90.5, 94.6),
        ("M3", 91.0, 94.9),
        ("M4", 89.9, 93.6),
        ("M5", 91.3, 94.6),
        ("M6", 91.5, 94.8),
    ];
    let pts: Vec<[f64; 2]> = table.iter().map(|r| [r.1, r.2]).collect();
    let front: Vec<&str> = pareto_front(&pts).into_iter().map(|i| table[i].0).collect();
    let table_ok = front == ["M3", "M6"];
    outcome(
        random_ok && table_ok,
        format!("1000 random points match oracle: {random_ok}; benchmark table front {front:?}"),
    )
}

fn c4() -> Outcome {
    let (cyc, source) = cycle();
    let ctx = wfsm_context(cyc);
    let edu = ctx
        .edu(
            "wfsm_m6",
            &data::design("wfsm_m6"),
            &data::ratings("wfsm"),
            GridSpec::DEFAULT,
        )
        .unwrap();
    let r = run_cycle(&demand_trace(&ctx.cycle, &ctx.vehicle), &edu, &ctx.vehicle).unwrap();
    let mut bad_steps = 0;
    let mut solved = 0;
    for s in &r.steps {
        if s.motor_speed_rpm == 0.0 && s.motor_torque == 0.0 {
            continue;
        }
        solved += 1;
        if s.input_power != s.output_power + s.losses.total() {
            bad_steps += 1;
        }
    }
    let t = &r.totals;
    let aggregate = t.net_output_energy + t.loss_energy.total();
    let aggregate_ok = (aggregate - t.net_input_energy).abs() <= 1e-9 * t.net_input_energy.abs();

    let map = build_efficiency_map(
        &edu.drive,
        Strategy::Mtpl,
        &MapGrid::uniform(-300.0, 600.0, 19, 12000.0, 13),
        800.0,
    );
    let mut bad_cells = 0;
    let mut cells = 0;
    for s in map.solutions.iter().flatten() {
        cells += 1;
        if s.electrical_input_power != s.shaft_power + s.losses.total() {
            bad_cells += 1;
        }
    }
    outcome(
        bad_steps == 0 && bad_cells == 0 && aggregate_ok,
        format!(
            "{source}: {solved} solved steps, {bad_steps} mismatched; {cells} map cells, {bad_cells} mismatched; aggregate ok: {aggregate_ok}"
        ),
    )
}

fn c5() -> Outcome {
    let lib = SurrogateGradeLibrary::shipped();
    let (thick, thin) = (lib.get(NO35).unwrap(), lib.get(NO25).unwrap());
    let mut worst = 0.0f64;
    for b in [0.1, 0.5, 1.0, 1.5, 1.9] {
        for f in [10.0, 50.0, 400.0, 1000.0, 2000.0] {
            let r = thick.iron_loss_components(b, f).unwrap().eddy / thin.iron_loss_components(b, f).unwrap().eddy;
            worst = worst.max((r - 1.96).abs());
        }
    }
    outcome(worst <= 1e-9, format!("max |ratio - 1.96| = {worst:.2e}"))
}

fn c6() -> Outcome {
    let mut worst = 0.0f64;
    for name in ["wfsm_m0", "wfsm_m6"] {
        let design = data::design(name);
        let d = drive(name, "wfsm", GridSpec::DEFAULT);
        for rpm in [0.0, 1.0, 1500.0, 5500.0, 10000.0, 16000.0] {
            let w = rpm * std::f64::consts::PI / 30.0;
            let direct = machine_losses(&design, &d.map, 0.0, 0.0, 0.0, w, &LossConfig::default()).unwrap();
            let s = d.evaluate(0.0, 0.0, 0.0, rpm, 800.0).unwrap();
            worst = worst.max(direct.total()).max(s.losses.machine_electromagnetic());
        }
    }
    outcome(worst == 0.0, format!("largest no-load loss {worst} W"))
}

fn c7() -> Outcome {
    let mut worst = 0.0f64;
    for (name, ratings) in DESIGNS {
        let map = build_flux_map(&data::design(name), &data::ratings(ratings), GridSpec::DEFAULT).unwrap();
        let nq = map.iq_axis.len();
        for a in 0..map.id_axis.len() {
            for b in 0..nq {
                for c in 0..map.if_axis.len() {
                    let (i, j) = (map.index(a, b, c), map.index(a, nq - 1 - b, c));
                    worst = worst.max((map.psi_d[i] - map.psi_d[j]).abs());
                    worst = worst.max((map.psi_q[i] + map.psi_q[j]).abs());
                }
            }
        }
    }
    outcome(worst <= 1e-12, format!("max asymmetry {worst:.2e} Wb"))
}

/// Closed-form linkages of the all-linear network. By symmetry the q-position
/// nodes carry no potential under d excitation (and vice versa), so each axis
/// reduces to three parallel paths from one tooth tip: stator tooth plus half
/// the yoke, rotor path (half rotor yoke, pole, gap), and half the slot leakage.
struct LinearModel {
    stator_d: f64,
    rotor_d: f64,
    stator_q: f64,
    rotor_q: f64,
    leakage: f64,
    k_s: f64,
    k_f: f64,
    scale: f64,
}

impl LinearModel {
    fn new(design: &MachineDesign) -> Self {
        let net = build_reluctance_network(design).unwrap();
        let r = |kind: BranchKind, pos: usize| -> f64 {
            let b = net
                .branches
                .iter()
                .find(|b| b.kind == kind && b.position == pos)
                .unwrap();
            match b.law {
                BranchLaw::Linear { reluctance } => reluctance,
                BranchLaw::Iron { region, length, area } => {
                    let slope = net.material(region).flux_density(1.0).1;
                    length / (slope * area)
                }
            }
        };
        let k_s = design.stator_mmf_per_amp();
        LinearModel {
            stator_d: r(BranchKind::StatorTooth, 0) + r(BranchKind::StatorYoke, 0) / 2.0,
            rotor_d: r(BranchKind::RotorYoke, 0) / 2.0 + r(BranchKind::RotorPole, 0) + r(BranchKind::AirgapD, 0),
            stator_q: r(BranchKind::StatorTooth, 1) + r(BranchKind::StatorYoke, 1) / 2.0,
            rotor_q: r(BranchKind::RotorYoke, 1) / 2.0 + r(BranchKind::RotorQPath, 1) + r(BranchKind::AirgapQ, 1),
            leakage: r(BranchKind::SlotLeakage, 0) / 2.0,
            k_s,
            k_f: design.field_mmf_per_amp(),
            scale: 2.0 / 3.0 * design.pole_pairs as f64 * k_s,
        }
    }

    fn tooth_flux(stator: f64, rotor: f64, leakage: f64, f_stator: f64, f_rotor: f64) -> f64 {
        let u = (f_rotor / rotor - f_stator / stator) / (1.0 / rotor + 1.0 / leakage + 1.0 / stator);
        (u + f_stator) / stator
    }

    fn psi(&self, i_d: f64, i_q: f64, i_f: f64) -> (f64, f64) {
        let phi_d = Self::tooth_flux(
            self.stator_d,
            self.rotor_d,
            self.leakage,
            self.k_s * i_d,
            self.k_f * i_f,
        );
        let phi_q = Self::tooth_flux(self.stator_q, self.rotor_q, self.leakage, self.k_s * i_q, 0.0);
        (self.scale * 2.0 * phi_d, self.scale * 2.0 * phi_q)
    }
}

fn c8() -> Outcome {
    let mut design = data::design("wfsm_m6");
    design.stator_material = MaterialSpec::linear("linear stator", 1500.0);
    design.rotor_material = MaterialSpec::linear("linear rotor", 800.0);
    let ratings = data::ratings("wfsm");
    let map = build_flux_map(&design, &ratings, GridSpec::DEFAULT).unwrap();
    let model = LinearModel::new(&design);
    let mut worst = 0.0f64;
    let mut peak = 0.0f64;
    let mut diff = 0.0f64;
    for (a, &i_d) in map.id_axis.iter().enumerate() {
        for (b, &i_q) in map.iq_axis.iter().enumerate() {
            for (c, &i_f) in map.if_axis.iter().enumerate() {
                let i = map.index(a, b, c);
                let (pd, pq) = model.psi(i_d, i_q, i_f);
                peak = peak.max(pd.abs()).max(pq.abs());
                diff = diff.max((map.psi_d[i] - pd).abs()).max((map.psi_q[i] - pq).abs());
            }
        }
    }
    worst = worst.max(diff / peak);
    // doubling the field current doubles ψ_d at zero stator current
    let net = build_reluctance_network(&design).unwrap();
    let (one, _) = solve_point(&design, &net, 0.0, 0.0, 10.0).unwrap();
    let (two, _) = solve_point(&design, &net, 0.0, 0.0, 20.0).unwrap();
    let doubling = (two.psi_d - 2.0 * one.psi_d).abs() / two.psi_d.abs();
    outcome(
        worst <= 1e-9 && doubling <= 1e-9,
        format!(
            "max relative deviation {worst:.2e} over {} points; field doubling {doubling:.2e}",
            map.psi_d.len()
        ),
    )
}

fn c9() -> Outcome {
    let start = Instant::now();
    let mut cfg = GaConfig::new(40, 50, 20240611);
    cfg.hv_reference = BenchmarkProblem::REFERENCE;
    let r = nsga2_run(&BenchmarkProblem::default(), &cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let ratio = r.hypervolume.last().unwrap() / BenchmarkProblem::OPTIMAL_HYPERVOLUME;
    outcome(
        ratio >= 0.95 && elapsed < 60.0,
        format!("hypervolume {:.2}% of optimum in {elapsed:.2} s", 100.0 * ratio),
    )
}

fn c10() -> Outcome {
    let start = Instant::now();
    let (cyc, source) = cycle();
    let w = wfsm_context(cyc.clone());
    let p = pmsm_context(cyc);
    let base = data::design("wfsm_m6");
    let rt = data::ratings("wfsm");
    let config = data::optimization("wfsm_smc");
    let out = run_optimization(&base, &rt, &config, &w, &data::economics("default")).unwrap();
    let Some(best) = out.selected_candidate() else {
        return outcome(false, "no feasible finalist");
    };
    let wfsm = w
        .edu("wfsm_opt", &best.variables.apply(&base), &rt, config.final_grid)
        .unwrap();
    let pmsm: Edu = p
        .edu("pmsm", &data::design("pmsm"), &data::ratings("pmsm"), GridSpec::DEFAULT)
        .unwrap();
    let cycle_w = w.cycle_efficiency(&wfsm).unwrap();
    let cycle_p = p.cycle_efficiency(&pmsm).unwrap();
    let mut rows = vec![("cycle", cycle_w, cycle_p)];
    for kmh in [70.0, 130.0] {
        rows.push((
            if kmh == 70.0 { "70 km/h" } else { "130 km/h" },
            cruise_efficiency(kmh, &w.vehicle, &wfsm).unwrap(),
            cruise_efficiency(kmh, &p.vehicle, &pmsm).unwrap(),
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = rows.iter().all(|r| r.1 > r.2) && elapsed < 7200.0;
    let table: Vec<String> = rows
        .iter()
        .map(|(k, a, b)| format!("{k} {:.2}% vs {:.2}%", 100.0 * a, 100.0 * b))
        .collect();
    outcome(
        pass,
        format!("{source}; WFSM vs PMSM: {}; pipeline {elapsed:.0} s", table.join(", ")),
    )
}

/// Data files every stage writes, produced inside a rayon pool of `threads`.
fn stage_outputs(threads: usize) -> Vec<(&'static str, String)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let m6 = drive("wfsm_m6", "wfsm", GridSpec::COARSE);
        let pm = drive("pmsm", "pmsm", GridSpec::COARSE);
        let effmap = build_efficiency_map(&m6, Strategy::Mtpl, &MapGrid::uniform(0.0, 400.0, 5, 10000.0, 5), 800.0);
        let env = wfsm_core::peak_envelope(&m6, RATED_DC, &[1000.0, 4000.0, 8000.0]);
        let ctx = pmsm_context(data::cycle("synthetic_class3"));
        let edu = Edu {
            name: "pmsm".into(),
            drive: pm,
            strategy: Strategy::Mtpa,
            gear: ctx.gear,
            v_dc: 800.0,
        };
        let result = run_cycle(&demand_trace(&ctx.cycle, &ctx.vehicle), &edu, &ctx.vehicle).unwrap();
        let hist = energy_histogram(&result, 10, 10, HistogramMode::Throughput);
        let mut config = data::optimization("wfsm_smc");
        config.ga = GaConfig::new(6, 2, 7);
        let base = data::design("wfsm_m6");
        let rt = data::ratings("wfsm");
        let ga = nsga2_run(&DesignProblem::new(&base, &rt, &config), &config.ga).unwrap();
        vec![
            ("flux map", m6.map.to_json()),
            ("efficiency map", effmap.to_csv()),
            ("envelope", env.to_csv()),
            ("cycle trace", result.trace_csv()),
            ("cycle summary", result.summary_json()),
            ("histogram", hist.to_csv()),
            ("ga archive", archive_csv(&ga.archive)),
        ]
    })
}

fn c11() -> Outcome {
    let a = stage_outputs(1);
    let b = stage_outputs(3);
    let c = stage_outputs(1);
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .zip(&c)
        .filter(|((x, y), z)| x.1 != y.1 || x.1 != z.1)
        .map(|((x, _), _)| x.0)
        .collect();
    outcome(
        differing.is_empty(),
        format!(
            "{} outputs compared across reruns and thread counts; differing {differing:?}",
            a.len()
        ),
    )
}

/// One low-speed/high-torque hotspot and one mid-speed/low-torque hotspot.
/// Speeds are judged against the top speed edge, torques against the top
/// torque edge of the histogram.
fn hotspot_pattern(h: &wfsm_core::EnergyHistogram) -> bool {
    let n_top = *h.speed_edges.last().unwrap();
    let t_top = *h.torque_edges.last().unwrap();
    let centres: Vec<(f64, f64)> = h.hotspots.iter().map(|&b| h.bin_centre(b)).collect();
    let accel = |&(t, n): &(f64, f64)| n <= n_top / 3.0 && t >= t_top / 2.0;
    let cruise = |&(t, n): &(f64, f64)| n > n_top / 4.0 && n <= 0.75 * n_top && t.abs() <= t_top / 3.0;
    centres.len() == 2 && ((accel(&centres[0]) && cruise(&centres[1])) || (cruise(&centres[0]) && accel(&centres[1])))
}

fn c12() -> Outcome {
    let (cyc, source) = cycle();
    let ctx = wfsm_context(cyc);
    let edu = ctx
        .edu(
            "wfsm_m6",
            &data::design("wfsm_m6"),
            &data::ratings("wfsm"),
            GridSpec::DEFAULT,
        )
        .unwrap();
    let r = run_cycle(&demand_trace(&ctx.cycle, &ctx.vehicle), &edu, &ctx.vehicle).unwrap();
    let h = energy_histogram(&r, 10, 10, HistogramMode::Throughput);
    let sum: f64 = h.energy.iter().flatten().sum();
    let conservation = (sum - r.totals.processed_energy).abs() / r.totals.processed_energy;
    let structure = hotspot_pattern(&h);
    let spots: Vec<String> = h
        .hotspots
        .iter()
        .map(|&b| {
            let (t, n) = h.bin_centre(b);
            format!("({t:.0} N·m, {n:.0} rpm)")
        })
        .collect();
    outcome(
        conservation <= 1e-6 && structure,
        format!(
            "{source}: bin sum error {conservation:.1e}; hotspots {} pattern match: {structure}",
            spots.join(" ")
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "MTPL oracle equivalence", c1),
        (2, "MTPA oracle equivalence", c2),
        (3, "Pareto oracle equivalence", c3),
        (4, "energy balance", c4),
        (5, "eddy thickness law", c5),
        (6, "WFSM no-load loss", c6),
        (7, "dq map symmetry", c7),
        (8, "MEC linear oracle", c8),
        (9, "NSGA-II benchmark", c9),
        (10, "directional EDU comparison", c10),
        (11, "determinism", c11),
        (12, "histogram conservation and hotspots", c12),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {name}: {} ({}; {:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
