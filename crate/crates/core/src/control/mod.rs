//! Operating-point control: loss-optimal (MTPL) and current-optimal (MTPA)
//! current selection under current, voltage and field limits, the peak
//! torque/power envelope, and efficiency maps.
//!
//! The search is nested: an outer 1-D search over `i_f`, an inner one over
//! `i_d`, and for each pair `i_q` is the smallest magnitude producing the
//! demanded torque (scan, then false position).

mod effmap;

pub use effmap::{build_efficiency_map, EfficiencyMap, MapGrid};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::losses::{inverter_losses, InverterParams, LossBreakdown, LossConfig, MachineLossModel};
use crate::magnetics::fluxmap::{field_axis, symmetric_axis, voltage_feasible, voltage_from_linkage};
use crate::magnetics::{FluxLinkageMap, MachineDesign, MachineRatings, MapError, DEFAULT_MODULATION_LIMIT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("{torque:.2} N·m at {speed_rpm:.1} rpm is not reachable (max {max_torque:.2} N·m)")]
    Infeasible {
        torque: f64,
        speed_rpm: f64,
        max_torque: f64,
    },
    #[error("invalid input: {0}")]
    Input(&'static str),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Minimum total loss.
    Mtpl,
    /// Minimum stator current magnitude.
    Mtpa,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mtpl" => Ok(Strategy::Mtpl),
            "mtpa" => Ok(Strategy::Mtpa),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

/// Search resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub field_points: usize,
    pub d_points: usize,
    /// Samples along i_q before bisecting the first torque crossing.
    pub iq_scan: usize,
    /// Number of coarse-grid seeds refined by pattern search.
    pub starts: usize,
    /// Pattern search stops when the i_d step falls below this fraction of
    /// the current limit.
    pub min_step: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            field_points: 9,
            d_points: 21,
            iq_scan: 32,
            starts: 3,
            min_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSolution {
    pub i_d: f64,
    pub i_q: f64,
    pub i_f: f64,
    pub v_d: f64,
    pub v_q: f64,
    pub speed_rpm: f64,
    pub torque_achieved: f64,
    pub losses: LossBreakdown,
    pub shaft_power: f64,
    pub electrical_input_power: f64,
    /// Output over input in either power direction; `None` at zero shaft power.
    pub efficiency: Option<f64>,
}

impl ControlSolution {
    pub fn current_magnitude(&self) -> f64 {
        self.i_d.hypot(self.i_q)
    }
}

pub fn rpm_to_rad(rpm: f64) -> f64 {
    rpm * PI / 30.0
}

pub fn rad_to_rpm(w: f64) -> f64 {
    w * 30.0 / PI
}

/// Machine surrogate plus the limits and loss models needed to pick currents.
#[derive(Debug, Clone)]
pub struct Drive {
    pub map: FluxLinkageMap,
    pub ratings: MachineRatings,
    pub losses: MachineLossModel,
    /// When set, inverter losses are part of the MTPL objective and of the
    /// reported breakdown.
    pub inverter: Option<InverterParams>,
    pub modulation_limit: f64,
    pub search: SearchConfig,
}

impl Drive {
    pub fn new(design: &MachineDesign, map: FluxLinkageMap, ratings: MachineRatings, losses: LossConfig) -> Self {
        let losses = MachineLossModel::new(
            design,
            LossConfig {
                max_field_power: ratings.max_field_power.min(losses.max_field_power),
                ..losses
            },
        );
        Drive {
            map,
            ratings,
            losses,
            inverter: None,
            modulation_limit: DEFAULT_MODULATION_LIMIT,
            search: SearchConfig::default(),
        }
    }

    pub fn with_inverter(mut self, inverter: InverterParams) -> Self {
        self.inverter = Some(inverter);
        self
    }

    /// Peak stator current amplitude [A].
    pub fn current_limit(&self) -> f64 {
        self.ratings.max_current_peak().min(self.map.max_current())
    }

    pub fn field_limit(&self) -> f64 {
        self.ratings.max_field_current.min(self.map.max_field_current())
    }

    /// Full evaluation of one current triple; `None` if any limit is violated.
    pub fn evaluate(&self, i_d: f64, i_q: f64, i_f: f64, speed_rpm: f64, v_dc: f64) -> Option<ControlSolution> {
        self.point(i_d, i_q, i_f, speed_rpm, v_dc).ok()
    }

    /// Like [`Self::evaluate`], but a point failing only the voltage limit
    /// reports its voltage ratio `v / v_max` (> 1).
    fn point(&self, i_d: f64, i_q: f64, i_f: f64, speed_rpm: f64, v_dc: f64) -> Result<ControlSolution, Option<f64>> {
        let i_max = self.current_limit();
        if i_d.hypot(i_q) > i_max * (1.0 + 1e-12) || !(0.0..=self.field_limit()).contains(&i_f) {
            return Err(None);
        }
        let s = self.map.sample(i_d, i_q, i_f).map_err(|_| None)?;
        let w = rpm_to_rad(speed_rpm);
        let p = self.map.pole_pairs;
        let v = voltage_from_linkage(s.psi_d, s.psi_q, i_d, i_q, p as f64 * w, self.losses.r_s);
        if !voltage_feasible(&v, v_dc, self.modulation_limit) {
            return Err(Some(v.v_peak_lineline / (self.modulation_limit * v_dc)));
        }
        // Field power over the transformer limit is just another infeasibility here.
        let mut losses = self
            .losses
            .evaluate(s.b_tooth, s.b_yoke, s.b_rotor, i_d, i_q, i_f, w)
            .map_err(|_| None)?;
        if let Some(inv) = &self.inverter {
            let i_rms = i_d.hypot(i_q) / std::f64::consts::SQRT_2;
            losses.inverter = inverter_losses(i_rms, v_dc, inv.f_sw, inv);
        }
        let torque = 1.5 * p as f64 * (s.psi_d * i_q - s.psi_q * i_d);
        let shaft_power = torque * w;
        let electrical_input_power = shaft_power + losses.total();
        let efficiency = if shaft_power > 0.0 {
            Some(shaft_power / electrical_input_power)
        } else if shaft_power < 0.0 {
            Some(electrical_input_power / shaft_power)
        } else {
            None
        };
        Ok(ControlSolution {
            i_d,
            i_q,
            i_f,
            v_d: v.v_d,
            v_q: v.v_q,
            speed_rpm,
            torque_achieved: torque,
            losses,
            shaft_power,
            electrical_input_power,
            efficiency,
        })
    }

    /// Smallest `|i_q|` (with the sign of `torque`) giving the demanded torque
    /// at fixed `(i_d, i_f)`: scan for the first crossing, then Illinois
    /// false position inside the bracket.
    pub fn iq_for_torque(&self, i_d: f64, i_f: f64, torque: f64) -> Option<f64> {
        if torque == 0.0 {
            return Some(0.0);
        }
        let i_max = self.current_limit();
        let room = i_max * i_max - i_d * i_d;
        if room < 0.0 {
            return None;
        }
        let iq_max = room.sqrt();
        let sign = torque.signum();
        let target = torque.abs();
        let g = |iq: f64| -> Option<f64> {
            let t = self.map.torque(i_d, sign * iq, i_f).ok()?;
            Some(sign * t - target)
        };
        let n = self.search.iq_scan.max(2);
        let (mut a, mut ga) = (0.0, -target);
        let mut bracket = None;
        for k in 1..=n {
            let iq = if k == n { iq_max } else { iq_max * k as f64 / n as f64 };
            let gi = g(iq)?;
            if gi >= 0.0 {
                bracket = Some((iq, gi));
                break;
            }
            a = iq;
            ga = gi;
        }
        let (mut b, mut gb) = bracket?;
        let tol = 1e-12 * target.max(1.0);
        let mut side = 0i8;
        for _ in 0..100 {
            if gb <= tol || b - a <= 1e-13 * iq_max {
                break;
            }
            let x = (a * gb - b * ga) / (gb - ga);
            let x = if x > a && x < b { x } else { 0.5 * (a + b) };
            let gx = g(x)?;
            if gx >= 0.0 {
                b = x;
                gb = gx;
                if side == 1 {
                    ga *= 0.5;
                }
                side = 1;
            } else {
                a = x;
                ga = gx;
                if side == -1 {
                    gb *= 0.5;
                }
                side = -1;
            }
        }
        Some(sign * b)
    }

    /// Feasible solution for `(i_d, i_f)` on the constant-torque contour.
    pub fn on_contour(&self, i_d: f64, i_f: f64, torque: f64, speed_rpm: f64, v_dc: f64) -> Option<ControlSolution> {
        self.contour_point(i_d, i_f, torque, speed_rpm, v_dc).ok()
    }

    fn contour_point(
        &self,
        i_d: f64,
        i_f: f64,
        torque: f64,
        speed_rpm: f64,
        v_dc: f64,
    ) -> Result<ControlSolution, Option<f64>> {
        let i_q = self.iq_for_torque(i_d, i_f, torque).ok_or(None)?;
        self.point(i_d, i_q, i_f, speed_rpm, v_dc)
    }

    fn check_inputs(&self, torque: f64, speed_rpm: f64, v_dc: f64) -> Result<(), ControlError> {
        if !torque.is_finite() {
            return Err(ControlError::Input("torque must be finite"));
        }
        if !(speed_rpm >= 0.0) || !speed_rpm.is_finite() {
            return Err(ControlError::Input("speed must be finite and >= 0"));
        }
        if !(v_dc > 0.0) {
            return Err(ControlError::Input("DC voltage must be positive"));
        }
        Ok(())
    }

    pub fn solve(
        &self,
        strategy: Strategy,
        torque: f64,
        speed_rpm: f64,
        v_dc: f64,
    ) -> Result<ControlSolution, ControlError> {
        self.check_inputs(torque, speed_rpm, v_dc)?;
        match self.search_contour(strategy, torque, speed_rpm, v_dc) {
            Some(s) => Ok(s),
            None => Err(ControlError::Infeasible {
                torque,
                speed_rpm,
                max_torque: self.max_torque(speed_rpm, v_dc, torque.signum()),
            }),
        }
    }

    /// Outer search over `i_f`, inner search over `i_d`, both as a scan
    /// followed by a one-dimensional pattern search.
    fn search_contour(&self, strategy: Strategy, torque: f64, speed_rpm: f64, v_dc: f64) -> Option<ControlSolution> {
        let f_max = self.field_limit();
        let cfg = self.search;
        let inner = |i_f: f64| self.best_on_field_line(strategy, i_f, torque, speed_rpm, v_dc);
        if f_max == 0.0 {
            return inner(0.0);
        }
        let mut n = cfg.field_points.max(2);
        loop {
            let fs = field_axis(n, f_max);
            let line: Vec<Option<ControlSolution>> = fs.iter().map(|&f| inner(f)).collect();
            let best = best_of(strategy, line.iter().flatten().copied());
            if let Some(best) = best {
                let h = fs[1] - fs[0];
                return Some(line_search(
                    strategy,
                    best,
                    best.i_f,
                    0.5 * h,
                    0.0,
                    f_max,
                    cfg.min_step * f_max,
                    |f| inner(f),
                ));
            }
            if n >= 8 * cfg.field_points {
                return None;
            }
            n = 2 * n - 1;
        }
    }

    /// Best point on the torque contour at fixed field current.
    fn best_on_field_line(
        &self,
        strategy: Strategy,
        i_f: f64,
        torque: f64,
        speed_rpm: f64,
        v_dc: f64,
    ) -> Option<ControlSolution> {
        let i_max = self.current_limit();
        let cfg = self.search;
        let ds = symmetric_axis(cfg.d_points | 1, i_max);
        let h = ds[1] - ds[0];
        let probes: Vec<Result<ControlSolution, Option<f64>>> = ds
            .iter()
            .map(|&d| self.contour_point(d, i_f, torque, speed_rpm, v_dc))
            .collect();
        let mut start = best_of(strategy, probes.iter().filter_map(|p| p.as_ref().ok()).copied());
        if start.is_none() {
            // A feasible sliver narrower than the scan spacing shows up as a
            // dip in the voltage ratio; descend into the deepest dips.
            let ratio = |k: usize| match probes[k] {
                Err(Some(r)) => Some(r),
                _ => None,
            };
            let mut dips: Vec<(f64, usize)> = (0..ds.len())
                .filter_map(|k| {
                    let r = ratio(k)?;
                    let left = if k > 0 {
                        ratio(k - 1).unwrap_or(f64::INFINITY)
                    } else {
                        f64::INFINITY
                    };
                    let right = ratio(k + 1).filter(|_| k + 1 < ds.len()).unwrap_or(f64::INFINITY);
                    (r <= left && r <= right).then_some((r, k))
                })
                .collect();
            dips.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, k) in dips.iter().take(2) {
                if let Some(s) = self.descend_voltage(ds[k], h, i_f, torque, speed_rpm, v_dc) {
                    start = Some(s);
                    break;
                }
            }
        }
        let start = start?;
        Some(line_search(
            strategy,
            start,
            start.i_d,
            0.5 * h,
            -i_max,
            i_max,
            cfg.min_step * i_max,
            |d| self.on_contour(d, i_f, torque, speed_rpm, v_dc),
        ))
    }

    /// Golden-section descent of the voltage ratio around `center`, stopping
    /// at the first feasible point.
    fn descend_voltage(
        &self,
        center: f64,
        h: f64,
        i_f: f64,
        torque: f64,
        speed_rpm: f64,
        v_dc: f64,
    ) -> Option<ControlSolution> {
        let ratio = |d: f64| match self.contour_point(d, i_f, torque, speed_rpm, v_dc) {
            Ok(s) => Err(s),
            Err(Some(r)) => Ok(r),
            Err(None) => Ok(f64::INFINITY),
        };
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (center - h, center + h);
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let mut f1 = ratio(x1);
        let mut f2 = ratio(x2);
        for _ in 0..60 {
            let (r1, r2) = match (f1, f2) {
                (Err(s), _) | (_, Err(s)) => return Some(s),
                (Ok(r1), Ok(r2)) => (r1, r2),
            };
            if r1 <= r2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = ratio(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = ratio(x2);
            }
        }
        match (f1, f2) {
            (Err(s), _) | (_, Err(s)) => Some(s),
            _ => None,
        }
    }

    /// Largest torque magnitude reachable at this speed, signed like `sign`.
    ///
    /// Maximizes torque over `(i_f, |i|, angle)` (a box, so the current limit
    /// is a bound) subject to the voltage and field limits: coarse grid, then
    /// pattern search from the best seeds.
    pub fn max_torque(&self, speed_rpm: f64, v_dc: f64, sign: f64) -> f64 {
        let sign = if sign < 0.0 { -1.0 } else { 1.0 };
        let i_max = self.current_limit();
        let f_max = self.field_limit();
        let half = std::f64::consts::FRAC_PI_2;
        // angle measured from the +q axis towards +d
        let eval = |i_f: f64, mag: f64, angle: f64| -> Option<f64> {
            let (i_d, i_q) = (mag * angle.sin(), sign * mag * angle.cos());
            self.evaluate(i_d, i_q, i_f, speed_rpm, v_dc)
                .map(|s| sign * s.torque_achieved)
        };
        let cfg = self.search;
        let nf = if f_max > 0.0 { cfg.field_points.max(2) } else { 1 };
        let nm = cfg.d_points.max(3);
        let na = cfg.d_points.max(3);
        let mut seeds: Vec<(f64, [f64; 3])> = Vec::new();
        for &i_f in &field_axis(nf, f_max) {
            for k in 0..nm {
                let mag = i_max * k as f64 / (nm - 1) as f64;
                for j in 0..na {
                    let angle = -half + 2.0 * half * j as f64 / (na - 1) as f64;
                    if let Some(t) = eval(i_f, mag, angle) {
                        seeds.push((t, [i_f, mag, angle]));
                    }
                }
            }
        }
        if seeds.is_empty() {
            return 0.0;
        }
        seeds.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1[0].total_cmp(&b.1[0])));
        let lo = [0.0, 0.0, -half];
        let hi = [f_max, i_max, half];
        let h0 = [
            if nf > 1 { f_max / (nf - 1) as f64 } else { 0.0 },
            i_max / (nm - 1) as f64,
            2.0 * half / (na - 1) as f64,
        ];
        let mut best = seeds[0].0;
        for &(t0, x0) in seeds.iter().take(cfg.starts.max(1)) {
            let (mut t, mut x, mut h) = (t0, x0, h0);
            let mut iterations = 0;
            while h[1] > cfg.min_step * i_max && iterations < 2000 {
                iterations += 1;
                let mut best_move: Option<(f64, [f64; 3])> = None;
                for df in [-1.0, 0.0, 1.0] {
                    if df != 0.0 && h[0] == 0.0 {
                        continue;
                    }
                    for dm in [-1.0, 0.0, 1.0] {
                        for da in [-1.0, 0.0, 1.0] {
                            if df == 0.0 && dm == 0.0 && da == 0.0 {
                                continue;
                            }
                            let mut y = x;
                            for (i, d) in [df, dm, da].into_iter().enumerate() {
                                y[i] = (x[i] + d * h[i]).clamp(lo[i], hi[i]);
                            }
                            if y == x {
                                continue;
                            }
                            if let Some(ty) = eval(y[0], y[1], y[2]) {
                                if ty > t && best_move.map_or(true, |(tb, _)| ty > tb) {
                                    best_move = Some((ty, y));
                                }
                            }
                        }
                    }
                }
                match best_move {
                    Some((ty, y)) => {
                        t = ty;
                        x = y;
                    }
                    None => h = h.map(|v| 0.5 * v),
                }
            }
            best = best.max(t);
        }
        sign * best.max(0.0)
    }
}

fn best_of(strategy: Strategy, it: impl Iterator<Item = ControlSolution>) -> Option<ControlSolution> {
    it.fold(None, |best: Option<ControlSolution>, s| match best {
        Some(b) if !compare(strategy, &s, &b).is_lt() => Some(b),
        _ => Some(s),
    })
}

/// One-dimensional pattern search with step expansion on success and
/// halving on failure. `eval` returns `None` for infeasible points.
#[allow(clippy::too_many_arguments)]
fn line_search(
    strategy: Strategy,
    start: ControlSolution,
    x0: f64,
    h0: f64,
    lo: f64,
    hi: f64,
    tol: f64,
    eval: impl Fn(f64) -> Option<ControlSolution>,
) -> ControlSolution {
    let (mut cur, mut x, mut h) = (start, x0, h0);
    let mut iterations = 0;
    while h > tol && iterations < 400 {
        iterations += 1;
        let mut moved = false;
        for dir in [-1.0, 1.0] {
            let y = (x + dir * h).clamp(lo, hi);
            if y == x {
                continue;
            }
            if let Some(s) = eval(y) {
                if compare(strategy, &s, &cur).is_lt() {
                    cur = s;
                    x = y;
                    moved = true;
                    break;
                }
            }
        }
        if moved {
            h = (2.0 * h).min(h0);
        } else {
            h *= 0.5;
        }
    }
    cur
}

/// Objective ordering with deterministic tie-breaks: objective, then smaller
/// field current, then smaller stator current.
fn compare(strategy: Strategy, a: &ControlSolution, b: &ControlSolution) -> std::cmp::Ordering {
    let key = |s: &ControlSolution| match strategy {
        Strategy::Mtpl => (s.losses.total(), s.current_magnitude()),
        Strategy::Mtpa => (s.current_magnitude(), s.losses.total()),
    };
    let (ka, kb) = (key(a), key(b));
    ka.0.total_cmp(&kb.0)
        .then(a.i_f.total_cmp(&b.i_f))
        .then(ka.1.total_cmp(&kb.1))
        .then(a.i_d.total_cmp(&b.i_d))
}

/// Loss-minimizing currents for torque `torque` [N·m] at `speed_rpm`.
/// Negative torque solves the generating quadrant directly.
pub fn mtpl_solve(drive: &Drive, torque: f64, speed_rpm: f64, v_dc: f64) -> Result<ControlSolution, ControlError> {
    drive.solve(Strategy::Mtpl, torque, speed_rpm, v_dc)
}

/// Current-minimizing currents for torque `torque` at `speed_rpm`.
pub fn mtpa_solve(drive: &Drive, torque: f64, speed_rpm: f64, v_dc: f64) -> Result<ControlSolution, ControlError> {
    drive.solve(Strategy::Mtpa, torque, speed_rpm, v_dc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v_dc: f64,
    pub speed_rpm: Vec<f64>,
    pub max_torque: Vec<f64>,
    pub max_power: Vec<f64>,
}

impl Envelope {
    pub fn peak_torque(&self) -> f64 {
        self.max_torque.iter().fold(0.0, |m: f64, &t| m.max(t))
    }

    pub fn peak_power(&self) -> f64 {
        self.max_power.iter().fold(0.0, |m: f64, &p| m.max(p))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("speed_rpm,max_torque_nm,max_power_w\n");
        for i in 0..self.speed_rpm.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.speed_rpm[i], self.max_torque[i], self.max_power[i]
            ));
        }
        out
    }
}

/// Motoring torque and power limits at each speed.
pub fn peak_envelope(drive: &Drive, v_dc: f64, speed_axis: &[f64]) -> Envelope {
    use rayon::prelude::*;
    let max_torque: Vec<f64> = speed_axis.par_iter().map(|&n| drive.max_torque(n, v_dc, 1.0)).collect();
    let max_power = speed_axis
        .iter()
        .zip(&max_torque)
        .map(|(&n, &t)| t * rpm_to_rad(n))
        .collect();
    Envelope {
        v_dc,
        speed_rpm: speed_axis.to_vec(),
        max_torque,
        max_power,
    }
}
