use serde::{Deserialize, Serialize};

use super::CycleResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HistogramMode {
    /// |motor shaft power|·dt
    #[default]
    Throughput,
    /// Total EDU loss·dt
    Loss,
}

impl std::str::FromStr for HistogramMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "throughput" => Ok(HistogramMode::Throughput),
            "loss" => Ok(HistogramMode::Loss),
            _ => Err(format!("unknown histogram mode `{s}` (throughput|loss)")),
        }
    }
}

/// Energy per (motor torque, motor speed) bin. Rows are torque bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyHistogram {
    pub mode: HistogramMode,
    /// [N·m], `torque_bins + 1` edges
    pub torque_edges: Vec<f64>,
    /// [rpm]
    pub speed_edges: Vec<f64>,
    /// [J]
    pub energy: Vec<Vec<f64>>,
    /// `energy / max(energy)`; all zero if no energy.
    pub normalized: Vec<Vec<f64>>,
    pub total: f64,
    /// Two largest local maxima (no 8-neighbour holds more energy) as
    /// (torque index, speed index), largest first.
    pub hotspots: Vec<(usize, usize)>,
}

fn bin_of(x: f64, edges: &[f64]) -> usize {
    let n = edges.len() - 1;
    if x <= edges[0] {
        return 0;
    }
    if x >= edges[n] {
        return n - 1;
    }
    // partition_point returns the first edge strictly above x
    (edges.partition_point(|e| *e <= x) - 1).min(n - 1)
}

fn linspace(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

/// Histogram with edges spanning the result's torque and speed ranges.
pub fn energy_histogram(
    result: &CycleResult,
    torque_bins: usize,
    speed_bins: usize,
    mode: HistogramMode,
) -> EnergyHistogram {
    let (mut t_lo, mut t_hi, mut n_hi) = (0.0f64, 0.0f64, 0.0f64);
    for s in &result.steps {
        t_lo = t_lo.min(s.motor_torque);
        t_hi = t_hi.max(s.motor_torque);
        n_hi = n_hi.max(s.motor_speed_rpm);
    }
    if t_hi <= t_lo {
        t_hi = t_lo + 1.0;
    }
    if n_hi <= 0.0 {
        n_hi = 1.0;
    }
    energy_histogram_with_edges(
        result,
        linspace(t_lo, t_hi, torque_bins.max(1)),
        linspace(0.0, n_hi, speed_bins.max(1)),
        mode,
    )
}

/// Values outside the edges land in the edge bins.
pub fn energy_histogram_with_edges(
    result: &CycleResult,
    torque_edges: Vec<f64>,
    speed_edges: Vec<f64>,
    mode: HistogramMode,
) -> EnergyHistogram {
    assert!(
        torque_edges.len() >= 2 && speed_edges.len() >= 2,
        "need at least one bin per axis"
    );
    let (nt, ns) = (torque_edges.len() - 1, speed_edges.len() - 1);
    let mut energy = vec![vec![0.0; ns]; nt];
    let mut total = 0.0;
    for s in &result.steps {
        let w = match mode {
            HistogramMode::Throughput => s.shaft_power.abs() * s.dt,
            HistogramMode::Loss => s.losses.total() * s.dt,
        };
        if w == 0.0 {
            continue;
        }
        energy[bin_of(s.motor_torque, &torque_edges)][bin_of(s.motor_speed_rpm, &speed_edges)] += w;
        total += w;
    }
    let max = energy.iter().flatten().fold(0.0f64, |m, &e| m.max(e));
    let normalized = energy
        .iter()
        .map(|row| row.iter().map(|&e| if max > 0.0 { e / max } else { 0.0 }).collect())
        .collect();
    let hotspots = hotspots(&energy, 2);
    EnergyHistogram {
        mode,
        torque_edges,
        speed_edges,
        energy,
        normalized,
        total,
        hotspots,
    }
}

fn hotspots(energy: &[Vec<f64>], count: usize) -> Vec<(usize, usize)> {
    let (nt, ns) = (energy.len(), energy[0].len());
    let is_peak = |i: usize, j: usize| {
        let e = energy[i][j];
        e > 0.0
            && (i.saturating_sub(1)..(i + 2).min(nt))
                .all(|a| (j.saturating_sub(1)..(j + 2).min(ns)).all(|b| energy[a][b] <= e))
    };
    let mut peaks: Vec<(usize, usize)> = (0..nt)
        .flat_map(|i| (0..ns).map(move |j| (i, j)))
        .filter(|&(i, j)| is_peak(i, j))
        .collect();
    peaks.sort_by(|a, b| energy[b.0][b.1].total_cmp(&energy[a.0][a.1]).then(a.cmp(b)));
    // a plateau of equal neighbours counts once
    let mut out: Vec<(usize, usize)> = Vec::new();
    for p in peaks {
        if out.iter().all(|q| q.0.abs_diff(p.0) > 1 || q.1.abs_diff(p.1) > 1) {
            out.push(p);
        }
        if out.len() == count {
            break;
        }
    }
    out
}

impl EnergyHistogram {
    pub fn bin_centre(&self, (i, j): (usize, usize)) -> (f64, f64) {
        (
            0.5 * (self.torque_edges[i] + self.torque_edges[i + 1]),
            0.5 * (self.speed_edges[j] + self.speed_edges[j + 1]),
        )
    }

    /// Long-form CSV: one row per bin with its edges.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("torque_lo_nm,torque_hi_nm,speed_lo_rpm,speed_hi_rpm,energy_j,normalized\n");
        for (i, row) in self.energy.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    self.torque_edges[i],
                    self.torque_edges[i + 1],
                    self.speed_edges[j],
                    self.speed_edges[j + 1],
                    e,
                    self.normalized[i][j]
                ));
            }
        }
        out
    }
}
