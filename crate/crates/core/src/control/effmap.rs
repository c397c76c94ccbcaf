use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ControlSolution, Drive, Strategy};
use crate::losses::LossBreakdown;

pub const EFFICIENCY_MAP_FORMAT: &str = "wfsm-efficiency-map";

/// Torque [N·m] by speed [rpm] grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapGrid {
    pub torque_axis: Vec<f64>,
    pub speed_axis: Vec<f64>,
}

impl MapGrid {
    pub fn uniform(t_min: f64, t_max: f64, nt: usize, n_max: f64, nn: usize) -> Self {
        let lin = |a: f64, b: f64, n: usize| -> Vec<f64> {
            if n <= 1 {
                return vec![a];
            }
            (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
        };
        MapGrid {
            torque_axis: lin(t_min, t_max, nt),
            speed_axis: lin(0.0, n_max, nn),
        }
    }
}

/// Solved grid, row-major with axis order `torque, speed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyMap {
    pub format: String,
    pub version: u32,
    pub axis_order: [String; 2],
    pub strategy: Strategy,
    pub v_dc: f64,
    pub torque_axis: Vec<f64>,
    pub speed_axis: Vec<f64>,
    pub feasible: Vec<bool>,
    /// `None` where infeasible or at zero shaft power.
    pub efficiency: Vec<Option<f64>>,
    pub loss_total: Vec<Option<f64>>,
    pub i_f: Vec<Option<f64>>,
    pub solutions: Vec<Option<ControlSolution>>,
}

pub fn build_efficiency_map(drive: &Drive, strategy: Strategy, grid: &MapGrid, v_dc: f64) -> EfficiencyMap {
    let ns = grid.speed_axis.len();
    let cells: Vec<(f64, f64)> = grid
        .torque_axis
        .iter()
        .flat_map(|&t| grid.speed_axis.iter().map(move |&n| (t, n)))
        .collect();
    let solutions: Vec<Option<ControlSolution>> = cells
        .par_iter()
        .map(|&(t, n)| drive.solve(strategy, t, n, v_dc).ok())
        .collect();
    debug_assert_eq!(solutions.len(), grid.torque_axis.len() * ns);
    EfficiencyMap {
        format: EFFICIENCY_MAP_FORMAT.into(),
        version: 1,
        axis_order: ["torque".into(), "speed".into()],
        strategy,
        v_dc,
        torque_axis: grid.torque_axis.clone(),
        speed_axis: grid.speed_axis.clone(),
        feasible: solutions.iter().map(|s| s.is_some()).collect(),
        efficiency: solutions.iter().map(|s| s.and_then(|s| s.efficiency)).collect(),
        loss_total: solutions.iter().map(|s| s.map(|s| s.losses.total())).collect(),
        i_f: solutions.iter().map(|s| s.map(|s| s.i_f)).collect(),
        solutions,
    }
}

impl EfficiencyMap {
    pub fn cell(&self, it: usize, is: usize) -> Option<&ControlSolution> {
        self.solutions[it * self.speed_axis.len() + is].as_ref()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("efficiency map serializes")
    }

    /// One row per cell; empty fields where infeasible or undefined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("torque_nm,speed_rpm,feasible,efficiency,i_d,i_q,i_f");
        for c in LossBreakdown::COMPONENTS {
            out.push(',');
            out.push_str(c);
        }
        out.push_str(",loss_total\n");
        for (it, &t) in self.torque_axis.iter().enumerate() {
            for (is, &n) in self.speed_axis.iter().enumerate() {
                out.push_str(&format!("{t},{n}"));
                match self.cell(it, is) {
                    Some(s) => {
                        let eff = s.efficiency.map(|e| e.to_string()).unwrap_or_default();
                        out.push_str(&format!(",1,{eff},{},{},{}", s.i_d, s.i_q, s.i_f));
                        for v in s.losses.components() {
                            out.push_str(&format!(",{v}"));
                        }
                        out.push_str(&format!(",{}\n", s.losses.total()));
                    }
                    None => {
                        out.push_str(",0,,,,");
                        out.push_str(&",".repeat(LossBreakdown::COMPONENTS.len() + 1));
                        out.push('\n');
                    }
                }
            }
        }
        out
    }
}
