//! dq flux-linkage maps built from the reluctance network.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::design::{DesignError, MachineDesign, MachineRatings, Topology};
use super::network::{build_reluctance_network, BranchKind, BranchLaw, Excitation, ReluctanceNetwork, WINDING};
use super::solver::{solve_network, NetworkSolution, SolveError};

pub const MAP_FORMAT: &str = "wfsm-flux-map";
pub const MAP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("grid point (i_d={i_d} A, i_q={i_q} A, i_f={i_f} A): {source}")]
    Point {
        i_d: f64,
        i_q: f64,
        i_f: f64,
        source: SolveError,
    },
    #[error("{axis} = {value} outside map range [{min}, {max}]")]
    Range {
        axis: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("grid: {0}")]
    Grid(&'static str),
    #[error("map file: {0}")]
    Io(String),
}

/// Grid resolution. Current axes span `±max_current_peak`, the field axis
/// `[0, max_field_current]` (a single point at zero for magnet machines).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_id: usize,
    pub n_iq: usize,
    pub n_if: usize,
}

impl GridSpec {
    pub const DEFAULT: GridSpec = GridSpec {
        n_id: 17,
        n_iq: 17,
        n_if: 9,
    };
    pub const COARSE: GridSpec = GridSpec {
        n_id: 9,
        n_iq: 9,
        n_if: 5,
    };
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Odd-count axis symmetric about zero: `x[n-1-k] == -x[k]` bit-exactly.
pub fn symmetric_axis(n: usize, half_span: f64) -> Vec<f64> {
    let c = (n - 1) / 2;
    let mut axis = vec![0.0; n];
    for k in c..n {
        let x = half_span * (k - c) as f64 / c as f64;
        axis[k] = x;
        axis[n - 1 - k] = -x;
    }
    axis[c] = 0.0;
    axis
}

pub fn field_axis(n: usize, max: f64) -> Vec<f64> {
    if n <= 1 || max == 0.0 {
        return vec![0.0];
    }
    (0..n).map(|k| max * k as f64 / (n - 1) as f64).collect()
}

/// Flux-linkage map over `(i_d, i_q, i_f)`.
///
/// Arrays are row-major with axis order `i_d, i_q, i_f`. Currents are peak
/// amplitudes [A]; linkages are amplitude-invariant dq values [Wb].
/// `b_tooth` and `b_yoke` are peak stator flux densities [T]; `b_rotor` is the
/// alternating (slot-ripple) flux density amplitude in the rotor pole body,
/// taken as `(k_carter - 1)` times the pole body flux density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxLinkageMap {
    pub format: String,
    pub version: u32,
    pub axis_order: [String; 3],
    pub design: String,
    pub topology: Topology,
    pub pole_pairs: u32,
    pub id_axis: Vec<f64>,
    pub iq_axis: Vec<f64>,
    pub if_axis: Vec<f64>,
    pub psi_d: Vec<f64>,
    pub psi_q: Vec<f64>,
    pub b_tooth: Vec<f64>,
    pub b_yoke: Vec<f64>,
    pub b_rotor: Vec<f64>,
}

/// Interpolated map values at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MapSample {
    pub psi_d: f64,
    pub psi_q: f64,
    pub b_tooth: f64,
    pub b_yoke: f64,
    pub b_rotor: f64,
}

/// Quantities extracted from one solved network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResult {
    pub psi_d: f64,
    pub psi_q: f64,
    pub b_tooth: f64,
    pub b_yoke: f64,
    pub b_rotor: f64,
}

/// Solves one operating point and reduces it to linkages and flux densities.
pub fn solve_point(
    design: &MachineDesign,
    net: &ReluctanceNetwork,
    i_d: f64,
    i_q: f64,
    i_f: f64,
) -> Result<(PointResult, NetworkSolution), SolveError> {
    let k_s = design.stator_mmf_per_amp();
    let e = Excitation {
        stator_d: k_s * i_d,
        stator_q: k_s * i_q,
        field: design.field_mmf_per_amp() * i_f,
        magnet: design.magnet_mmf(),
    };
    let sol = solve_network(net, &net.branch_mmfs(&e))?;
    let mut sum_d = 0.0;
    let mut sum_q = 0.0;
    let mut b_tooth = 0.0f64;
    let mut b_yoke = 0.0f64;
    let mut b_pole = 0.0f64;
    for (b, &phi) in net.branches.iter().zip(&sol.fluxes) {
        let area = match b.law {
            BranchLaw::Iron { area, .. } => area,
            BranchLaw::Linear { .. } => 0.0,
        };
        match b.kind {
            BranchKind::StatorTooth => {
                let (c, s) = WINDING[b.position];
                sum_d += c * phi;
                sum_q += s * phi;
                b_tooth = b_tooth.max(phi.abs() / area);
            }
            BranchKind::StatorYoke => b_yoke = b_yoke.max(phi.abs() / area),
            BranchKind::RotorPole => b_pole = b_pole.max(phi.abs() / area),
            _ => {}
        }
    }
    // ψ = (2/3) * p * k_s * Σ w_k Φ_k, the co-energy derivative per dq current.
    let scale = 2.0 / 3.0 * design.pole_pairs as f64 * k_s;
    let ripple = design.geometry().carter_factor - 1.0;
    Ok((
        PointResult {
            psi_d: scale * sum_d,
            psi_q: scale * sum_q,
            b_tooth,
            b_yoke,
            b_rotor: ripple * b_pole,
        },
        sol,
    ))
}

pub fn build_flux_map(
    design: &MachineDesign,
    ratings: &MachineRatings,
    grid: GridSpec,
) -> Result<FluxLinkageMap, MapError> {
    if grid.n_id < 3 || grid.n_iq < 3 || grid.n_id % 2 == 0 || grid.n_iq % 2 == 0 {
        return Err(MapError::Grid("current axes need an odd count >= 3"));
    }
    if grid.n_if == 0 {
        return Err(MapError::Grid("field axis needs at least one point"));
    }
    let net = build_reluctance_network(design)?;
    let i_max = ratings.max_current_peak();
    let id_axis = symmetric_axis(grid.n_id, i_max);
    let iq_axis = symmetric_axis(grid.n_iq, i_max);
    let if_axis = match design.topology {
        Topology::Wfsm => field_axis(grid.n_if, ratings.max_field_current),
        Topology::Pmsm => vec![0.0],
    };
    let (nd, nq, nf) = (id_axis.len(), iq_axis.len(), if_axis.len());
    let cq = (nq - 1) / 2;

    // Solve i_q >= 0 only and mirror.
    let jobs: Vec<(usize, usize, usize)> = (0..nd)
        .flat_map(|a| (cq..nq).flat_map(move |b| (0..nf).map(move |c| (a, b, c))))
        .collect();
    let solved: Vec<((usize, usize, usize), PointResult)> = jobs
        .par_iter()
        .map(|&(a, b, c)| {
            let (i_d, i_q, i_f) = (id_axis[a], iq_axis[b], if_axis[c]);
            solve_point(design, &net, i_d, i_q, i_f)
                .map(|(r, _)| ((a, b, c), r))
                .map_err(|source| MapError::Point { i_d, i_q, i_f, source })
        })
        .collect::<Result<_, _>>()?;

    let len = nd * nq * nf;
    let mut map = FluxLinkageMap {
        format: MAP_FORMAT.to_string(),
        version: MAP_FORMAT_VERSION,
        axis_order: ["i_d".into(), "i_q".into(), "i_f".into()],
        design: design.name.clone(),
        topology: design.topology,
        pole_pairs: design.pole_pairs,
        id_axis,
        iq_axis,
        if_axis,
        psi_d: vec![0.0; len],
        psi_q: vec![0.0; len],
        b_tooth: vec![0.0; len],
        b_yoke: vec![0.0; len],
        b_rotor: vec![0.0; len],
    };
    for ((a, b, c), r) in solved {
        let mirror = nq - 1 - b;
        let psi_q = if b == cq { 0.0 } else { r.psi_q };
        for (bb, sign) in [(b, 1.0), (mirror, -1.0)] {
            let i = map.index(a, bb, c);
            map.psi_d[i] = r.psi_d;
            map.psi_q[i] = sign * psi_q;
            map.b_tooth[i] = r.b_tooth;
            map.b_yoke[i] = r.b_yoke;
            map.b_rotor[i] = r.b_rotor;
        }
    }
    Ok(map)
}

/// Locates `x` on an ascending axis: `(lower index, weight of upper node)`.
fn locate(axis: &[f64], x: f64, name: &'static str) -> Result<(usize, f64), MapError> {
    let (lo, hi) = (axis[0], axis[axis.len() - 1]);
    let tol = 1e-9 * lo.abs().max(hi.abs()).max(1.0);
    if !(x >= lo - tol && x <= hi + tol) {
        return Err(MapError::Range {
            axis: name,
            value: x,
            min: lo,
            max: hi,
        });
    }
    if axis.len() == 1 {
        return Ok((0, 0.0));
    }
    let x = x.clamp(lo, hi);
    let j = axis.partition_point(|&v| v <= x).clamp(1, axis.len() - 1) - 1;
    let t = (x - axis[j]) / (axis[j + 1] - axis[j]);
    Ok((j, t))
}

impl FluxLinkageMap {
    pub fn index(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.iq_axis.len() + b) * self.if_axis.len() + c
    }

    pub fn max_current(&self) -> f64 {
        self.id_axis[self.id_axis.len() - 1]
    }

    pub fn max_field_current(&self) -> f64 {
        self.if_axis[self.if_axis.len() - 1]
    }

    /// Multilinear interpolation. The i_q direction is evaluated on `|i_q|`
    /// and sign-restored, so even/odd symmetry holds bit-exactly.
    pub fn sample(&self, i_d: f64, i_q: f64, i_f: f64) -> Result<MapSample, MapError> {
        let cq = (self.iq_axis.len() - 1) / 2;
        let (ja, ta) = locate(&self.id_axis, i_d, "i_d")?;
        let (jb, tb) = locate(&self.iq_axis[cq..], i_q.abs(), "i_q")?;
        let (jc, tc) = locate(&self.if_axis, i_f, "i_f")?;
        let jb = jb + cq;
        let nf = self.if_axis.len();
        let mut out = MapSample::default();
        for (da, wa) in [(0, 1.0 - ta), (1, ta)] {
            if wa == 0.0 {
                continue;
            }
            for (db, wb) in [(0, 1.0 - tb), (1, tb)] {
                if wb == 0.0 {
                    continue;
                }
                for (dc, wc) in [(0, 1.0 - tc), (1, tc)] {
                    if wc == 0.0 || jc + dc >= nf {
                        continue;
                    }
                    let w = wa * wb * wc;
                    let i = self.index(ja + da, jb + db, jc + dc);
                    out.psi_d += w * self.psi_d[i];
                    out.psi_q += w * self.psi_q[i];
                    out.b_tooth += w * self.b_tooth[i];
                    out.b_yoke += w * self.b_yoke[i];
                    out.b_rotor += w * self.b_rotor[i];
                }
            }
        }
        if i_q < 0.0 {
            out.psi_q = -out.psi_q;
        }
        Ok(out)
    }

    /// Electromagnetic torque [N·m].
    pub fn torque(&self, i_d: f64, i_q: f64, i_f: f64) -> Result<f64, MapError> {
        torque(self, self.pole_pairs, i_d, i_q, i_f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MapError> {
        let map: FluxLinkageMap = serde_json::from_str(text).map_err(|e| MapError::Io(e.to_string()))?;
        if map.format != MAP_FORMAT {
            return Err(MapError::Io(format!("unexpected format '{}'", map.format)));
        }
        let len = map.id_axis.len() * map.iq_axis.len() * map.if_axis.len();
        for arr in [&map.psi_d, &map.psi_q, &map.b_tooth, &map.b_yoke, &map.b_rotor] {
            if arr.len() != len {
                return Err(MapError::Io("array length does not match axes".into()));
            }
        }
        Ok(map)
    }
}

pub fn torque(map: &FluxLinkageMap, pole_pairs: u32, i_d: f64, i_q: f64, i_f: f64) -> Result<f64, MapError> {
    let s = map.sample(i_d, i_q, i_f)?;
    Ok(torque_from_linkage(pole_pairs, s.psi_d, s.psi_q, i_d, i_q))
}

pub fn torque_from_linkage(pole_pairs: u32, psi_d: f64, psi_q: f64, i_d: f64, i_q: f64) -> f64 {
    1.5 * pole_pairs as f64 * (psi_d * i_q - psi_q * i_d)
}

/// Steady-state dq voltages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqVoltage {
    pub v_d: f64,
    pub v_q: f64,
    /// √3 · |v_dq| [V].
    pub v_peak_lineline: f64,
}

pub fn voltage_from_linkage(psi_d: f64, psi_q: f64, i_d: f64, i_q: f64, speed_elec: f64, r_s: f64) -> DqVoltage {
    let v_d = r_s * i_d - speed_elec * psi_q;
    let v_q = r_s * i_q + speed_elec * psi_d;
    DqVoltage {
        v_d,
        v_q,
        v_peak_lineline: 3f64.sqrt() * v_d.hypot(v_q),
    }
}

pub fn steady_voltage(
    map: &FluxLinkageMap,
    i_d: f64,
    i_q: f64,
    i_f: f64,
    speed_elec: f64,
    r_s: f64,
) -> Result<DqVoltage, MapError> {
    let s = map.sample(i_d, i_q, i_f)?;
    Ok(voltage_from_linkage(s.psi_d, s.psi_q, i_d, i_q, speed_elec, r_s))
}

/// Default modulation margin on the space-vector bound.
pub const DEFAULT_MODULATION_LIMIT: f64 = 0.95;

/// Space-vector feasibility: peak line-line voltage within `limit · V_dc`.
pub fn voltage_feasible(v: &DqVoltage, v_dc: f64, modulation_limit: f64) -> bool {
    v.v_peak_lineline <= modulation_limit * v_dc
}
