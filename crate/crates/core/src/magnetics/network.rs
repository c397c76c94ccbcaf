//! Lumped reluctance network for one pole pair.
//!
//! Four angular positions per pole pair sit at electrical angles 0, π/2, π,
//! 3π/2 (d, q, −d, −q). Each position has four nodes: stator yoke `Y`, tooth
//! tip `T`, rotor surface `R` and rotor core `C`. Per position there is one
//! branch of each type:
//!
//! | branch        | nodes   | law                          | source          |
//! |---------------|---------|------------------------------|-----------------|
//! | stator tooth  | T → Y   | stator B-H                   | stator MMF      |
//! | stator yoke   | Y → Y'  | stator B-H                   |                 |
//! | airgap        | R → T   | linear (d or q gap)          |                 |
//! | rotor pole/q  | C → R   | rotor B-H                    | field (d only)  |
//! | rotor yoke    | C → C'  | rotor B-H                    |                 |
//! | slot leakage  | T → T'  | linear slot permeance        |                 |
//!
//! That gives 16 nodes and 24 branches. Magnet machines insert a linear
//! magnet branch with MMF `B_r * t / mu0` between `C` and a new node `M` on
//! each d position, so the rotor pole runs `M → R`: 18 nodes, 26 branches.

use std::f64::consts::PI;

use crate::materials::MaterialSpec;

use super::design::{DesignError, MachineDesign, Topology};

/// Electrical position of each of the four node groups.
pub const POSITIONS: usize = 4;
/// Stator winding distribution at each position: (cos θ, sin θ).
pub const WINDING: [(f64, f64); POSITIONS] = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKind {
    StatorTooth,
    StatorYoke,
    AirgapD,
    AirgapQ,
    RotorPole,
    RotorQPath,
    RotorYoke,
    SlotLeakage,
    Magnet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Stator,
    Rotor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchLaw {
    Linear { reluctance: f64 },
    Iron { region: Region, length: f64, area: f64 },
}

/// Which excitation drives a branch, with its per-branch coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceTag {
    None,
    Stator { cos: f64, sin: f64 },
    Field { sign: f64 },
    Magnet { sign: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Angular position index (0..4).
    pub position: usize,
    pub kind: BranchKind,
    pub law: BranchLaw,
    pub source: SourceTag,
}

/// Branch MMF sources in ampere-turns.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Excitation {
    /// d-axis stator MMF amplitude per tooth group.
    pub stator_d: f64,
    pub stator_q: f64,
    /// Field MMF per pole.
    pub field: f64,
    pub magnet: f64,
}

#[derive(Debug, Clone)]
pub struct ReluctanceNetwork {
    pub node_count: usize,
    pub branches: Vec<Branch>,
    pub stator_material: MaterialSpec,
    pub rotor_material: MaterialSpec,
    /// Node held at zero potential.
    pub ground: usize,
}

pub fn yoke_node(k: usize) -> usize {
    k
}
pub fn tip_node(k: usize) -> usize {
    POSITIONS + k
}
pub fn rotor_surface_node(k: usize) -> usize {
    2 * POSITIONS + k
}
pub fn rotor_core_node(k: usize) -> usize {
    3 * POSITIONS + k
}

/// Rectangular slot leakage permeance per slot [H].
pub fn slot_permeance(design: &MachineDesign) -> f64 {
    let g = design.geometry();
    let mu0 = crate::materials::MU0;
    mu0 * design.active_length * (design.slot_depth / (3.0 * design.slot_width) + g.tip_height / g.slot_opening)
}

pub fn build_reluctance_network(design: &MachineDesign) -> Result<ReluctanceNetwork, DesignError> {
    design.validate()?;
    let g = design.geometry();
    let mu0 = crate::materials::MU0;
    let p = design.pole_pairs as f64;
    let l = design.active_length;
    let ls = g.stator_magnetic_length;
    let lr = g.rotor_magnetic_length;
    let arc = 2.0 * PI / (POSITIONS as f64 * p);

    let tooth_len = g.tip_height + design.slot_depth;
    let tooth_area = g.teeth_per_group * g.tooth_width_bore * ls;
    let r_syoke = g.r_outer - design.stator_yoke_width / 2.0;
    let syoke_len = arc * r_syoke;
    let syoke_area = design.stator_yoke_width * ls;

    let rotor_pitch = 2.0 * PI * g.r_rotor / (2.0 * p);
    let gap = design.airgap_length * g.carter_factor;
    let d_gap_area = design.rotor_pole_width * l;
    let q_gap_area = (rotor_pitch - design.rotor_pole_width) * l;
    let q_gap_len = match design.topology {
        Topology::Wfsm => (design.airgap_length + design.interpolar_gap) * g.carter_factor,
        Topology::Pmsm => gap,
    };

    let pole_len = design.rotor_pole_height;
    let (pole_area, q_path_area) = match design.topology {
        Topology::Wfsm => (
            design.rotor_pole_body_width * lr,
            (design.rotor_pole_width - design.rotor_pole_body_width) / 2.0 * lr,
        ),
        Topology::Pmsm => (
            design.rotor_pole_width * lr,
            (rotor_pitch - design.rotor_pole_width) * lr,
        ),
    };
    let r_ryoke = g.r_shaft + design.rotor_yoke_width / 2.0;
    let ryoke_len = arc * r_ryoke;
    let ryoke_area = design.rotor_yoke_width * lr;
    let leakage = 1.0 / (g.teeth_per_group * slot_permeance(design));

    let stator_iron = |length, area| BranchLaw::Iron {
        region: Region::Stator,
        length,
        area,
    };
    let rotor_iron = |length, area| BranchLaw::Iron {
        region: Region::Rotor,
        length,
        area,
    };

    let mut node_count = 4 * POSITIONS;
    let mut branches = Vec::with_capacity(26);
    for k in 0..POSITIONS {
        let next = (k + 1) % POSITIONS;
        let (cos, sin) = WINDING[k];
        let d_axis = k % 2 == 0;
        let sign = cos;
        branches.push(Branch {
            from: tip_node(k),
            to: yoke_node(k),
            position: k,
            kind: BranchKind::StatorTooth,
            law: stator_iron(tooth_len, tooth_area),
            source: SourceTag::Stator { cos, sin },
        });
        branches.push(Branch {
            from: yoke_node(k),
            to: yoke_node(next),
            position: k,
            kind: BranchKind::StatorYoke,
            law: stator_iron(syoke_len, syoke_area),
            source: SourceTag::None,
        });
        let (kind, reluctance) = if d_axis {
            (BranchKind::AirgapD, gap / (mu0 * d_gap_area))
        } else {
            (BranchKind::AirgapQ, q_gap_len / (mu0 * q_gap_area))
        };
        branches.push(Branch {
            from: rotor_surface_node(k),
            to: tip_node(k),
            position: k,
            kind,
            law: BranchLaw::Linear { reluctance },
            source: SourceTag::None,
        });
        if d_axis {
            match design.topology {
                Topology::Wfsm => branches.push(Branch {
                    from: rotor_core_node(k),
                    to: rotor_surface_node(k),
                    position: k,
                    kind: BranchKind::RotorPole,
                    law: rotor_iron(pole_len, pole_area),
                    source: SourceTag::Field { sign },
                }),
                Topology::Pmsm => {
                    let m = node_count;
                    node_count += 1;
                    let tm = design.magnet_thickness.unwrap_or(0.0);
                    branches.push(Branch {
                        from: rotor_core_node(k),
                        to: m,
                        position: k,
                        kind: BranchKind::Magnet,
                        law: BranchLaw::Linear {
                            reluctance: tm / (mu0 * design.rotor_pole_width * l),
                        },
                        source: SourceTag::Magnet { sign },
                    });
                    branches.push(Branch {
                        from: m,
                        to: rotor_surface_node(k),
                        position: k,
                        kind: BranchKind::RotorPole,
                        law: rotor_iron(pole_len, pole_area),
                        source: SourceTag::None,
                    });
                }
            }
        } else {
            branches.push(Branch {
                from: rotor_core_node(k),
                to: rotor_surface_node(k),
                position: k,
                kind: BranchKind::RotorQPath,
                law: rotor_iron(pole_len, q_path_area),
                source: SourceTag::None,
            });
        }
        branches.push(Branch {
            from: rotor_core_node(k),
            to: rotor_core_node(next),
            position: k,
            kind: BranchKind::RotorYoke,
            law: rotor_iron(ryoke_len, ryoke_area),
            source: SourceTag::None,
        });
        branches.push(Branch {
            from: tip_node(k),
            to: tip_node(next),
            position: k,
            kind: BranchKind::SlotLeakage,
            law: BranchLaw::Linear { reluctance: leakage },
            source: SourceTag::None,
        });
    }

    Ok(ReluctanceNetwork {
        node_count,
        branches,
        stator_material: design.stator_material.clone(),
        rotor_material: design.rotor_material.clone(),
        ground: yoke_node(1),
    })
}

impl ReluctanceNetwork {
    /// Per-branch MMF vector for an excitation.
    pub fn branch_mmfs(&self, e: &Excitation) -> Vec<f64> {
        self.branches
            .iter()
            .map(|b| match b.source {
                SourceTag::None => 0.0,
                SourceTag::Stator { cos, sin } => cos * e.stator_d + sin * e.stator_q,
                SourceTag::Field { sign } => sign * e.field,
                SourceTag::Magnet { sign } => sign * e.magnet,
            })
            .collect()
    }

    pub fn material(&self, region: Region) -> &MaterialSpec {
        match region {
            Region::Stator => &self.stator_material,
            Region::Rotor => &self.rotor_material,
        }
    }

    pub fn count(&self, kind: BranchKind) -> usize {
        self.branches.iter().filter(|b| b.kind == kind).count()
    }

    /// Number of branches touching each node.
    pub fn node_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count];
        for b in &self.branches {
            deg[b.from] += 1;
            deg[b.to] += 1;
        }
        deg
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![self.ground];
        seen[self.ground] = true;
        while let Some(n) = stack.pop() {
            for b in &self.branches {
                let other = if b.from == n {
                    b.to
                } else if b.to == n {
                    b.from
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;

    #[test]
    fn wfsm_template_counts() {
        let net = build_reluctance_network(&data::design("wfsm_m0")).unwrap();
        assert_eq!(net.node_count, 16);
        assert_eq!(net.branches.len(), 24);
        assert_eq!(net.count(BranchKind::StatorTooth), 4);
        assert_eq!(net.count(BranchKind::StatorYoke), 4);
        assert_eq!(net.count(BranchKind::AirgapD) + net.count(BranchKind::AirgapQ), 4);
        assert_eq!(net.count(BranchKind::RotorPole) + net.count(BranchKind::RotorQPath), 4);
        assert_eq!(net.count(BranchKind::RotorYoke), 4);
        assert_eq!(net.count(BranchKind::SlotLeakage), 4);
        assert_eq!(net.count(BranchKind::Magnet), 0);
        assert!(net.is_connected());
        assert!(net.node_degrees().iter().all(|&d| d >= 2));
    }

    #[test]
    fn pmsm_template_swaps_field_for_magnet() {
        let d = data::design("pmsm");
        let net = build_reluctance_network(&d).unwrap();
        assert_eq!(net.node_count, 18);
        assert_eq!(net.branches.len(), 26);
        assert_eq!(net.count(BranchKind::Magnet), 2);
        assert!(net
            .branches
            .iter()
            .all(|b| !matches!(b.source, SourceTag::Field { .. })));
        let mmf = net.branch_mmfs(&Excitation {
            magnet: d.magnet_mmf(),
            ..Default::default()
        });
        let expected = d.magnet_remanence.unwrap() * d.magnet_thickness.unwrap() / crate::materials::MU0;
        let magnet: Vec<f64> = net
            .branches
            .iter()
            .zip(&mmf)
            .filter(|(b, _)| b.kind == BranchKind::Magnet)
            .map(|(_, m)| *m)
            .collect();
        assert_eq!(magnet, vec![expected, -expected]);
        assert!(net.is_connected());
        assert!(net.node_degrees().iter().all(|&d| d >= 2));
    }

    #[test]
    fn construction_rejects_bad_geometry() {
        let mut d = data::design("wfsm_m0");
        d.slot_width = 1.01 * PI * d.airgap_diameter / d.slot_count as f64;
        assert_eq!(build_reluctance_network(&d).unwrap_err(), DesignError::ToothWidth);
    }
}
