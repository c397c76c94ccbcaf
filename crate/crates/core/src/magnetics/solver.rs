//! Nonlinear nodal solver for reluctance networks.
//!
//! Unknowns are magnetic scalar potentials. A branch from `a` to `b` with
//! source `F` carries flux `A * B((u_a - u_b + F) / l)` (iron) or
//! `(u_a - u_b + F) / R` (linear). Because every B-H curve is monotone with
//! slope at least `mu0`, the nodal equations are the stationarity conditions
//! of a strictly convex co-energy functional; Newton steps are safeguarded by
//! a backtracking line search on that functional.

use thiserror::Error;

use super::network::{BranchLaw, ReluctanceNetwork};

pub const MAX_ITERATIONS: usize = 50;
/// Relative node-balance tolerance.
pub const BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("solver diverged after {iterations} iterations (relative residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },
    #[error("source vector has {got} entries, network has {expected} branches")]
    SourceLength { expected: usize, got: usize },
    #[error("non-finite MMF source")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSolution {
    /// Branch fluxes [Wb], oriented `from → to`.
    pub fluxes: Vec<f64>,
    /// Node potentials [A-turns].
    pub potentials: Vec<f64>,
    pub iterations: usize,
    /// max |net node flux| / max |branch flux|.
    pub relative_residual: f64,
}

impl NetworkSolution {
    /// Largest net flux into any node relative to the largest branch flux.
    pub fn node_balance(&self, net: &ReluctanceNetwork) -> f64 {
        relative_residual(&node_residuals(net, &self.fluxes), &self.fluxes)
    }
}

/// Flux and differential conductance of one branch at MMF drop `mmf`.
fn branch_response(net: &ReluctanceNetwork, law: &BranchLaw, mmf: f64) -> (f64, f64) {
    match *law {
        BranchLaw::Linear { reluctance } => (mmf / reluctance, 1.0 / reluctance),
        BranchLaw::Iron { region, length, area } => {
            let (b, db) = net.material(region).flux_density(mmf / length);
            (area * b, area * db / length)
        }
    }
}

fn branch_coenergy(net: &ReluctanceNetwork, law: &BranchLaw, mmf: f64) -> f64 {
    match *law {
        BranchLaw::Linear { reluctance } => 0.5 * mmf * mmf / reluctance,
        BranchLaw::Iron { region, length, area } => area * length * net.material(region).coenergy_density(mmf / length),
    }
}

fn node_residuals(net: &ReluctanceNetwork, fluxes: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; net.node_count];
    for (b, &phi) in net.branches.iter().zip(fluxes) {
        r[b.from] += phi;
        r[b.to] -= phi;
    }
    r[net.ground] = 0.0;
    r
}

fn relative_residual(residuals: &[f64], fluxes: &[f64]) -> f64 {
    let scale = fluxes.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    let worst = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if worst == 0.0 {
        0.0
    } else if scale == 0.0 {
        f64::INFINITY
    } else {
        worst / scale
    }
}

fn drops(net: &ReluctanceNetwork, u: &[f64], mmfs: &[f64]) -> Vec<f64> {
    net.branches
        .iter()
        .zip(mmfs)
        .map(|(b, f)| u[b.from] - u[b.to] + f)
        .collect()
}

fn energy(net: &ReluctanceNetwork, u: &[f64], mmfs: &[f64]) -> f64 {
    net.branches
        .iter()
        .zip(drops(net, u, mmfs))
        .map(|(b, m)| branch_coenergy(net, &b.law, m))
        .sum()
}

pub fn solve_network(net: &ReluctanceNetwork, mmfs: &[f64]) -> Result<NetworkSolution, SolveError> {
    if mmfs.len() != net.branches.len() {
        return Err(SolveError::SourceLength {
            expected: net.branches.len(),
            got: mmfs.len(),
        });
    }
    if mmfs.iter().any(|m| !m.is_finite()) {
        return Err(SolveError::NonFinite);
    }
    let n = net.node_count;
    // Reduced index of each node (ground excluded).
    let index: Vec<Option<usize>> = (0..n)
        .scan(0usize, |next, i| {
            Some(if i == net.ground {
                None
            } else {
                *next += 1;
                Some(*next - 1)
            })
        })
        .collect();
    let m = n - 1;
    let mut u = vec![0.0; n];
    let mut last_residual = f64::INFINITY;

    for iteration in 0..=MAX_ITERATIONS {
        let mut fluxes = Vec::with_capacity(net.branches.len());
        let mut jac = vec![0.0; m * m];
        for (b, mmf) in net.branches.iter().zip(drops(net, &u, mmfs)) {
            let (phi, g) = branch_response(net, &b.law, mmf);
            fluxes.push(phi);
            let (a, c) = (index[b.from], index[b.to]);
            if let Some(a) = a {
                jac[a * m + a] += g;
            }
            if let Some(c) = c {
                jac[c * m + c] += g;
            }
            if let (Some(a), Some(c)) = (a, c) {
                jac[a * m + c] -= g;
                jac[c * m + a] -= g;
            }
        }
        let residuals = node_residuals(net, &fluxes);
        last_residual = relative_residual(&residuals, &fluxes);
        if last_residual <= BALANCE_TOL {
            return Ok(NetworkSolution {
                fluxes,
                potentials: u,
                iterations: iteration,
                relative_residual: last_residual,
            });
        }
        if iteration == MAX_ITERATIONS {
            break;
        }

        let mut rhs = vec![0.0; m];
        for (node, r) in residuals.iter().enumerate() {
            if let Some(i) = index[node] {
                rhs[i] = -r;
            }
        }
        let step = match solve_dense(&mut jac, &mut rhs, m) {
            Some(s) => s,
            None => break,
        };
        let slope: f64 = (0..n)
            .filter_map(|node| index[node].map(|i| residuals[node] * step[i]))
            .sum();
        let e0 = energy(net, &u, mmfs);
        let mut t = 1.0;
        let mut trial = u.clone();
        for _ in 0..40 {
            for node in 0..n {
                if let Some(i) = index[node] {
                    trial[node] = u[node] + t * step[i];
                }
            }
            if energy(net, &trial, mmfs) <= e0 + 1e-4 * t * slope {
                break;
            }
            t *= 0.5;
        }
        u = trial;
    }
    Err(SolveError::Divergence {
        iterations: MAX_ITERATIONS,
        residual: last_residual,
    })
}

/// Gaussian elimination with partial pivoting on a row-major `m x m` matrix.
fn solve_dense(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| a[i * m + col].abs().total_cmp(&a[j * m + col].abs()))?;
        if a[pivot * m + col] == 0.0 {
            return None;
        }
        if pivot != col {
            for k in 0..m {
                a.swap(col * m + k, pivot * m + k);
            }
            b.swap(col, pivot);
        }
        let d = a[col * m + col];
        for row in col + 1..m {
            let f = a[row * m + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..m {
                a[row * m + k] -= f * a[col * m + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let s: f64 = (row + 1..m).map(|k| a[row * m + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * m + row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;
    use crate::magnetics::network::{build_reluctance_network, Branch, BranchKind, Excitation, SourceTag};
    use crate::materials::MaterialSpec;

    fn linear_loop() -> ReluctanceNetwork {
        // Source branch 0->1 (R=2), then two parallel returns 1->0 (R=3, R=6).
        let lin = |r| BranchLaw::Linear { reluctance: r };
        let mk = |from, to, r| Branch {
            from,
            to,
            position: 0,
            kind: BranchKind::SlotLeakage,
            law: lin(r),
            source: SourceTag::None,
        };
        ReluctanceNetwork {
            node_count: 2,
            branches: vec![mk(0, 1, 2.0), mk(1, 0, 3.0), mk(1, 0, 6.0)],
            stator_material: MaterialSpec::linear("lin", 1000.0),
            rotor_material: MaterialSpec::linear("lin", 1000.0),
            ground: 0,
        }
    }

    #[test]
    fn zero_sources_give_zero_flux() {
        let net = build_reluctance_network(&data::design("wfsm_m0")).unwrap();
        let sol = solve_network(&net, &vec![0.0; net.branches.len()]).unwrap();
        assert!(sol.fluxes.iter().all(|&f| f == 0.0));
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn linear_series_parallel_closed_form() {
        // Hand solution: total R = 2 + (3*6)/(3+6) = 4, flux = F / 4.
        let net = linear_loop();
        let sol = solve_network(&net, &[10.0, 0.0, 0.0]).unwrap();
        assert!((sol.fluxes[0] - 2.5).abs() < 1e-12);
        // divider: 2/3 through R=3, 1/3 through R=6
        assert!((sol.fluxes[1] - 2.5 * 2.0 / 3.0).abs() < 1e-12);
        assert!((sol.fluxes[2] - 2.5 / 3.0).abs() < 1e-12);
        let doubled = solve_network(&net, &[20.0, 0.0, 0.0]).unwrap();
        for (a, b) in sol.fluxes.iter().zip(&doubled.fluxes) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn nonlinear_solution_balances_nodes() {
        let d = data::design("wfsm_m0");
        let net = build_reluctance_network(&d).unwrap();
        let e = Excitation {
            stator_d: -2000.0,
            stator_q: 3500.0,
            field: d.field_mmf_per_amp() * 32.0,
            magnet: 0.0,
        };
        let sol = solve_network(&net, &net.branch_mmfs(&e)).unwrap();
        assert!(sol.node_balance(&net) <= BALANCE_TOL);
        assert!(sol.iterations <= MAX_ITERATIONS);
    }

    #[test]
    fn wrong_source_length() {
        let net = linear_loop();
        assert!(matches!(
            solve_network(&net, &[1.0]),
            Err(SolveError::SourceLength { .. })
        ));
        assert_eq!(solve_network(&net, &[f64::NAN, 0.0, 0.0]), Err(SolveError::NonFinite));
    }
}
