//! Constrained NSGA-II over box-bounded real variables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pareto::{crowding_distance, hypervolume, nondominated_ranks, pareto_front};
use super::OptimizeError;

/// Result of one evaluation; objectives are maximized and `penalty == 0`
/// means feasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored<T> {
    pub objectives: [f64; 2],
    pub penalty: f64,
    pub detail: T,
}

impl<T> Scored<T> {
    pub fn feasible(&self) -> bool {
        self.penalty == 0.0
    }
}

pub trait Problem: Sync {
    type Detail: Clone + Send;
    fn bounds(&self) -> &[(f64, f64)];
    fn evaluate(&self, x: &[f64]) -> Scored<Self::Detail>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub seed: u64,
    #[serde(default = "default_crossover_prob")]
    pub crossover_prob: f64,
    #[serde(default = "default_eta_c")]
    pub eta_crossover: f64,
    #[serde(default = "default_eta_m")]
    pub eta_mutation: f64,
    /// Per-variable mutation probability; `1 / n_vars` when absent.
    #[serde(default)]
    pub mutation_rate: Option<f64>,
    /// Reference point for the archive hypervolume.
    #[serde(default)]
    pub hv_reference: [f64; 2],
}

fn default_crossover_prob() -> f64 {
    0.9
}
fn default_eta_c() -> f64 {
    15.0
}
fn default_eta_m() -> f64 {
    20.0
}

impl GaConfig {
    pub fn new(population: usize, generations: usize, seed: u64) -> Self {
        GaConfig {
            population,
            generations,
            seed,
            crossover_prob: default_crossover_prob(),
            eta_crossover: default_eta_c(),
            eta_mutation: default_eta_m(),
            mutation_rate: None,
            hv_reference: [0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        if self.population < 4 || self.population % 2 != 0 {
            return Err(OptimizeError::Config(format!(
                "population must be even and at least 4, got {}",
                self.population
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) || !(self.eta_crossover >= 0.0) || !(self.eta_mutation >= 0.0) {
            return Err(OptimizeError::Config("invalid variation operator parameters".into()));
        }
        if let Some(r) = self.mutation_rate {
            if !(0.0..=1.0).contains(&r) {
                return Err(OptimizeError::Config(format!("mutation_rate {r} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member<T> {
    /// Generation in which the member was evaluated (0 = initial population).
    pub generation: usize,
    pub x: Vec<f64>,
    pub score: Scored<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult<T> {
    /// Every evaluated member, in evaluation order.
    pub archive: Vec<Member<T>>,
    /// Hypervolume of the feasible nondominated archive after each generation.
    pub hypervolume: Vec<f64>,
    pub final_population: Vec<Member<T>>,
    pub all_infeasible: bool,
}

impl<T> GaResult<T> {
    /// Archive indices of the feasible nondominated set.
    pub fn front(&self) -> Vec<usize> {
        feasible_front(&self.archive)
    }
}

fn feasible_front<T>(archive: &[Member<T>]) -> Vec<usize> {
    let feasible: Vec<usize> = (0..archive.len()).filter(|&i| archive[i].score.feasible()).collect();
    let pts: Vec<[f64; 2]> = feasible.iter().map(|&i| archive[i].score.objectives).collect();
    pareto_front(&pts).into_iter().map(|k| feasible[k]).collect()
}

fn archive_hypervolume<T>(archive: &[Member<T>], reference: [f64; 2]) -> f64 {
    let pts: Vec<[f64; 2]> = archive
        .iter()
        .filter(|m| m.score.feasible())
        .map(|m| m.score.objectives)
        .collect();
    hypervolume(&pts, reference)
}

/// Constrained ranking: feasible members by nondominated front, then
/// infeasible members by penalty. Returns (rank, crowding) per member.
fn rank_population<T>(pop: &[Member<T>]) -> Vec<(usize, f64)> {
    let feasible: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].score.feasible()).collect();
    let pts: Vec<[f64; 2]> = feasible.iter().map(|&i| pop[i].score.objectives).collect();
    let ranks = nondominated_ranks(&pts);
    let mut out = vec![(0usize, 0.0f64); pop.len()];
    let n_fronts = ranks.iter().max().map_or(0, |r| r + 1);
    for f in 0..n_fronts {
        let members: Vec<usize> = (0..pts.len()).filter(|&k| ranks[k] == f).collect();
        let cd = crowding_distance(&pts, &members);
        for (m, d) in members.iter().zip(cd) {
            out[feasible[*m]] = (f, d);
        }
    }
    let mut infeasible: Vec<usize> = (0..pop.len()).filter(|&i| !pop[i].score.feasible()).collect();
    infeasible.sort_by(|&a, &b| pop[a].score.penalty.total_cmp(&pop[b].score.penalty).then(a.cmp(&b)));
    let mut rank = n_fronts;
    let mut last = f64::NAN;
    for i in infeasible {
        let p = pop[i].score.penalty;
        if p != last && !last.is_nan() {
            rank += 1;
        }
        last = p;
        out[i] = (rank, 0.0);
    }
    out
}

/// Ordering used by tournament and survival: lower rank, then larger crowding.
fn better(a: (usize, f64), b: (usize, f64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 > b.1)
}

fn sbx(rng: &mut ChaCha8Rng, a: f64, b: f64, lo: f64, hi: f64, eta: f64) -> (f64, f64) {
    if (a - b).abs() < 1e-14 || hi <= lo {
        return (a, b);
    }
    let (y1, y2) = if a < b { (a, b) } else { (b, a) };
    let u: f64 = rng.random();
    let spread = |beta: f64| {
        let alpha = 2.0 - beta.powf(-(eta + 1.0));
        if u <= 1.0 / alpha {
            (u * alpha).powf(1.0 / (eta + 1.0))
        } else {
            (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
        }
    };
    let beta_lo = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
    let beta_hi = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
    let c1 = 0.5 * ((y1 + y2) - spread(beta_lo) * (y2 - y1));
    let c2 = 0.5 * ((y1 + y2) + spread(beta_hi) * (y2 - y1));
    let (c1, c2) = (c1.clamp(lo, hi), c2.clamp(lo, hi));
    if rng.random::<f64>() < 0.5 {
        (c2, c1)
    } else {
        (c1, c2)
    }
}

fn polynomial_mutation(rng: &mut ChaCha8Rng, y: f64, lo: f64, hi: f64, eta: f64) -> f64 {
    if hi <= lo {
        return y;
    }
    let d1 = (y - lo) / (hi - lo);
    let d2 = (hi - y) / (hi - lo);
    let u: f64 = rng.random();
    let p = 1.0 / (eta + 1.0);
    let dq = if u < 0.5 {
        let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
        v.powf(p) - 1.0
    } else {
        let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
        1.0 - v.powf(p)
    };
    (y + dq * (hi - lo)).clamp(lo, hi)
}

fn evaluate_all<P: Problem>(problem: &P, xs: Vec<Vec<f64>>, generation: usize) -> Vec<Member<P::Detail>> {
    xs.into_par_iter()
        .map(|x| {
            let score = problem.evaluate(&x);
            Member { generation, x, score }
        })
        .collect()
}

pub fn nsga2_run<P: Problem>(problem: &P, cfg: &GaConfig) -> Result<GaResult<P::Detail>, OptimizeError> {
    cfg.validate()?;
    let bounds = problem.bounds();
    if bounds.is_empty()
        || bounds
            .iter()
            .any(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite())
    {
        return Err(OptimizeError::Config("invalid variable bounds".into()));
    }
    let n_vars = bounds.len();
    let mutation_rate = cfg.mutation_rate.unwrap_or(1.0 / n_vars as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let init: Vec<Vec<f64>> = (0..cfg.population)
        .map(|_| {
            bounds
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect()
        })
        .collect();
    let mut pop = evaluate_all(problem, init, 0);
    let mut archive = pop.clone();
    let mut hv = vec![archive_hypervolume(&archive, cfg.hv_reference)];

    for generation in 1..=cfg.generations {
        let ranks = rank_population(&pop);
        let tournament = |rng: &mut ChaCha8Rng| {
            let a = rng.random_range(0..pop.len());
            let b = rng.random_range(0..pop.len());
            if better(ranks[b], ranks[a]) {
                b
            } else {
                a
            }
        };
        let mut children = Vec::with_capacity(cfg.population);
        while children.len() < cfg.population {
            let (pa, pb) = (tournament(&mut rng), tournament(&mut rng));
            let (mut c1, mut c2) = (pop[pa].x.clone(), pop[pb].x.clone());
            if rng.random::<f64>() < cfg.crossover_prob {
                for (v, &(lo, hi)) in bounds.iter().enumerate() {
                    if rng.random::<f64>() < 0.5 {
                        let (a, b) = sbx(&mut rng, c1[v], c2[v], lo, hi, cfg.eta_crossover);
                        c1[v] = a;
                        c2[v] = b;
                    }
                }
            }
            for c in [&mut c1, &mut c2] {
                for (v, &(lo, hi)) in bounds.iter().enumerate() {
                    if rng.random::<f64>() < mutation_rate {
                        c[v] = polynomial_mutation(&mut rng, c[v], lo, hi, cfg.eta_mutation);
                    }
                }
            }
            children.push(c1);
            children.push(c2);
        }
        let offspring = evaluate_all(problem, children, generation);
        archive.extend(offspring.iter().cloned());
        hv.push(archive_hypervolume(&archive, cfg.hv_reference));

        let mut merged = pop;
        merged.extend(offspring);
        let ranks = rank_population(&merged);
        let mut order: Vec<usize> = (0..merged.len()).collect();
        order.sort_by(|&a, &b| {
            ranks[a]
                .0
                .cmp(&ranks[b].0)
                .then(ranks[b].1.total_cmp(&ranks[a].1))
                .then(a.cmp(&b))
        });
        order.truncate(cfg.population);
        order.sort_unstable();
        let mut slots: Vec<Option<Member<P::Detail>>> = merged.into_iter().map(Some).collect();
        pop = order
            .into_iter()
            .map(|i| slots[i].take().expect("each survivor taken once"))
            .collect();
    }
    let all_infeasible = archive.iter().all(|m| !m.score.feasible());
    Ok(GaResult {
        archive,
        hypervolume: hv,
        final_population: pop,
        all_infeasible,
    })
}

/// Bi-objective test problem: minimize `x1² + x2²` and `(x1 - 2)² + x2²`
/// over `[-2, 4] × [-2, 2]`, posed here as maximizing the negatives. The
/// front is `x2 = 0, x1 ∈ [0, 2]`.
pub struct BenchmarkProblem {
    bounds: [(f64, f64); 2],
}

impl Default for BenchmarkProblem {
    fn default() -> Self {
        BenchmarkProblem {
            bounds: [(-2.0, 4.0), (-2.0, 2.0)],
        }
    }
}

impl BenchmarkProblem {
    /// Reference point (4, 4) in the minimization frame.
    pub const REFERENCE: [f64; 2] = [-4.0, -4.0];
    /// Exact hypervolume of the front against [`Self::REFERENCE`].
    pub const OPTIMAL_HYPERVOLUME: f64 = 40.0 / 3.0;
}

impl Problem for BenchmarkProblem {
    type Detail = ();
    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    fn evaluate(&self, x: &[f64]) -> Scored<()> {
        let f1 = x[0] * x[0] + x[1] * x[1];
        let f2 = (x[0] - 2.0) * (x[0] - 2.0) + x[1] * x[1];
        Scored {
            objectives: [-f1, -f2],
            penalty: 0.0,
            detail: (),
        }
    }
}
