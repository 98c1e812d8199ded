//! Latency constrained segmentation optimization: an elite genetic algorithm
//! run independently on every FDSS segment, with unbounded Pareto elitism,
//! roulette selection and fallback to the original design space.

use std::collections::{BTreeSet, HashSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use crate::chromosome::{Chromosome, FrequencyAssignment};
use crate::error::{DseError, Result};
use crate::fdss::{FdssResult, SegmentOutcome, SegmentedSubspace};
use crate::latency::Evaluator;
use crate::model::ComponentKind;
use crate::pareto;

const ROULETTE_EPS: f64 = 1e-9;
const LOG_FLOOR: f64 = 1e-5;

/// Weighted log cost (lower is better):
/// `-(A ln max(1 - E/E_max, 1e-5) + B ln max(1 - a/a_max, 1e-5))`.
/// A non-positive normalizer contributes nothing.
pub fn fitness(e: f64, a: f64, e_max: f64, a_max: f64, weight_e: f64, weight_a: f64) -> f64 {
    let term = |v: f64, max: f64| {
        if max > 0.0 {
            (1.0 - v / max).max(LOG_FLOOR).ln()
        } else {
            0.0
        }
    };
    -(weight_e * term(e, e_max) + weight_a * term(a, a_max))
}

#[derive(Debug, Clone, Serialize)]
pub struct GaParams {
    pub k: usize,
    pub generations: usize,
    pub p_s: f64,
    pub p_c: f64,
    pub p_m: f64,
    pub weight_energy: f64,
    pub weight_area: f64,
    /// Random draws allowed while filling the initial population; `None` means `10 * k`.
    pub init_attempt_limit: Option<usize>,
    /// Attempts per child slot before a parent is carried over.
    pub child_retries: usize,
    /// Unbounded Pareto elite when true, a single lowest-cost elite otherwise.
    pub dynamic_elitism: bool,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            k: 230,
            generations: 800,
            p_s: 0.5,
            p_c: 0.7,
            p_m: 0.5,
            weight_energy: 2.0,
            weight_area: 1.0,
            init_attempt_limit: None,
            child_retries: 10,
            dynamic_elitism: true,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(DseError::Contract(format!("population size must be at least 2, got {}", self.k)));
        }
        for (name, p) in [("p_s", self.p_s), ("p_c", self.p_c), ("p_m", self.p_m)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(DseError::Contract(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.weight_energy < 0.0 || self.weight_area < 0.0 {
            return Err(DseError::Contract("fitness weights must be non-negative".into()));
        }
        Ok(())
    }

    pub fn attempt_limit(&self) -> usize {
        self.init_attempt_limit.unwrap_or(10 * self.k)
    }
}

/// A valid configuration with its objectives and per-path latencies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluatedChromosome {
    #[serde(skip)]
    pub chromosome: Chromosome,
    pub energy: f64,
    pub area: f64,
    pub latencies: Vec<f64>,
}

impl EvaluatedChromosome {
    pub fn objectives(&self) -> (f64, f64) {
        (self.energy, self.area)
    }
}

/// Genes a search may draw from: surviving alternatives per MCC and a
/// frequency pool shared by every component.
#[derive(Debug, Clone)]
pub struct SearchSpace<'a> {
    pub eval: &'a Evaluator<'a>,
    /// Original alternative indices allowed per global MCC.
    pub alternatives: Vec<Vec<usize>>,
    /// Ascending grid indices.
    pub pool: Vec<usize>,
    /// Pool frequencies meeting the period, per MCC and original alternative index.
    mcc_feasible: Vec<Vec<Vec<usize>>>,
    /// Allowed alternatives with at least one feasible pool frequency.
    usable: Vec<Vec<usize>>,
    /// Global MCC index of each component, if it is an MCC.
    comp_mcc: Vec<Option<usize>>,
}

impl<'a> SearchSpace<'a> {
    pub fn from_subspace(eval: &'a Evaluator<'a>, sub: &SegmentedSubspace) -> Self {
        let alternatives = sub
            .choices
            .iter()
            .map(|c| c.iter().map(|a| a.alternative).collect())
            .collect();
        Self::new(eval, alternatives, sub.freq_pool.clone())
    }

    pub fn new(eval: &'a Evaluator<'a>, alternatives: Vec<Vec<usize>>, pool: Vec<usize>) -> Self {
        let model = eval.model;
        let table = &eval.table;
        let mcc_feasible: Vec<Vec<Vec<usize>>> = table
            .mcc_refs
            .iter()
            .map(|&(p, m)| {
                let psm = &model.psms[p];
                psm.mccs[m]
                    .alternatives
                    .iter()
                    .map(|alt| {
                        pool.iter()
                            .copied()
                            .filter(|&f| alt.accepts_frequency(eval.grid[f], psm.period))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let comp_mcc = table
            .components
            .iter()
            .map(|c| (c.kind == ComponentKind::Mcc).then_some(c.index))
            .collect();
        let usable = alternatives
            .iter()
            .enumerate()
            .map(|(j, alts): (usize, &Vec<usize>)| {
                alts.iter()
                    .copied()
                    .filter(|&a| !mcc_feasible[j][a].is_empty())
                    .collect()
            })
            .collect();
        SearchSpace {
            eval,
            alternatives,
            pool,
            mcc_feasible,
            usable,
            comp_mcc,
        }
    }

    pub fn n_components(&self) -> usize {
        self.comp_mcc.len()
    }

    /// Name of the first MCC with no selectable alternative, if any.
    pub fn empty_mcc(&self) -> Option<String> {
        self.usable
            .iter()
            .position(Vec::is_empty)
            .map(|j| self.eval.table.components[self.eval.table.mcc(j)].name.clone())
    }

    /// Frequencies component `c` may take given the chromosome's alternatives.
    pub fn feasible(&self, chrom: &Chromosome, c: usize) -> &[usize] {
        match self.comp_mcc[c] {
            Some(j) => &self.mcc_feasible[j][chrom.alternatives[j]],
            None => &self.pool,
        }
    }

    /// Uniform alternative per MCC and uniform feasible pool frequency per
    /// component, then pin repair. `None` if repair fails or the space is empty.
    pub fn random_chromosome(&self, rng: &mut dyn RngCore) -> Option<Chromosome> {
        let mut alternatives = Vec::with_capacity(self.alternatives.len());
        for j in 0..self.alternatives.len() {
            let usable = &self.usable[j];
            if usable.is_empty() {
                return None;
            }
            alternatives.push(usable[rng.gen_range(0..usable.len())]);
        }
        let mut chrom = Chromosome {
            alternatives,
            frequencies: FrequencyAssignment(vec![0; self.n_components()]),
        };
        for c in 0..self.n_components() {
            let opts = self.feasible(&chrom, c);
            chrom.frequencies.0[c] = opts[rng.gen_range(0..opts.len())];
        }
        self.repair(&mut chrom).then_some(chrom)
    }

    /// Re-randomizes each gene with probability `p_m`. A new alternative
    /// that cannot run at the current frequency gets a fresh feasible one.
    pub fn mutate(&self, chrom: &mut Chromosome, p_m: f64, rng: &mut dyn RngCore) {
        for c in 0..self.n_components() {
            if let Some(j) = self.comp_mcc[c] {
                if rng.gen::<f64>() < p_m {
                    let usable = &self.usable[j];
                    chrom.alternatives[j] = usable[rng.gen_range(0..usable.len())];
                    let opts = self.feasible(chrom, c);
                    if !opts.contains(&chrom.frequencies.0[c]) {
                        chrom.frequencies.0[c] = opts[rng.gen_range(0..opts.len())];
                    }
                }
            }
            if rng.gen::<f64>() < p_m {
                let opts = self.feasible(chrom, c);
                chrom.frequencies.0[c] = opts[rng.gen_range(0..opts.len())];
            }
        }
    }

    /// Re-randomizes one uniformly chosen gene.
    pub fn mutate_one(&self, chrom: &mut Chromosome, rng: &mut dyn RngCore) {
        let n_mcc = self.alternatives.len();
        let g = rng.gen_range(0..n_mcc + self.n_components());
        if g < n_mcc {
            let usable = &self.usable[g];
            chrom.alternatives[g] = usable[rng.gen_range(0..usable.len())];
            let c = self.eval.table.mcc(g);
            let opts = self.feasible(chrom, c);
            if !opts.contains(&chrom.frequencies.0[c]) {
                chrom.frequencies.0[c] = opts[rng.gen_range(0..opts.len())];
            }
        } else {
            let c = g - n_mcc;
            let opts = self.feasible(chrom, c);
            chrom.frequencies.0[c] = opts[rng.gen_range(0..opts.len())];
        }
    }

    /// Reduces the number of distinct frequencies to `n_fpin` by remapping
    /// the rarest frequency (lowest index on ties) of every component using
    /// it to the nearest remaining frequency that component accepts. Returns
    /// false when no frequency can be removed.
    pub fn repair(&self, chrom: &mut Chromosome) -> bool {
        let n_fpin = self.eval.model.n_fpin;
        let grid = &self.eval.grid;
        loop {
            let used: BTreeSet<usize> = chrom.frequencies.0.iter().copied().collect();
            if used.len() <= n_fpin {
                return true;
            }
            let mut by_rarity: Vec<(usize, usize)> = used
                .iter()
                .map(|&f| (chrom.frequencies.0.iter().filter(|&&g| g == f).count(), f))
                .collect();
            by_rarity.sort_unstable();
            let mut removed = false;
            'candidates: for &(_, r) in &by_rarity {
                let mut remap = Vec::new();
                for c in 0..self.n_components() {
                    if chrom.frequencies.0[c] != r {
                        continue;
                    }
                    let opts = self.feasible(chrom, c);
                    let target = used
                        .iter()
                        .copied()
                        .filter(|&f| f != r && opts.contains(&f))
                        .min_by(|&x, &y| {
                            (grid[x] - grid[r])
                                .abs()
                                .total_cmp(&(grid[y] - grid[r]).abs())
                                .then(x.cmp(&y))
                        });
                    match target {
                        Some(t) => remap.push((c, t)),
                        None => continue 'candidates,
                    }
                }
                for (c, t) in remap {
                    chrom.frequencies.0[c] = t;
                }
                removed = true;
                break;
            }
            if !removed {
                return false;
            }
        }
    }

    /// Whether every gene lies in this space.
    pub fn contains(&self, chrom: &Chromosome) -> bool {
        chrom.alternatives.len() == self.alternatives.len()
            && chrom.frequencies.0.len() == self.n_components()
            && chrom
                .alternatives
                .iter()
                .enumerate()
                .all(|(j, a)| self.alternatives[j].contains(a))
            && (0..self.n_components()).all(|c| self.feasible(chrom, c).contains(&chrom.frequencies.0[c]))
    }

    /// Evaluates and keeps the configuration only if it passes every check.
    pub fn evaluate(&self, chrom: Chromosome) -> Option<EvaluatedChromosome> {
        let ev = self.eval.evaluate(&chrom);
        ev.is_valid().then(|| EvaluatedChromosome {
            chromosome: chrom,
            energy: ev.energy,
            area: ev.area,
            latencies: ev.latencies,
        })
    }

    /// Number of configurations in the space before the pin limit.
    pub fn raw_size(&self) -> f64 {
        let alts: f64 = self.alternatives.iter().map(|a| a.len() as f64).product();
        alts * (self.pool.len() as f64).powi(self.n_components() as i32)
    }
}

/// Recombines two parents into two children.
pub trait Crossover: Sync {
    fn cross(
        &self,
        a: &Chromosome,
        b: &Chromosome,
        space: &SearchSpace,
        rng: &mut dyn RngCore,
    ) -> (Chromosome, Chromosome);
}

/// Single cut over the component-ordered gene string, where an MCC's
/// alternative and frequency genes stay adjacent so a cut never separates them.
#[derive(Debug, Clone, Copy, Default)]
pub struct SinglePoint;

impl Crossover for SinglePoint {
    fn cross(
        &self,
        a: &Chromosome,
        b: &Chromosome,
        space: &SearchSpace,
        rng: &mut dyn RngCore,
    ) -> (Chromosome, Chromosome) {
        let n = space.n_components();
        if n < 2 {
            return (a.clone(), b.clone());
        }
        let cut = rng.gen_range(1..n);
        let mut x = a.clone();
        let mut y = b.clone();
        for c in cut..n {
            std::mem::swap(&mut x.frequencies.0[c], &mut y.frequencies.0[c]);
            if let Some(j) = space.comp_mcc[c] {
                std::mem::swap(&mut x.alternatives[j], &mut y.alternatives[j]);
            }
        }
        (x, y)
    }
}

/// Fills `k` valid chromosomes or gives up after `limit` random draws.
pub fn init_pop(
    space: &SearchSpace,
    k: usize,
    limit: usize,
    rng: &mut dyn RngCore,
) -> Option<Vec<EvaluatedChromosome>> {
    let mut pop = Vec::with_capacity(k);
    let mut attempts = 0;
    while pop.len() < k {
        if attempts >= limit {
            return None;
        }
        attempts += 1;
        if let Some(ev) = space.random_chromosome(rng).and_then(|c| space.evaluate(c)) {
            pop.push(ev);
        }
    }
    Some(pop)
}

fn normalizers(set: &[EvaluatedChromosome]) -> (f64, f64) {
    set.iter()
        .fold((0.0f64, 0.0f64), |(e, a), x| (e.max(x.energy), a.max(x.area)))
}

fn costs(set: &[EvaluatedChromosome], w_e: f64, w_a: f64) -> Vec<f64> {
    let (e_max, a_max) = normalizers(set);
    set.iter()
        .map(|x| fitness(x.energy, x.area, e_max, a_max, w_e, w_a))
        .collect()
}

/// Inserts the elite into the population, takes the non-dominated members
/// of the merged set as the new elite (one per objective pair, existing
/// elite members first) and trims the merged set back to `k` lowest-cost
/// members. Returns `(population, elite, population costs)`.
pub fn pareto_elite(
    pop: Vec<EvaluatedChromosome>,
    elite: Vec<EvaluatedChromosome>,
    k: usize,
    params: &GaParams,
) -> (Vec<EvaluatedChromosome>, Vec<EvaluatedChromosome>, Vec<f64>) {
    let mut seen = HashSet::new();
    let merged: Vec<EvaluatedChromosome> = elite
        .into_iter()
        .chain(pop)
        .filter(|x| seen.insert(x.chromosome.clone()))
        .collect();
    let cost = costs(&merged, params.weight_energy, params.weight_area);

    let new_elite = if params.dynamic_elitism {
        let objs: Vec<(f64, f64)> = merged.iter().map(|x| x.objectives()).collect();
        pareto::non_dominated_unique(&objs)
            .into_iter()
            .map(|i| merged[i].clone())
            .collect()
    } else {
        (0..merged.len())
            .min_by(|&i, &j| cost[i].total_cmp(&cost[j]).then(merged[i].chromosome.cmp(&merged[j].chromosome)))
            .map(|i| vec![merged[i].clone()])
            .unwrap_or_default()
    };

    let mut order: Vec<usize> = (0..merged.len()).collect();
    order.sort_by(|&i, &j| {
        cost[i]
            .total_cmp(&cost[j])
            .then_with(|| merged[i].chromosome.cmp(&merged[j].chromosome))
    });
    order.truncate(k);
    let pop_costs = order.iter().map(|&i| cost[i]).collect();
    let pop = order.into_iter().map(|i| merged[i].clone()).collect();
    (pop, new_elite, pop_costs)
}

/// Draws `max(2, round(p_s * |pop|))` parents with probability proportional
/// to `1 / (cost + 1e-9)`.
pub fn roulette<'p>(
    pop: &'p [EvaluatedChromosome],
    costs: &[f64],
    p_s: f64,
    rng: &mut dyn RngCore,
) -> Vec<&'p EvaluatedChromosome> {
    let n = ((p_s * pop.len() as f64).round() as usize).max(2);
    let weights: Vec<f64> = costs.iter().map(|c| 1.0 / (c + ROULETTE_EPS)).collect();
    let dist = WeightedIndex::new(&weights).expect("positive roulette weights");
    (0..n).map(|_| &pop[dist.sample(rng)]).collect()
}

/// Outcome of one GA run over one search space.
#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub front: Vec<EvaluatedChromosome>,
    pub abandoned: bool,
}

/// The elite genetic algorithm over `space`. Returns the final elite or an
/// abandonment when the initial population cannot be filled.
pub fn evolve(
    space: &SearchSpace,
    params: &GaParams,
    crossover: &dyn Crossover,
    seed: u64,
) -> EvolveOutcome {
    evolve_traced(space, params, crossover, seed, |_, _| {})
}

/// [`evolve`] calling `trace(generation, elite)` after each elitism step.
pub fn evolve_traced(
    space: &SearchSpace,
    params: &GaParams,
    crossover: &dyn Crossover,
    seed: u64,
    mut trace: impl FnMut(usize, &[EvaluatedChromosome]),
) -> EvolveOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = params.k;
    let Some(mut pop) = init_pop(space, k, params.attempt_limit(), &mut rng) else {
        return EvolveOutcome {
            front: Vec::new(),
            abandoned: true,
        };
    };
    let mut elite = Vec::new();
    for g in 0..params.generations {
        let (survivors, new_elite, cost) = pareto_elite(pop, elite, k, params);
        elite = new_elite;
        trace(g, &elite);
        let parents = roulette(&survivors, &cost, params.p_s, &mut rng);
        let mut children = Vec::with_capacity(k);
        while children.len() < k {
            let a = parents[rng.gen_range(0..parents.len())];
            let b = parents[rng.gen_range(0..parents.len())];
            let mut produced = false;
            for _ in 0..params.child_retries.max(1) {
                let (x, y) = if rng.gen::<f64>() < params.p_c {
                    crossover.cross(&a.chromosome, &b.chromosome, space, &mut rng)
                } else {
                    (a.chromosome.clone(), b.chromosome.clone())
                };
                for mut child in [x, y] {
                    if children.len() >= k {
                        break;
                    }
                    space.mutate(&mut child, params.p_m, &mut rng);
                    if !space.repair(&mut child) {
                        continue;
                    }
                    if let Some(ev) = space.evaluate(child) {
                        children.push(ev);
                        produced = true;
                    }
                }
                if produced {
                    break;
                }
            }
            if !produced {
                children.push(a.clone());
            }
        }
        pop = children;
    }
    let (last, elite, _) = pareto_elite(pop, elite, k, params);
    trace(params.generations, &elite);
    let front = if params.dynamic_elitism {
        elite
    } else {
        let all: Vec<EvaluatedChromosome> = elite.into_iter().chain(last).collect();
        let objs: Vec<(f64, f64)> = all.iter().map(|x| x.objectives()).collect();
        pareto::non_dominated_unique(&objs)
            .into_iter()
            .map(|i| all[i].clone())
            .collect()
    };
    EvolveOutcome {
        front,
        abandoned: false,
    }
}

/// Every valid configuration of `space` reduced to its non-dominated set.
/// Refuses spaces whose raw size exceeds `limit`.
pub fn exhaustive_subspace(space: &SearchSpace, limit: f64) -> Result<Vec<EvaluatedChromosome>> {
    let size = space.raw_size();
    if size > limit {
        return Err(DseError::TooLarge {
            size: format!("{size:.0}"),
            limit: limit as u64,
        });
    }
    let n_mcc = space.alternatives.len();
    let n_comp = space.n_components();
    let n_fpin = space.eval.model.n_fpin;
    let mut found = Vec::new();
    let mut alts = vec![0usize; n_mcc];
    let mut chrom = Chromosome {
        alternatives: vec![0; n_mcc],
        frequencies: FrequencyAssignment(vec![0; n_comp]),
    };

    fn freqs(
        space: &SearchSpace,
        chrom: &mut Chromosome,
        c: usize,
        n_fpin: usize,
        found: &mut Vec<EvaluatedChromosome>,
    ) {
        if c == chrom.frequencies.0.len() {
            if let Some(ev) = space.evaluate(chrom.clone()) {
                found.push(ev);
            }
            return;
        }
        for &f in space.feasible(chrom, c).to_vec().iter() {
            chrom.frequencies.0[c] = f;
            if chrom.frequencies.0[..=c].iter().collect::<HashSet<_>>().len() <= n_fpin {
                freqs(space, chrom, c + 1, n_fpin, found);
            }
        }
    }

    loop {
        if space.alternatives.iter().any(Vec::is_empty) {
            break;
        }
        chrom.alternatives = (0..n_mcc).map(|j| space.alternatives[j][alts[j]]).collect();
        freqs(space, &mut chrom, 0, n_fpin, &mut found);
        let mut j = 0;
        while j < n_mcc {
            alts[j] += 1;
            if alts[j] < space.alternatives[j].len() {
                break;
            }
            alts[j] = 0;
            j += 1;
        }
        if j == n_mcc {
            break;
        }
    }
    let objs: Vec<(f64, f64)> = found.iter().map(|x| x.objectives()).collect();
    Ok(pareto::non_dominated_unique(&objs)
        .into_iter()
        .map(|i| found[i].clone())
        .collect())
}

/// A front member with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontPoint {
    pub point: EvaluatedChromosome,
    pub segment: usize,
    pub seed: u64,
    pub fallback: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ParetoFront {
    pub points: Vec<FrontPoint>,
}

impl ParetoFront {
    /// Non-dominated subset of the union, one point per objective pair
    /// (earlier points win ties), sorted by (energy, area).
    pub fn merge(points: Vec<FrontPoint>) -> Self {
        let objs: Vec<(f64, f64)> = points.iter().map(|p| p.point.objectives()).collect();
        let mut keep: Vec<FrontPoint> = pareto::non_dominated_unique(&objs)
            .into_iter()
            .map(|i| points[i].clone())
            .collect();
        keep.sort_by(|a, b| {
            a.point
                .energy
                .total_cmp(&b.point.energy)
                .then(a.point.area.total_cmp(&b.point.area))
        });
        ParetoFront { points: keep }
    }

    pub fn objectives(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| p.point.objectives()).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentStatus {
    /// Evolved over its own pruned subspace.
    Completed,
    /// FDSS left some MCC without an alternative; the fallback space was searched instead.
    RejectedUsedFallback,
    /// The initial population could not be filled; the fallback space was searched instead.
    AbandonedUsedFallback,
    /// The reserved fallback slot.
    Fallback,
    /// Nothing valid could be found, even in the fallback space.
    Abandoned,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentReport {
    pub segment: usize,
    pub seed: u64,
    pub status: SegmentStatus,
    pub front_size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LcsoResult {
    pub front: ParetoFront,
    pub segments: Vec<SegmentReport>,
}

/// Evolves every FDSS segment plus the reserved fallback slot in parallel
/// (segment `i` seeded with `seed + i`) and merges the per-segment fronts.
pub fn run_lcso(
    eval: &Evaluator,
    fdss: &FdssResult,
    params: &GaParams,
    seed: u64,
    threads: usize,
) -> Result<LcsoResult> {
    params.validate()?;
    let fallback = SearchSpace::from_subspace(eval, &fdss.fallback);
    let n_slots = fdss.outcomes.len() + 1;
    let run_slot = |slot: usize| -> (SegmentReport, Vec<FrontPoint>) {
        let slot_seed = seed.wrapping_add(slot as u64);
        let on_fallback = |status: SegmentStatus| {
            let out = evolve(&fallback, params, &SinglePoint, slot_seed);
            let status = if out.abandoned { SegmentStatus::Abandoned } else { status };
            (status, out.front, true)
        };
        let (status, front, used_fallback) = match fdss.outcomes.get(slot) {
            None => on_fallback(SegmentStatus::Fallback),
            Some(SegmentOutcome::Rejected { .. }) => on_fallback(SegmentStatus::RejectedUsedFallback),
            Some(SegmentOutcome::Accepted(sub)) => {
                let space = SearchSpace::from_subspace(eval, sub);
                let out = evolve(&space, params, &SinglePoint, slot_seed);
                if out.abandoned {
                    log::info!("segment {slot}: initial population abandoned, searching the original space");
                    on_fallback(SegmentStatus::AbandonedUsedFallback)
                } else {
                    (SegmentStatus::Completed, out.front, false)
                }
            }
        };
        let report = SegmentReport {
            segment: slot,
            seed: slot_seed,
            status,
            front_size: front.len(),
        };
        let points = front
            .into_iter()
            .map(|point| FrontPoint {
                point,
                segment: slot,
                seed: slot_seed,
                fallback: used_fallback,
            })
            .collect();
        (report, points)
    };
    let results: Vec<(SegmentReport, Vec<FrontPoint>)> =
        crate::with_threads(threads, || (0..n_slots).into_par_iter().map(run_slot).collect());
    let mut segments = Vec::with_capacity(n_slots);
    let mut points = Vec::new();
    for (r, p) in results {
        segments.push(r);
        points.extend(p);
    }
    let front = ParetoFront::merge(points);
    if front.is_empty() {
        log::warn!("every segment and the fallback space were abandoned; the constraints look infeasible");
    }
    Ok(LcsoResult { front, segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdss::run_fdss;
    use crate::model::{FreqGrid, LatencyConstraint, Mcc, MccAlternative, NodeRef, Psm, SystemModel};
    use crate::pathfind::{build_graph, find_etoe_paths};

    fn tiny(bound: f64) -> SystemModel {
        let alt = |id: &str, ec: u64, power: f64, area: f64| MccAlternative {
            id: id.into(),
            exec_cycles: ec,
            critical_path: 10.0,
            power,
            f_max: 100.0,
            area,
        };
        SystemModel {
            psms: vec![Psm {
                id: "p".into(),
                period: 1e-6,
                states: vec!["a".into(), "b".into()],
                transitions: vec![("a".into(), "b".into()), ("b".into(), "a".into())],
                mccs: vec![Mcc {
                    id: "m".into(),
                    attached_state: "a".into(),
                    alternatives: vec![alt("x", 10, 5.0, 3.0), alt("y", 20, 2.0, 5.0), alt("z", 40, 1.0, 9.0)],
                }],
                handshake_in_ports: vec![],
                handshake_out_ports: vec![],
            }],
            links: vec![],
            constraints: vec![LatencyConstraint {
                id: "c".into(),
                start: NodeRef { psm: "p".into(), node: "a".into() },
                end: NodeRef { psm: "p".into(), node: "b".into() },
                bound,
            }],
            n_fpin: 2,
            freq_grid: FreqGrid { f_lo: 20.0, f_hi: 100.0, step: 20.0 },
        }
    }

    fn small_params() -> GaParams {
        GaParams {
            k: 8,
            generations: 20,
            ..GaParams::default()
        }
    }

    #[test]
    fn fitness_spot_values() {
        assert_eq!(fitness(0.0, 0.0, 3.0, 4.0, 2.0, 1.0), 0.0);
        let top = fitness(3.0, 4.0, 3.0, 4.0, 2.0, 1.0);
        assert!((top - (-3.0 * 1e-5f64.ln())).abs() < 1e-9);
        let half = fitness(1.5, 2.0, 3.0, 4.0, 2.0, 1.0);
        assert!((half - (-3.0 * 0.5f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn fitness_scale_invariance() {
        let c1 = fitness(2.0, 1.0, 5.0, 3.0, 2.0, 1.0);
        let c2 = fitness(2.0 * 7.5, 1.0, 5.0 * 7.5, 3.0, 2.0, 1.0);
        assert!((c1 - c2).abs() < 1e-12);
    }

    fn point(e: f64, a: f64, tag: usize) -> EvaluatedChromosome {
        EvaluatedChromosome {
            chromosome: Chromosome {
                alternatives: vec![tag],
                frequencies: FrequencyAssignment(vec![]),
            },
            energy: e,
            area: a,
            latencies: vec![],
        }
    }

    #[test]
    fn elite_merges_and_drops_dominated() {
        let params = GaParams::default();
        let elite = vec![point(1.0, 5.0, 0)];
        let pop = vec![point(2.0, 4.0, 1), point(3.0, 3.0, 2), point(2.0, 6.0, 3)];
        let (p, e, _) = pareto_elite(pop.clone(), elite, 10, &params);
        let objs: Vec<_> = e.iter().map(|x| x.objectives()).collect();
        assert_eq!(objs, vec![(1.0, 5.0), (2.0, 4.0), (3.0, 3.0)]);
        assert_eq!(p.len(), 4);
        let (_, e2, _) = pareto_elite(pop, e.clone(), 10, &params);
        assert_eq!(e, e2);
    }

    #[test]
    fn single_member_becomes_elite() {
        let (_, e, _) = pareto_elite(vec![point(1.0, 1.0, 0)], vec![], 2, &GaParams::default());
        assert_eq!(e.len(), 1);
    }

    #[test]
    fn trim_discards_highest_cost() {
        let pop = vec![point(1.0, 1.0, 0), point(9.0, 9.0, 1), point(2.0, 2.0, 2)];
        let (p, _, c) = pareto_elite(pop, vec![], 2, &GaParams::default());
        assert_eq!(p.iter().map(|x| x.chromosome.alternatives[0]).collect::<Vec<_>>(), vec![0, 2]);
        assert!(c[0] <= c[1]);
    }

    #[test]
    fn roulette_prefers_low_cost() {
        let pop = vec![point(1.0, 1.0, 0), point(2.0, 2.0, 1)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let picks = roulette(&pop, &[0.01, 10.0], 1.0, &mut rng);
        assert_eq!(picks.len(), 2);
        let mut zero = 0;
        for _ in 0..200 {
            zero += roulette(&pop, &[0.01, 10.0], 1.0, &mut rng)
                .iter()
                .filter(|p| p.chromosome.alternatives[0] == 0)
                .count();
        }
        assert!(zero > 380);
    }

    fn setup(m: &SystemModel) -> (crate::pathfind::EtoEGraph, crate::pathfind::EtoEPathSet) {
        let g = build_graph(m);
        let ps = find_etoe_paths(&g, &m.constraints).unwrap();
        (g, ps)
    }

    #[test]
    fn loose_bound_fills_population() {
        let m = tiny(1.0);
        let (g, ps) = setup(&m);
        let ev = Evaluator::new(&m, &g, &ps);
        let f = run_fdss(&m, 2, 1).unwrap();
        let space = SearchSpace::from_subspace(&ev, &f.fallback);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pop = init_pop(&space, 10, 100, &mut rng).unwrap();
        assert_eq!(pop.len(), 10);
        for p in &pop {
            assert!(ev.check(&p.chromosome).valid);
            assert!(p.chromosome.frequencies.distinct() <= m.n_fpin);
        }
    }

    #[test]
    fn zero_bound_abandons() {
        let m = tiny(0.0);
        let (g, ps) = setup(&m);
        let ev = Evaluator::new(&m, &g, &ps);
        let f = run_fdss(&m, 2, 1).unwrap();
        let space = SearchSpace::from_subspace(&ev, &f.fallback);
        let out = evolve(&space, &small_params(), &SinglePoint, 1);
        assert!(out.abandoned && out.front.is_empty());
        let r = run_lcso(&ev, &f, &small_params(), 1, 1).unwrap();
        assert!(r.front.is_empty());
        assert!(r.segments.iter().all(|s| s.status == SegmentStatus::Abandoned));
    }

    #[test]
    fn repair_limits_distinct_frequencies() {
        let mut m = tiny(1.0);
        m.n_fpin = 1;
        let (g, ps) = setup(&m);
        let ev = Evaluator::new(&m, &g, &ps);
        let space = SearchSpace::new(&ev, vec![vec![0, 1, 2]], (0..5).collect());
        // components: fsm, mcc; both frequencies used once, so the lower index goes
        let mut c = Chromosome {
            alternatives: vec![0],
            frequencies: FrequencyAssignment(vec![0, 4]),
        };
        assert!(space.repair(&mut c));
        assert_eq!(c.frequencies.0, vec![4, 4]);
        // the MCC only accepts grid index 4 (100 MHz) here, the FSM must follow
        let narrow = SearchSpace::new(&ev, vec![vec![2]], vec![0, 4]);
        let mut d = Chromosome {
            alternatives: vec![2],
            frequencies: FrequencyAssignment(vec![0, 4]),
        };
        assert!(narrow.repair(&mut d));
        assert_eq!(d.frequencies.0, vec![4, 4]);
    }

    #[test]
    fn crossover_keeps_mcc_genes_together() {
        let m = tiny(1.0);
        let (g, ps) = setup(&m);
        let ev = Evaluator::new(&m, &g, &ps);
        let space = SearchSpace::new(&ev, vec![vec![0, 1, 2]], (0..5).collect());
        let a = Chromosome {
            alternatives: vec![0],
            frequencies: FrequencyAssignment(vec![1, 1]),
        };
        let b = Chromosome {
            alternatives: vec![2],
            frequencies: FrequencyAssignment(vec![3, 3]),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (x, y) = SinglePoint.cross(&a, &b, &space, &mut rng);
        assert_eq!(x.alternatives, vec![2]);
        assert_eq!(x.frequencies.0, vec![1, 3]);
        assert_eq!(y.alternatives, vec![0]);
        assert_eq!(y.frequencies.0, vec![3, 1]);
    }

    #[test]
    fn evolve_is_deterministic_and_valid() {
        let m = tiny(1.0);
        let (g, ps) = setup(&m);
        let ev = Evaluator::new(&m, &g, &ps);
        let f = run_fdss(&m, 3, 1).unwrap();
        let a = run_lcso(&ev, &f, &small_params(), 9, 1).unwrap();
        let b = run_lcso(&ev, &f, &small_params(), 9, 4).unwrap();
        assert_eq!(a.front, b.front);
        assert!(pareto::is_antichain(&a.front.objectives()));
        for p in &a.front.points {
            assert!(ev.check(&p.point.chromosome).valid);
        }
        assert_eq!(a.segments.last().unwrap().status, SegmentStatus::Fallback);
    }

    #[test]
    fn elite_never_loses_ground() {
        let m = tiny(1.0);
        let (g, ps) = setup(&m);
        let ev = Evaluator::new(&m, &g, &ps);
        let f = run_fdss(&m, 2, 1).unwrap();
        let space = SearchSpace::from_subspace(&ev, &f.fallback);
        let mut prev: Vec<(f64, f64)> = Vec::new();
        evolve_traced(&space, &small_params(), &SinglePoint, 5, |_, elite| {
            let cur: Vec<(f64, f64)> = elite.iter().map(|x| x.objectives()).collect();
            for p in &prev {
                assert!(cur.iter().any(|q| q.0 <= p.0 && q.1 <= p.1));
            }
            prev = cur;
        });
    }

    #[test]
    fn exhaustive_matches_brute_force() {
        let m = tiny(1.0);
        let (g, ps) = setup(&m);
        let ev = Evaluator::new(&m, &g, &ps);
        let space = SearchSpace::new(&ev, vec![vec![0, 1, 2]], (0..5).collect());
        let front = exhaustive_subspace(&space, 1e6).unwrap();
        let mut all = Vec::new();
        for a in 0..3 {
            for f0 in 0..5 {
                for f1 in 0..5 {
                    let c = Chromosome {
                        alternatives: vec![a],
                        frequencies: FrequencyAssignment(vec![f0, f1]),
                    };
                    let e = ev.evaluate(&c);
                    if e.is_valid() {
                        all.push((e.energy, e.area));
                    }
                }
            }
        }
        let mut expect: Vec<(f64, f64)> = all
            .iter()
            .copied()
            .filter(|&p| !all.iter().any(|&q| pareto::dominates(q, p)))
            .collect();
        expect.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        expect.dedup();
        let mut got: Vec<(f64, f64)> = front.iter().map(|x| x.objectives()).collect();
        got.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        assert_eq!(got, expect);
    }
}
