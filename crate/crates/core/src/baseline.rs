//! Unsegmented comparison searchers: a GA over the original design space
//! and simulated annealing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::fdss::{enumerate_combos, fallback_subspace, SegmentedSubspace};
use crate::latency::Evaluator;
use crate::lcso::{evolve, fitness, EvaluatedChromosome, FrontPoint, GaParams, ParetoFront, SearchSpace, SinglePoint};

/// The original design space with every combination-derived frequency.
pub fn original_space(eval: &Evaluator) -> Result<SegmentedSubspace> {
    let combos = enumerate_combos(eval.model)?;
    Ok(fallback_subspace(eval.model, &combos, 0))
}

fn wrap(points: Vec<EvaluatedChromosome>, seed: u64) -> ParetoFront {
    ParetoFront::merge(
        points
            .into_iter()
            .map(|point| FrontPoint {
                point,
                segment: 0,
                seed,
                fallback: true,
            })
            .collect(),
    )
}

/// LCSO's genetic algorithm run once over the unsegmented space.
pub fn run_baseline_ga(eval: &Evaluator, params: &GaParams, seed: u64) -> Result<ParetoFront> {
    params.validate()?;
    let sub = original_space(eval)?;
    let space = SearchSpace::from_subspace(eval, &sub);
    let out = evolve(&space, params, &SinglePoint, seed);
    if out.abandoned {
        log::warn!("baseline GA could not fill its initial population");
    }
    Ok(wrap(out.front, seed))
}

#[derive(Debug, Clone, Serialize)]
pub struct SaParams {
    pub temp_0: f64,
    /// Drop from `temp_0` to the final temperature.
    pub temp_diff: f64,
    pub iters: usize,
    pub weight_energy: f64,
    pub weight_area: f64,
    pub init_attempt_limit: usize,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams {
            temp_0: 1000.0,
            temp_diff: 850.0,
            iters: 2000,
            weight_energy: 2.0,
            weight_area: 1.0,
            init_attempt_limit: 2300,
        }
    }
}

impl SaParams {
    /// Geometric schedule from `temp_0` to `temp_0 - temp_diff` over `iters` steps.
    pub fn temperature(&self, i: usize) -> f64 {
        let end = (self.temp_0 - self.temp_diff).max(0.0);
        if self.temp_0 <= 0.0 || self.iters <= 1 {
            return self.temp_0.max(0.0);
        }
        let t = i.min(self.iters - 1) as f64 / (self.iters - 1) as f64;
        if end == 0.0 {
            // a geometric schedule cannot reach zero, so cool linearly instead
            return self.temp_0 * (1.0 - t);
        }
        self.temp_0 * (end / self.temp_0).powf(t)
    }
}

/// Largest energy and area the space can reach, used as fixed normalizers.
fn space_maxima(space: &SearchSpace) -> (f64, f64) {
    let eval = space.eval;
    let mut e = 0.0;
    let mut a = 0.0;
    for (j, alts) in space.alternatives.iter().enumerate() {
        let (p, m) = eval.table.mcc_refs[j];
        let psm = &eval.model.psms[p];
        let (mut ej, mut aj) = (0.0f64, 0.0f64);
        for &i in alts {
            let alt = &psm.mccs[m].alternatives[i];
            let f_top = space.pool.iter().map(|&f| eval.grid[f]).fold(0.0, f64::max);
            ej = ej.max(f_top * alt.scaling_factor(psm.period));
            aj = aj.max(alt.area);
        }
        e += ej;
        a += aj;
    }
    let idle = eval.model.psms.len() + 2 * eval.model.links.len();
    (e + eval.idle_energy * idle as f64, a)
}

/// Simulated annealing over the unsegmented space. Every feasible state
/// visited is archived and the archive's non-dominated set is returned.
pub fn run_baseline_sa(eval: &Evaluator, params: &SaParams, seed: u64) -> Result<ParetoFront> {
    let sub = original_space(eval)?;
    let space = SearchSpace::from_subspace(eval, &sub);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (e_max, a_max) = space_maxima(&space);
    let cost = |x: &EvaluatedChromosome| {
        fitness(x.energy, x.area, e_max, a_max, params.weight_energy, params.weight_area)
    };

    let mut current = None;
    for _ in 0..params.init_attempt_limit {
        if let Some(ev) = space.random_chromosome(&mut rng).and_then(|c| space.evaluate(c)) {
            current = Some(ev);
            break;
        }
    }
    let Some(mut current) = current else {
        log::warn!("simulated annealing found no feasible start");
        return Ok(ParetoFront::default());
    };
    let mut current_cost = cost(&current);
    let mut archive = vec![current.clone()];

    for i in 0..params.iters {
        let temp = params.temperature(i);
        let mut cand = current.chromosome.clone();
        space.mutate_one(&mut cand, &mut rng);
        if !space.repair(&mut cand) {
            continue;
        }
        let Some(next) = space.evaluate(cand) else { continue };
        let next_cost = cost(&next);
        let delta = next_cost - current_cost;
        let accept = delta <= 0.0 || (temp > 0.0 && rng.gen::<f64>() < (-delta / temp).exp());
        archive.push(next.clone());
        if accept {
            current = next;
            current_cost = next_cost;
        }
    }
    Ok(wrap(archive, seed))
}
