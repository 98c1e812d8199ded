//! Exhaustive ground truth for tiny systems.
//!
//! Every (alternative selection, grid frequency per component) pair is
//! enumerated in lexicographic order and checked with the latency model.
//! Nothing from segmentation or the searchers is used here.

use num_bigint::BigUint;
use num_bigint::ToBigUint;
use rayon::prelude::*;
use serde::Serialize;

use crate::chromosome::{Chromosome, FrequencyAssignment};
use crate::error::{DseError, Result};
use crate::latency::{Evaluator, Violation};
use crate::model::design_space_size;

pub const DEFAULT_LIMIT: u64 = 1_000_000;
const CHUNK: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OraclePoint {
    #[serde(skip)]
    pub chromosome: Chromosome,
    pub energy: f64,
    pub area: f64,
}

/// One enumerated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRecord {
    pub index: u64,
    pub chromosome: Chromosome,
    pub energy: f64,
    pub area: f64,
    pub violation: Option<Violation>,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Non-dominated feasible points, one per objective pair (first in
    /// enumeration order), sorted by (energy, area).
    pub front: Vec<OraclePoint>,
    pub evaluated: u64,
    pub feasible: u64,
    /// Every configuration in enumeration order, when requested.
    pub log: Option<Vec<OracleRecord>>,
}

/// Mixed-radix digits of `index`, most significant first: alternatives of
/// every MCC, then the grid index of every component.
fn decode(mut index: u64, radices: &[u64], n_mcc: usize) -> Chromosome {
    let mut digits = vec![0usize; radices.len()];
    for d in (0..radices.len()).rev() {
        digits[d] = (index % radices[d]) as usize;
        index /= radices[d];
    }
    let freqs = digits.split_off(n_mcc);
    Chromosome {
        alternatives: digits,
        frequencies: FrequencyAssignment(freqs),
    }
}

/// Exact Pareto front of the whole design space. Refuses spaces larger
/// than `limit` configurations.
pub fn exhaustive_front(eval: &Evaluator, limit: u64, keep_log: bool, threads: usize) -> Result<OracleResult> {
    let model = eval.model;
    let n_grid = eval.grid.len() as u64;
    let size: BigUint = design_space_size(model, n_grid);
    if size > limit.to_biguint().expect("u64 fits") {
        return Err(DseError::TooLarge {
            size: size.to_string(),
            limit,
        });
    }
    let total: u64 = size.try_into().expect("bounded by limit");
    let mut radices: Vec<u64> = model
        .psms
        .iter()
        .flat_map(|p| p.mccs.iter().map(|m| m.alternatives.len() as u64))
        .collect();
    let n_mcc = radices.len();
    radices.extend(std::iter::repeat(n_grid).take(model.n_components()));

    let chunks: Vec<u64> = (0..total.div_ceil(CHUNK)).collect();
    let work = || -> Vec<Vec<OracleRecord>> {
        chunks
            .par_iter()
            .map(|&c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(total);
                (lo..hi)
                    .map(|index| {
                        let chromosome = decode(index, &radices, n_mcc);
                        let ev = eval.evaluate(&chromosome);
                        OracleRecord {
                            index,
                            chromosome,
                            energy: ev.energy,
                            area: ev.area,
                            violation: ev.violation,
                        }
                    })
                    .filter(|r| keep_log || r.violation.is_none())
                    .collect()
            })
            .collect()
    };
    let records: Vec<OracleRecord> = crate::with_threads(threads, work).into_iter().flatten().collect();

    let feasible: Vec<&OracleRecord> = records.iter().filter(|r| r.violation.is_none()).collect();
    let front = skyline(&feasible);
    log::info!(
        "exhaustive search: {total} configurations, {} feasible, {} on the front",
        feasible.len(),
        front.len()
    );
    Ok(OracleResult {
        evaluated: total,
        feasible: feasible.len() as u64,
        front,
        log: keep_log.then_some(records),
    })
}

/// Minimization skyline: sort by energy then area and keep each point whose
/// area is strictly below every area seen at a smaller energy or at the same
/// energy earlier in the order. Exact duplicates keep the first.
fn skyline(points: &[&OracleRecord]) -> Vec<OraclePoint> {
    let mut order: Vec<&OracleRecord> = points.to_vec();
    order.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.area.total_cmp(&b.area))
            .then(a.index.cmp(&b.index))
    });
    let mut out: Vec<OraclePoint> = Vec::new();
    let mut best_area = f64::INFINITY;
    for r in order {
        if r.area < best_area {
            best_area = r.area;
            out.push(OraclePoint {
                chromosome: r.chromosome.clone(),
                energy: r.energy,
                area: r.area,
            });
        }
    }
    out
}

/// One line per configuration: `index,chromosome,valid,energy,area`.
pub fn format_log(records: &[OracleRecord], grid: &[f64]) -> String {
    let mut s = String::from("index,chromosome,valid,energy,area\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.index,
            r.chromosome.encode(grid),
            r.violation.is_none(),
            r.energy,
            r.area
        ));
    }
    s
}
