//! Frequency-based design space segmentation.
//!
//! Frequency combinations of `n_fpin` grid values are enumerated, sliced into
//! `n_seg - 1` contiguous segments and each segment's deduplicated frequency
//! pool is used to re-clock every MCC alternative at the lowest pool
//! frequency that still meets its period. Alternatives dominated in
//! (scaled energy, area) are pruned per MCC. The last slot is reserved for
//! the unpruned original space.

use std::ops::Range;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{DseError, Result};
use crate::model::{ComponentTable, Mcc, SystemModel};
use crate::pareto;

/// Ascending grid indices, one per available clock pin.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct FrequencyCombo(pub Vec<usize>);

#[derive(Debug, Clone, Serialize)]
pub struct ComboSet {
    pub grid: Vec<f64>,
    pub combos: Vec<FrequencyCombo>,
    /// Highest per-MCC minimum feasible scaled frequency (MHz).
    pub max_min_frequency: f64,
}

/// Refuse to materialize more combinations than this.
pub const MAX_COMBOS: u64 = 5_000_000;

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Minimum over an MCC's period-feasible alternatives of the scaled frequency.
pub fn mcc_min_frequency(mcc: &Mcc, period: f64) -> Option<f64> {
    mcc.alternatives
        .iter()
        .map(|a| (a.min_frequency(period), a.f_max))
        .filter(|(fs, fmax)| fs <= fmax)
        .map(|(fs, _)| fs)
        .min_by(f64::total_cmp)
}

/// All ascending `min(n_fpin, |grid|)`-subsets of the grid whose largest
/// frequency reaches the highest per-MCC minimum frequency, in
/// lexicographic order.
pub fn enumerate_combos(model: &SystemModel) -> Result<ComboSet> {
    let grid = model.grid();
    let mut max_min: f64 = 0.0;
    for psm in &model.psms {
        for mcc in &psm.mccs {
            let f = mcc_min_frequency(mcc, psm.period).ok_or_else(|| {
                DseError::Infeasible(format!(
                    "MCC '{}/{}' has no alternative that meets period {} s",
                    psm.id, mcc.id, psm.period
                ))
            })?;
            max_min = max_min.max(f);
        }
    }
    let m = model.n_fpin.min(grid.len());
    let total = binomial(grid.len() as u64, m as u64);
    if total > MAX_COMBOS {
        return Err(DseError::TooLarge {
            size: total.to_string(),
            limit: MAX_COMBOS,
        });
    }

    let mut combos = Vec::new();
    let mut idx: Vec<usize> = (0..m).collect();
    let n = grid.len();
    if m > 0 {
        loop {
            if grid[idx[m - 1]] >= max_min * (1.0 - 1e-12) {
                combos.push(FrequencyCombo(idx.clone()));
            }
            // next lexicographic combination
            let mut i = m;
            while i > 0 && idx[i - 1] == n - m + (i - 1) {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..m {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    if combos.is_empty() {
        return Err(DseError::Infeasible(format!(
            "no frequency combination reaches {max_min:.3} MHz, the highest minimum MCC frequency"
        )));
    }
    Ok(ComboSet {
        grid,
        combos,
        max_min_frequency: max_min,
    })
}

/// One segment's slice of the combination list and its frequency pool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyPool {
    pub combos: Range<usize>,
    /// Deduplicated ascending grid indices.
    pub freqs: Vec<usize>,
}

/// Slices `combos` into `n_seg - 1` contiguous pools of
/// `floor(N / (n_seg - 1))` combinations, the remainder going to the last.
pub fn segment_combos(combos: &[FrequencyCombo], n_seg: usize) -> Result<Vec<FrequencyPool>> {
    if n_seg < 2 {
        return Err(DseError::Contract(format!("n_seg must be at least 2, got {n_seg}")));
    }
    let slots = n_seg - 1;
    let n = combos.len();
    let per = n / slots;
    let ranges: Vec<Range<usize>> = if per == 0 {
        log::warn!("{n} combinations for {slots} segments: emitting {n} single-combination pools");
        (0..n).map(|i| i..i + 1).collect()
    } else {
        (0..slots)
            .map(|i| i * per..if i + 1 == slots { n } else { (i + 1) * per })
            .collect()
    };
    Ok(ranges
        .into_iter()
        .map(|r| FrequencyPool {
            freqs: pool_of(&combos[r.clone()]),
            combos: r,
        })
        .collect())
}

fn pool_of(combos: &[FrequencyCombo]) -> Vec<usize> {
    let mut f: Vec<usize> = combos.iter().flat_map(|c| c.0.iter().copied()).collect();
    f.sort_unstable();
    f.dedup();
    f
}

/// A surviving alternative with its re-assigned clock and scaled energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternativeChoice {
    /// Index into the original MCC's alternative list.
    pub alternative: usize,
    /// Grid index of the assigned frequency.
    pub assigned: usize,
    pub assigned_mhz: f64,
    /// `assigned_mhz * power / (f_max * period)`.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentedSubspace {
    pub segment_index: usize,
    /// Deduplicated ascending grid indices.
    pub freq_pool: Vec<usize>,
    /// Surviving alternatives per MCC, in global MCC order.
    pub choices: Vec<Vec<AlternativeChoice>>,
    pub is_fallback: bool,
    /// Number of frequency combinations behind the pool.
    pub n_combos: usize,
}

impl SegmentedSubspace {
    /// Copy of `model` whose MCCs keep only the surviving alternatives.
    pub fn pruned_model(&self, model: &SystemModel) -> SystemModel {
        let table = ComponentTable::new(model);
        let mut out = model.clone();
        for (j, choices) in self.choices.iter().enumerate() {
            let (p, m) = table.mcc_refs[j];
            let orig = &model.psms[p].mccs[m].alternatives;
            out.psms[p].mccs[m].alternatives =
                choices.iter().map(|c| orig[c.alternative].clone()).collect();
        }
        out
    }

    /// `prod(surviving alternatives) * n_combos^components`.
    pub fn size(&self, model: &SystemModel) -> BigUint {
        let alts = self
            .choices
            .iter()
            .fold(BigUint::from(1u32), |acc, c| acc * c.len());
        alts * BigUint::from(self.n_combos).pow(model.n_components() as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SegmentOutcome {
    Accepted(SegmentedSubspace),
    Rejected {
        segment_index: usize,
        freq_pool: Vec<usize>,
        /// First MCC left without a valid alternative.
        mcc: String,
    },
}

impl SegmentOutcome {
    pub fn segment_index(&self) -> usize {
        match self {
            SegmentOutcome::Accepted(s) => s.segment_index,
            SegmentOutcome::Rejected { segment_index, .. } => *segment_index,
        }
    }
}

/// Assigns each alternative the smallest pool frequency within
/// `[scaled minimum, f_max]` and keeps the per-MCC non-dominated set in
/// (scaled energy, area). Rejects the segment when some MCC has no
/// alternative left.
pub fn prune_segment(
    model: &SystemModel,
    segment_index: usize,
    pool: &[usize],
    n_combos: usize,
) -> SegmentOutcome {
    let grid = model.grid();
    let mut choices = Vec::with_capacity(model.n_mccs());
    for psm in &model.psms {
        for mcc in &psm.mccs {
            let valid: Vec<AlternativeChoice> = mcc
                .alternatives
                .iter()
                .enumerate()
                .filter_map(|(i, alt)| {
                    let assigned = pool
                        .iter()
                        .copied()
                        .find(|&f| alt.accepts_frequency(grid[f], psm.period))?;
                    let mhz = grid[assigned];
                    Some(AlternativeChoice {
                        alternative: i,
                        assigned,
                        assigned_mhz: mhz,
                        energy: mhz * alt.scaling_factor(psm.period),
                    })
                })
                .collect();
            if valid.is_empty() {
                return SegmentOutcome::Rejected {
                    segment_index,
                    freq_pool: pool.to_vec(),
                    mcc: format!("{}/{}", psm.id, mcc.id),
                };
            }
            let objectives: Vec<(f64, f64)> = valid
                .iter()
                .map(|c| (c.energy, mcc.alternatives[c.alternative].area))
                .collect();
            let keep = pareto::non_dominated(&objectives);
            choices.push(keep.into_iter().map(|i| valid[i].clone()).collect());
        }
    }
    SegmentOutcome::Accepted(SegmentedSubspace {
        segment_index,
        freq_pool: pool.to_vec(),
        choices,
        is_fallback: false,
        n_combos,
    })
}

/// The unpruned original space over the union of all combinations. Only
/// alternatives that can meet their period at some pool frequency are listed.
pub fn fallback_subspace(model: &SystemModel, combos: &ComboSet, segment_index: usize) -> SegmentedSubspace {
    let pool = pool_of(&combos.combos);
    let grid = &combos.grid;
    let choices = model
        .psms
        .iter()
        .flat_map(|psm| psm.mccs.iter().map(move |m| (psm, m)))
        .map(|(psm, mcc)| {
            mcc.alternatives
                .iter()
                .enumerate()
                .filter_map(|(i, alt)| {
                    let assigned = pool
                        .iter()
                        .copied()
                        .find(|&f| alt.accepts_frequency(grid[f], psm.period))?;
                    Some(AlternativeChoice {
                        alternative: i,
                        assigned,
                        assigned_mhz: grid[assigned],
                        energy: grid[assigned] * alt.scaling_factor(psm.period),
                    })
                })
                .collect()
        })
        .collect();
    SegmentedSubspace {
        segment_index,
        freq_pool: pool,
        choices,
        is_fallback: true,
        n_combos: combos.combos.len(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FdssResult {
    pub combos: ComboSet,
    pub pools: Vec<FrequencyPool>,
    pub outcomes: Vec<SegmentOutcome>,
    pub fallback: SegmentedSubspace,
}

impl FdssResult {
    pub fn accepted(&self) -> impl Iterator<Item = &SegmentedSubspace> {
        self.outcomes.iter().filter_map(|o| match o {
            SegmentOutcome::Accepted(s) => Some(s),
            SegmentOutcome::Rejected { .. } => None,
        })
    }

    /// Sum of accepted segment sizes plus the fallback.
    pub fn total_size(&self, model: &SystemModel) -> BigUint {
        self.accepted()
            .map(|s| s.size(model))
            .fold(self.fallback.size(model), |a, b| a + b)
    }

    /// Sum of accepted segment sizes, fallback excluded.
    pub fn pruned_size(&self, model: &SystemModel) -> BigUint {
        self.accepted()
            .map(|s| s.size(model))
            .fold(BigUint::from(0u32), |a, b| a + b)
    }
}

/// Segments, prunes (in parallel over `threads` workers) and appends the
/// reserved fallback slot.
pub fn run_fdss(model: &SystemModel, n_seg: usize, threads: usize) -> Result<FdssResult> {
    let combos = enumerate_combos(model)?;
    let pools = segment_combos(&combos.combos, n_seg)?;
    let work = || -> Vec<SegmentOutcome> {
        pools
            .par_iter()
            .enumerate()
            .map(|(i, pool)| prune_segment(model, i, &pool.freqs, pool.combos.len()))
            .collect()
    };
    let outcomes = crate::with_threads(threads, work);
    for o in &outcomes {
        if let SegmentOutcome::Rejected { segment_index, mcc, .. } = o {
            log::info!("segment {segment_index} rejected: MCC '{mcc}' has no valid alternative");
        }
    }
    if outcomes.iter().all(|o| matches!(o, SegmentOutcome::Rejected { .. })) {
        log::warn!("every segment was rejected; only the fallback space remains");
    }
    let fallback = fallback_subspace(model, &combos, pools.len());
    Ok(FdssResult {
        combos,
        pools,
        outcomes,
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FreqGrid, MccAlternative, Psm};

    fn alt(id: &str, ec: u64, f_max: f64, power: f64, area: f64) -> MccAlternative {
        MccAlternative {
            id: id.into(),
            exec_cycles: ec,
            critical_path: 1000.0 / f_max,
            power,
            f_max,
            area,
        }
    }

    /// Period 1 s so that `exec_cycles = f_s * 1e6`.
    fn model_with(alts: Vec<Vec<MccAlternative>>, grid: FreqGrid, n_fpin: usize) -> SystemModel {
        SystemModel {
            psms: vec![Psm {
                id: "p".into(),
                period: 1.0,
                states: vec!["s".into()],
                transitions: vec![],
                mccs: alts
                    .into_iter()
                    .enumerate()
                    .map(|(i, a)| Mcc {
                        id: format!("m{i}"),
                        attached_state: "s".into(),
                        alternatives: a,
                    })
                    .collect(),
                handshake_in_ports: vec![],
                handshake_out_ports: vec![],
            }],
            links: vec![],
            constraints: vec![],
            n_fpin,
            freq_grid: grid,
        }
    }

    #[test]
    fn combos_filtered_by_highest_minimum() {
        let m = model_with(
            vec![vec![alt("a", 15_000_000, 100.0, 1.0, 1.0)]],
            FreqGrid { f_lo: 10.0, f_hi: 30.0, step: 10.0 },
            2,
        );
        let set = enumerate_combos(&m).unwrap();
        // brute force: all 2-subsets of {10,20,30} with max >= 15
        let mut brute = Vec::new();
        for a in 0..3 {
            for b in a + 1..3 {
                if set.grid[b] >= 15.0 {
                    brute.push(FrequencyCombo(vec![a, b]));
                }
            }
        }
        assert_eq!(set.combos, brute);
        assert_eq!(set.combos.len(), 3);
    }

    #[test]
    fn single_frequency_grid() {
        let m = model_with(
            vec![vec![alt("a", 5_000_000, 100.0, 1.0, 1.0)]],
            FreqGrid { f_lo: 10.0, f_hi: 10.5, step: 1.0 },
            1,
        );
        assert_eq!(enumerate_combos(&m).unwrap().combos.len(), 1);
    }

    #[test]
    fn minimum_above_grid_is_infeasible() {
        let m = model_with(
            vec![vec![alt("a", 50_000_000, 100.0, 1.0, 1.0)]],
            FreqGrid { f_lo: 10.0, f_hi: 30.0, step: 10.0 },
            2,
        );
        assert!(matches!(enumerate_combos(&m), Err(DseError::Infeasible(_))));
    }

    #[test]
    fn slicing_and_dedup() {
        let combos: Vec<_> = [[0, 1], [0, 2], [1, 2], [1, 3]]
            .iter()
            .map(|c| FrequencyCombo(c.to_vec()))
            .collect();
        let pools = segment_combos(&combos, 3).unwrap();
        assert_eq!(pools.len(), 2);
        assert_eq!(pools[0].combos, 0..2);
        assert_eq!(pools[0].freqs, vec![0, 1, 2]);
        assert_eq!(pools[1].freqs, vec![1, 2, 3]);
    }

    #[test]
    fn slicing_sizes_for_1329_combos() {
        let combos: Vec<_> = (0..1329).map(|i| FrequencyCombo(vec![i])).collect();
        let pools = segment_combos(&combos, 44).unwrap();
        assert_eq!(pools.len(), 43);
        let sizes: Vec<usize> = pools.iter().map(|p| p.combos.len()).collect();
        assert!(sizes[..42].iter().all(|&s| s == 30));
        assert_eq!(sizes.iter().sum::<usize>(), 1329);
        // the slices partition the list in order
        let flat: Vec<usize> = pools.iter().flat_map(|p| p.combos.clone()).collect();
        assert_eq!(flat, (0..1329).collect::<Vec<_>>());
    }

    #[test]
    fn too_few_combos_for_segments() {
        let combos = vec![FrequencyCombo(vec![0]), FrequencyCombo(vec![1])];
        let pools = segment_combos(&combos, 5).unwrap();
        assert_eq!(pools.len(), 2);
        assert!(segment_combos(&combos, 1).is_err());
    }

    #[test]
    fn closest_frequency_from_above() {
        let m = model_with(
            vec![vec![alt("a", 15_000_000, 100.0, 1.0, 1.0)]],
            FreqGrid { f_lo: 10.0, f_hi: 30.0, step: 10.0 },
            3,
        );
        match prune_segment(&m, 0, &[0, 1, 2], 1) {
            SegmentOutcome::Accepted(s) => assert_eq!(s.choices[0][0].assigned_mhz, 20.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn only_alternative_out_of_pool_rejects_segment() {
        let m = model_with(
            vec![vec![alt("a", 35_000_000, 100.0, 1.0, 1.0)]],
            FreqGrid { f_lo: 10.0, f_hi: 40.0, step: 10.0 },
            3,
        );
        assert!(matches!(
            prune_segment(&m, 0, &[0, 1, 2], 1),
            SegmentOutcome::Rejected { .. }
        ));
    }

    #[test]
    fn dominated_alternative_pruned() {
        // Pool {1 MHz}, period 1 s: E = 1 * power / f_max. f_max = 100 -> E = power / 100.
        let m = model_with(
            vec![vec![
                alt("x", 1, 100.0, 200.0, 5.0),
                alt("y", 1, 100.0, 300.0, 4.0),
                alt("z", 1, 100.0, 400.0, 6.0),
            ]],
            FreqGrid { f_lo: 1.0, f_hi: 2.0, step: 1.0 },
            1,
        );
        let s = match prune_segment(&m, 0, &[0], 1) {
            SegmentOutcome::Accepted(s) => s,
            other => panic!("{other:?}"),
        };
        let pts: Vec<(f64, f64)> = s.choices[0]
            .iter()
            .map(|c| (c.energy, m.psms[0].mccs[0].alternatives[c.alternative].area))
            .collect();
        // exhaustive pairwise check of the expected survivors
        let all = [(2.0, 5.0), (3.0, 4.0), (4.0, 6.0)];
        let expected: Vec<(f64, f64)> = all
            .iter()
            .copied()
            .filter(|&p| !all.iter().any(|&q| pareto::dominates(q, p)))
            .collect();
        assert_eq!(expected, vec![(2.0, 5.0), (3.0, 4.0)]);
        assert_eq!(pts, expected);
    }

    #[test]
    fn energy_is_linear_in_assigned_frequency() {
        let a = alt("x", 1_000_000, 100.0, 50.0, 1.0);
        let m = model_with(vec![vec![a.clone()]], FreqGrid { f_lo: 10.0, f_hi: 50.0, step: 10.0 }, 1);
        for pool in [vec![0usize], vec![2], vec![4]] {
            if let SegmentOutcome::Accepted(s) = prune_segment(&m, 0, &pool, 1) {
                let c = &s.choices[0][0];
                let slope = a.power / (a.f_max * 1.0);
                assert!((c.energy - c.assigned_mhz * slope).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_segments_means_one_pool_plus_fallback() {
        let m = model_with(
            vec![vec![alt("a", 1_000_000, 100.0, 1.0, 1.0)]],
            FreqGrid { f_lo: 10.0, f_hi: 40.0, step: 10.0 },
            2,
        );
        let r = run_fdss(&m, 2, 1).unwrap();
        assert_eq!(r.outcomes.len(), 1);
        assert!(r.fallback.is_fallback);
        assert_eq!(r.fallback.segment_index, 1);
    }
}
