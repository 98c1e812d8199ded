//! Front quality scores against a reference set.

use serde::Serialize;

use crate::error::{DseError, Result};
use crate::pareto;

/// Non-dominated (energy, area) points merged from several runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceSet {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Non-dominated subset of the union of `fronts`, one copy per point,
/// sorted by (energy, area).
pub fn build_reference(label: impl Into<String>, fronts: &[Vec<(f64, f64)>]) -> ReferenceSet {
    let all: Vec<(f64, f64)> = fronts.iter().flatten().copied().collect();
    if all.is_empty() {
        log::warn!("building a reference set from empty fronts");
    }
    let mut points: Vec<(f64, f64)> = pareto::non_dominated_unique(&all)
        .into_iter()
        .map(|i| all[i])
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    ReferenceSet {
        label: label.into(),
        points,
    }
}

fn check_inputs(reference: &[(f64, f64)], front: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if reference.is_empty() {
        return Err(DseError::Metric("reference set is empty".into()));
    }
    if front.is_empty() {
        return Err(DseError::Metric("front is empty".into()));
    }
    if let Some(p) = reference.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(DseError::Metric(format!(
            "reference point ({}, {}) has a non-positive coordinate",
            p.0, p.1
        )));
    }
    let mut omega: Vec<(f64, f64)> = Vec::with_capacity(front.len());
    for &p in front {
        if !omega.contains(&p) {
            omega.push(p);
        }
    }
    Ok(omega)
}

fn average_min(
    reference: &[(f64, f64)],
    front: &[(f64, f64)],
    dist: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    let omega = check_inputs(reference, front)?;
    let total: f64 = omega
        .iter()
        .map(|w| {
            reference
                .iter()
                .map(|phi| dist((w.0 - phi.0) / phi.0, (w.1 - phi.1) / phi.1))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / omega.len() as f64)
}

/// Mean over the deduplicated front of the smallest relative Euclidean
/// distance to a reference point, each coordinate relative to the reference.
pub fn aedrs(reference: &[(f64, f64)], front: &[(f64, f64)]) -> Result<f64> {
    average_min(reference, front, f64::hypot)
}

/// Like [`aedrs`] with the larger absolute relative difference in place of
/// the Euclidean combination.
pub fn adrs(reference: &[(f64, f64)], front: &[(f64, f64)]) -> Result<f64> {
    average_min(reference, front, |de, da| de.abs().max(da.abs()))
}
