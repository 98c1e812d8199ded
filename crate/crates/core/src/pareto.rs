//! Two-objective (energy, area) dominance helpers. Both objectives are minimized.

use std::cmp::Ordering;

/// Strict Pareto dominance: no worse in both objectives and better in one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// Indices of the non-dominated points, ascending. Points with identical
/// objectives do not dominate each other, so all copies survive.
pub fn non_dominated(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| lex(points[i], points[j]).then(i.cmp(&j)));

    let mut keep = Vec::new();
    // Minimum area over all points lexicographically before the current group.
    let mut best_area = f64::INFINITY;
    let mut g = 0;
    while g < order.len() {
        let head = points[order[g]];
        let mut end = g;
        while end < order.len() && points[order[end]] == head {
            end += 1;
        }
        if head.1 < best_area {
            keep.extend_from_slice(&order[g..end]);
        }
        best_area = best_area.min(head.1);
        g = end;
    }
    keep.sort_unstable();
    keep
}

/// Like [`non_dominated`] but keeps only the first index of each distinct
/// objective pair.
pub fn non_dominated_unique(points: &[(f64, f64)]) -> Vec<usize> {
    let mut seen: Vec<(f64, f64)> = Vec::new();
    let mut out = Vec::new();
    for i in non_dominated(points) {
        if !seen.contains(&points[i]) {
            seen.push(points[i]);
            out.push(i);
        }
    }
    out
}

pub fn is_antichain(points: &[(f64, f64)]) -> bool {
    points
        .iter()
        .enumerate()
        .all(|(i, &p)| points.iter().enumerate().all(|(j, &q)| i == j || !dominates(q, p)))
}

fn lex(a: (f64, f64), b: (f64, f64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
}
