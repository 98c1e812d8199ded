//! Configuration encoding shared by the latency model, the searchers and the
//! exhaustive oracle.

use std::collections::HashSet;

use crate::error::{DseError, Result};
use crate::model::SystemModel;

/// Clock frequency per frequency-bearing component, stored as indices into
/// the model's frequency grid and ordered as in [`crate::model::ComponentTable`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrequencyAssignment(pub Vec<usize>);

impl FrequencyAssignment {
    pub fn distinct(&self) -> usize {
        self.0.iter().collect::<HashSet<_>>().len()
    }
}

/// One system configuration: the selected alternative of every MCC (global
/// MCC order) and a frequency for every component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chromosome {
    pub alternatives: Vec<usize>,
    pub frequencies: FrequencyAssignment,
}

impl Chromosome {
    /// Semicolon-joined genes: alternative indices, then frequencies in MHz.
    pub fn encode(&self, grid: &[f64]) -> String {
        let mut parts: Vec<String> = self.alternatives.iter().map(|a| a.to_string()).collect();
        parts.extend(self.frequencies.0.iter().map(|&f| format_mhz(grid[f])));
        parts.join(";")
    }

    pub fn decode(text: &str, model: &SystemModel) -> Result<Self> {
        let grid = model.grid();
        let n_mcc = model.n_mccs();
        let n_comp = model.n_components();
        let genes: Vec<&str> = text.trim().split(';').map(str::trim).collect();
        if genes.len() != n_mcc + n_comp {
            return Err(DseError::Parse(format!(
                "chromosome has {} genes, model needs {} alternatives + {} frequencies",
                genes.len(),
                n_mcc,
                n_comp
            )));
        }
        let mut alternatives = Vec::with_capacity(n_mcc);
        for g in &genes[..n_mcc] {
            alternatives.push(
                g.parse::<usize>()
                    .map_err(|e| DseError::Parse(format!("alternative gene '{g}': {e}")))?,
            );
        }
        let mut freqs = Vec::with_capacity(n_comp);
        for g in &genes[n_mcc..] {
            let f: f64 = g
                .parse()
                .map_err(|e| DseError::Parse(format!("frequency gene '{g}': {e}")))?;
            let idx = grid
                .iter()
                .position(|&v| (v - f).abs() <= 1e-6 * v.abs().max(1.0))
                .ok_or_else(|| DseError::Parse(format!("frequency {f} MHz is not on the grid")))?;
            freqs.push(idx);
        }
        Ok(Chromosome {
            alternatives,
            frequencies: FrequencyAssignment(freqs),
        })
    }
}

pub(crate) fn format_mhz(f: f64) -> String {
    format!("{f}")
}
