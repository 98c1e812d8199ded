//! Worst-case end-to-end latency of configured paths and constraint checks.
//!
//! A path's latency is the sum of FSM terms (states visited times the FSM
//! clock period), MCC terms (execution cycles over the MCC clock) and
//! handshake terms. Every handshake-in node on a path charges the
//! receiver-side worst case `L_r * P_r`; a path that ends on a handshake-out
//! node charges the sender-side worst case `L_s * P_s`.

use serde::Serialize;

use crate::chromosome::Chromosome;
use crate::error::{DseError, Result};
use crate::handshake::handshake_bounds;
use crate::model::{ComponentTable, SystemModel};
use crate::pathfind::{EtoEGraph, EtoEPathSet, NodeId, NodeKind};

pub use crate::chromosome::FrequencyAssignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HandshakeSide {
    Receiver,
    Sender,
}

/// Per-term latency contributions of one path, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathLatencyBreakdown {
    /// `(psm id, states visited, seconds)` in order of first visit.
    pub fsm: Vec<(String, u32, f64)>,
    /// `(psm/mcc id, seconds)` in path order.
    pub mcc: Vec<(String, f64)>,
    /// `(link id, side, seconds)` in path order.
    pub handshake: Vec<(String, HandshakeSide, f64)>,
    /// Left-to-right sum of fsm, then mcc, then handshake terms.
    pub total: f64,
}

impl PathLatencyBreakdown {
    pub fn fsm_sum(&self) -> f64 {
        self.fsm.iter().map(|t| t.2).sum()
    }

    pub fn mcc_sum(&self) -> f64 {
        self.mcc.iter().map(|t| t.1).sum()
    }

    pub fn handshake_sum(&self) -> f64 {
        self.handshake.iter().map(|t| t.2).sum()
    }
}

/// A path reduced to the terms that enter its latency.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CompiledPath {
    fsm: Vec<(usize, u32)>,
    mcc: Vec<usize>,
    handshake: Vec<(usize, HandshakeSide)>,
}

impl CompiledPath {
    pub(crate) fn compile(graph: &EtoEGraph, path: &[NodeId]) -> Self {
        let mut fsm: Vec<(usize, u32)> = Vec::new();
        let mut mcc = Vec::new();
        let mut handshake = Vec::new();
        for (pos, &n) in path.iter().enumerate() {
            let node = &graph.nodes[n];
            match node.kind {
                NodeKind::FsmState => match fsm.iter_mut().find(|(p, _)| *p == node.psm_index) {
                    Some(entry) => entry.1 += 1,
                    None => fsm.push((node.psm_index, 1)),
                },
                NodeKind::Mcc => mcc.push(node.item),
                NodeKind::HandshakeIn => handshake.push((node.item, HandshakeSide::Receiver)),
                NodeKind::HandshakeOut => {
                    if pos + 1 == path.len() {
                        handshake.push((node.item, HandshakeSide::Sender));
                    }
                }
            }
        }
        CompiledPath {
            fsm,
            mcc,
            handshake,
        }
    }
}

/// Why a configuration is invalid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    Malformed(String),
    FrequencyPins { distinct: usize, n_fpin: usize },
    Period {
        mcc: String,
        frequency: f64,
        min_frequency: f64,
        f_max: f64,
    },
    PathLatency {
        constraint: String,
        path: usize,
        latency: f64,
        bound: f64,
    },
}

/// Validity of one configuration; lists the first violation found.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub first_violation: Option<Violation>,
}

/// Objectives and path latencies of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub energy: f64,
    pub area: f64,
    /// Total latency per constrained path in path-set order. Empty when the
    /// configuration is malformed.
    pub latencies: Vec<f64>,
    pub violation: Option<Violation>,
}

impl Evaluation {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }
}

/// Precomputed evaluation context for one model and path set.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub model: &'a SystemModel,
    pub table: ComponentTable,
    pub grid: Vec<f64>,
    paths: Vec<(usize, usize, CompiledPath)>,
    bounds: Vec<f64>,
    constraint_ids: Vec<String>,
    /// `(sender psm, receiver psm)` per link.
    link_psms: Vec<(usize, usize)>,
    /// Static energy charged per FSM and handshake component.
    pub idle_energy: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(model: &'a SystemModel, graph: &EtoEGraph, pathset: &EtoEPathSet) -> Self {
        let paths = pathset
            .iter_paths()
            .map(|(e, i, p)| (e, i, CompiledPath::compile(graph, p)))
            .collect();
        let bounds = pathset.entries.iter().map(|e| e.constraint.bound).collect();
        let constraint_ids = pathset.entries.iter().map(|e| e.constraint.id.clone()).collect();
        let link_psms = model
            .links
            .iter()
            .map(|l| {
                (
                    model.psm_index(&l.sender.psm).expect("validated link"),
                    model.psm_index(&l.receiver.psm).expect("validated link"),
                )
            })
            .collect();
        Evaluator {
            model,
            link_psms,
            table: ComponentTable::new(model),
            grid: model.grid(),
            paths,
            bounds,
            constraint_ids,
            idle_energy: 0.0,
        }
    }

    pub fn with_idle_energy(mut self, idle_energy: f64) -> Self {
        self.idle_energy = idle_energy;
        self
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    fn freq(&self, chrom: &Chromosome, component: usize) -> f64 {
        self.grid[chrom.frequencies.0[component]]
    }

    fn check_shape(&self, chrom: &Chromosome) -> Option<String> {
        if chrom.alternatives.len() != self.table.n_mccs() {
            return Some(format!(
                "{} alternative genes for {} MCCs",
                chrom.alternatives.len(),
                self.table.n_mccs()
            ));
        }
        if chrom.frequencies.0.len() != self.table.len() {
            return Some(format!(
                "{} frequency genes for {} components",
                chrom.frequencies.0.len(),
                self.table.len()
            ));
        }
        for (j, &a) in chrom.alternatives.iter().enumerate() {
            let (p, m) = self.table.mcc_refs[j];
            if a >= self.model.psms[p].mccs[m].alternatives.len() {
                return Some(format!("alternative index {a} out of range for MCC {j}"));
            }
        }
        if let Some(&f) = chrom.frequencies.0.iter().find(|&&f| f >= self.grid.len()) {
            return Some(format!("frequency index {f} off the grid"));
        }
        None
    }

    /// Energy and area of a well-formed configuration.
    pub fn objectives(&self, chrom: &Chromosome) -> (f64, f64) {
        let mut energy = 0.0;
        let mut area = 0.0;
        for (j, &a) in chrom.alternatives.iter().enumerate() {
            let (p, m) = self.table.mcc_refs[j];
            let psm = &self.model.psms[p];
            let alt = &psm.mccs[m].alternatives[a];
            energy += self.freq(chrom, self.table.mcc(j)) * alt.scaling_factor(psm.period);
            area += alt.area;
        }
        let idle_components = self.model.psms.len() + 2 * self.model.links.len();
        energy += self.idle_energy * idle_components as f64;
        (energy, area)
    }

    fn handshake_term(&self, chrom: &Chromosome, link: usize, side: HandshakeSide) -> f64 {
        let (sp, rp) = self.link_psms[link];
        let period = |c: usize| 1.0 / (self.freq(chrom, c) * 1e6);
        let p_s = period(self.table.fsm(sp));
        let p_ho = period(self.table.hs_out(link));
        let p_hi = period(self.table.hs_in(link));
        let p_r = period(self.table.fsm(rp));
        let b = handshake_bounds(p_s, p_ho, p_hi, p_r);
        match side {
            HandshakeSide::Receiver => b.receiver as f64 * p_r,
            HandshakeSide::Sender => b.sender as f64 * p_s,
        }
    }

    fn path_total(&self, chrom: &Chromosome, path: &CompiledPath) -> f64 {
        let mut total = 0.0;
        for &(p, visits) in &path.fsm {
            total += f64::from(visits) / (self.freq(chrom, self.table.fsm(p)) * 1e6);
        }
        for &j in &path.mcc {
            total += self.mcc_term(chrom, j);
        }
        for &(link, side) in &path.handshake {
            total += self.handshake_term(chrom, link, side);
        }
        total
    }

    fn mcc_term(&self, chrom: &Chromosome, j: usize) -> f64 {
        let (p, m) = self.table.mcc_refs[j];
        let alt = &self.model.psms[p].mccs[m].alternatives[chrom.alternatives[j]];
        alt.exec_cycles as f64 / (self.freq(chrom, self.table.mcc(j)) * 1e6)
    }

    fn breakdown(&self, chrom: &Chromosome, path: &CompiledPath) -> PathLatencyBreakdown {
        let fsm: Vec<_> = path
            .fsm
            .iter()
            .map(|&(p, v)| {
                let f = self.freq(chrom, self.table.fsm(p));
                (self.model.psms[p].id.clone(), v, f64::from(v) / (f * 1e6))
            })
            .collect();
        let mcc: Vec<_> = path
            .mcc
            .iter()
            .map(|&j| {
                (
                    self.table.components[self.table.mcc(j)].name.clone(),
                    self.mcc_term(chrom, j),
                )
            })
            .collect();
        let handshake: Vec<_> = path
            .handshake
            .iter()
            .map(|&(l, side)| {
                (
                    self.model.links[l].id.clone(),
                    side,
                    self.handshake_term(chrom, l, side),
                )
            })
            .collect();
        let mut total = 0.0;
        for t in &fsm {
            total += t.2;
        }
        for t in &mcc {
            total += t.1;
        }
        for t in &handshake {
            total += t.2;
        }
        PathLatencyBreakdown {
            fsm,
            mcc,
            handshake,
            total,
        }
    }

    /// Latency breakdown of an arbitrary node sequence of `graph`.
    pub fn estimate_path(
        &self,
        graph: &EtoEGraph,
        path: &[NodeId],
        chrom: &Chromosome,
    ) -> Result<PathLatencyBreakdown> {
        if let Some(msg) = self.check_shape(chrom) {
            return Err(DseError::Contract(msg));
        }
        Ok(self.breakdown(chrom, &CompiledPath::compile(graph, path)))
    }

    /// Breakdowns of every constrained path in path-set order.
    pub fn breakdowns(&self, chrom: &Chromosome) -> Result<Vec<PathLatencyBreakdown>> {
        if let Some(msg) = self.check_shape(chrom) {
            return Err(DseError::Contract(msg));
        }
        Ok(self
            .paths
            .iter()
            .map(|(_, _, p)| self.breakdown(chrom, p))
            .collect())
    }

    /// Bound of the constraint owning each path, in path-set order.
    pub fn path_bounds(&self) -> Vec<f64> {
        self.paths.iter().map(|(e, _, _)| self.bounds[*e]).collect()
    }

    pub fn period_violation(&self, chrom: &Chromosome) -> Option<Violation> {
        for (j, &a) in chrom.alternatives.iter().enumerate() {
            let (p, m) = self.table.mcc_refs[j];
            let psm = &self.model.psms[p];
            let alt = &psm.mccs[m].alternatives[a];
            let f = self.freq(chrom, self.table.mcc(j));
            if !alt.accepts_frequency(f, psm.period) {
                return Some(Violation::Period {
                    mcc: self.table.components[self.table.mcc(j)].name.clone(),
                    frequency: f,
                    min_frequency: alt.min_frequency(psm.period),
                    f_max: alt.f_max,
                });
            }
        }
        None
    }

    /// Objectives, path latencies and the first violation, if any.
    pub fn evaluate(&self, chrom: &Chromosome) -> Evaluation {
        if let Some(msg) = self.check_shape(chrom) {
            return Evaluation {
                energy: f64::NAN,
                area: f64::NAN,
                latencies: Vec::new(),
                violation: Some(Violation::Malformed(msg)),
            };
        }
        let (energy, area) = self.objectives(chrom);
        let latencies: Vec<f64> = self
            .paths
            .iter()
            .map(|(_, _, p)| self.path_total(chrom, p))
            .collect();
        let distinct = chrom.frequencies.distinct();
        let violation = if distinct > self.model.n_fpin {
            Some(Violation::FrequencyPins {
                distinct,
                n_fpin: self.model.n_fpin,
            })
        } else if let Some(v) = self.period_violation(chrom) {
            Some(v)
        } else {
            self.paths
                .iter()
                .zip(&latencies)
                .find(|((e, _, _), &lat)| lat > self.bounds[*e])
                .map(|((e, i, _), &lat)| Violation::PathLatency {
                    constraint: self.constraint_ids[*e].clone(),
                    path: *i,
                    latency: lat,
                    bound: self.bounds[*e],
                })
        };
        Evaluation {
            energy,
            area,
            latencies,
            violation,
        }
    }

    pub fn check(&self, chrom: &Chromosome) -> ValidityReport {
        let violation = self.evaluate(chrom).violation;
        ValidityReport {
            valid: violation.is_none(),
            first_violation: violation,
        }
    }
}

/// Latency breakdown of `path` under `chrom`.
pub fn estimate_path_latency(
    graph: &EtoEGraph,
    path: &[NodeId],
    chrom: &Chromosome,
    model: &SystemModel,
) -> Result<PathLatencyBreakdown> {
    let empty = EtoEPathSet { entries: vec![] };
    Evaluator::new(model, graph, &empty).estimate_path(graph, path, chrom)
}

/// Checks frequency pins, MCC period feasibility and every constrained path.
pub fn check_constraints(
    chrom: &Chromosome,
    pathset: &EtoEPathSet,
    graph: &EtoEGraph,
    model: &SystemModel,
) -> ValidityReport {
    Evaluator::new(model, graph, pathset).check(chrom)
}
