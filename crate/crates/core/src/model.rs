//! System description: periodic state machines, their multi-cycle
//! computations and alternatives, handshake links and end-to-end latency
//! constraints.
//!
//! Units are fixed across the crate: periods and latencies in seconds,
//! frequencies in MHz, critical paths in ns, power in mW, area unitless.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{DseError, Result};

/// One synthesizable implementation of a multi-cycle computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MccAlternative {
    pub id: String,
    /// Execution cycles.
    pub exec_cycles: u64,
    /// Critical path in ns.
    pub critical_path: f64,
    /// Power in mW at `f_max`.
    pub power: f64,
    /// Maximum clock frequency in MHz.
    pub f_max: f64,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mcc {
    pub id: String,
    pub attached_state: String,
    pub alternatives: Vec<MccAlternative>,
}

/// A handshake port attached to a state of its owning PSM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub id: String,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psm {
    pub id: String,
    /// Period in seconds.
    pub period: f64,
    pub states: Vec<String>,
    pub transitions: Vec<(String, String)>,
    #[serde(default)]
    pub mccs: Vec<Mcc>,
    #[serde(default)]
    pub handshake_in_ports: Vec<Port>,
    #[serde(default)]
    pub handshake_out_ports: Vec<Port>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PortRef {
    pub psm: String,
    pub port: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandshakeLink {
    pub id: String,
    pub sender: PortRef,
    pub receiver: PortRef,
}

/// A node of the system graph named by owning PSM and local id (state, MCC
/// or handshake port id).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeRef {
    pub psm: String,
    pub node: String,
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.psm, self.node)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyConstraint {
    pub id: String,
    pub start: NodeRef,
    pub end: NodeRef,
    /// Bound in seconds.
    pub bound: f64,
}

/// Candidate clock frequencies `f_lo, f_lo + step, ...` up to `f_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqGrid {
    pub f_lo: f64,
    pub f_hi: f64,
    pub step: f64,
}

impl FreqGrid {
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if !(self.step > 0.0) || !(self.f_hi >= self.f_lo) {
            return out;
        }
        let mut k = 0u32;
        loop {
            let f = self.f_lo + f64::from(k) * self.step;
            if f > self.f_hi + 1e-9 * self.step {
                break;
            }
            out.push(f);
            k += 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    pub psms: Vec<Psm>,
    #[serde(default)]
    pub links: Vec<HandshakeLink>,
    #[serde(default)]
    pub constraints: Vec<LatencyConstraint>,
    pub n_fpin: usize,
    pub freq_grid: FreqGrid,
}

/// Minimum clock frequency at which an alternative completes within a period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledFrequency {
    /// `exec_cycles / period` in MHz.
    pub mhz: f64,
    /// False when the result exceeds the alternative's `f_max`.
    pub feasible: bool,
}

/// `exec_cycles / period`, in MHz, flagged infeasible when above `f_max`.
pub fn scaled_min_frequency(alt: &MccAlternative, period: f64) -> Result<ScaledFrequency> {
    if !(period > 0.0) {
        return Err(DseError::Contract(format!(
            "period must be positive, got {period}"
        )));
    }
    let mhz = alt.exec_cycles as f64 / period / 1e6;
    Ok(ScaledFrequency {
        mhz,
        feasible: mhz <= alt.f_max,
    })
}

impl MccAlternative {
    /// Scaled minimum frequency in MHz under `period` (assumed positive).
    pub fn min_frequency(&self, period: f64) -> f64 {
        self.exec_cycles as f64 / period / 1e6
    }

    /// Energy slope: `power / (f_max * period)`.
    pub fn scaling_factor(&self, period: f64) -> f64 {
        self.power / (self.f_max * period)
    }

    /// True when `freq` keeps the alternative within its period and below `f_max`.
    pub fn accepts_frequency(&self, freq: f64, period: f64) -> bool {
        let f_s = self.min_frequency(period);
        freq >= f_s * (1.0 - 1e-12) && freq <= self.f_max * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ComponentKind {
    Fsm,
    Mcc,
    HandshakeOut,
    HandshakeIn,
}

/// A frequency-bearing component: every FSM, every MCC and both endpoints
/// of every handshake link.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub kind: ComponentKind,
    /// Owning PSM index.
    pub psm: usize,
    /// Global MCC index for `Mcc`, link index for handshake endpoints, PSM index for `Fsm`.
    pub index: usize,
    pub name: String,
}

/// Fixed ordering of frequency-bearing components: per PSM its FSM then its
/// MCCs, followed by (out, in) for each link.
#[derive(Debug, Clone)]
pub struct ComponentTable {
    pub components: Vec<Component>,
    /// `(psm index, mcc index within psm)` for each global MCC index.
    pub mcc_refs: Vec<(usize, usize)>,
    fsm: Vec<usize>,
    mcc: Vec<usize>,
    hs_out: Vec<usize>,
    hs_in: Vec<usize>,
}

impl ComponentTable {
    pub fn new(model: &SystemModel) -> Self {
        let mut components = Vec::new();
        let mut mcc_refs = Vec::new();
        let mut fsm = Vec::new();
        let mut mcc = Vec::new();
        for (p, psm) in model.psms.iter().enumerate() {
            fsm.push(components.len());
            components.push(Component {
                kind: ComponentKind::Fsm,
                psm: p,
                index: p,
                name: psm.id.clone(),
            });
            for (m, c) in psm.mccs.iter().enumerate() {
                mcc.push(components.len());
                components.push(Component {
                    kind: ComponentKind::Mcc,
                    psm: p,
                    index: mcc_refs.len(),
                    name: format!("{}/{}", psm.id, c.id),
                });
                mcc_refs.push((p, m));
            }
        }
        let psm_pos: HashMap<&str, usize> = model
            .psms
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.as_str(), i))
            .collect();
        let mut hs_out = Vec::new();
        let mut hs_in = Vec::new();
        for (l, link) in model.links.iter().enumerate() {
            let sp = psm_pos.get(link.sender.psm.as_str()).copied().unwrap_or(0);
            let rp = psm_pos.get(link.receiver.psm.as_str()).copied().unwrap_or(0);
            hs_out.push(components.len());
            components.push(Component {
                kind: ComponentKind::HandshakeOut,
                psm: sp,
                index: l,
                name: format!("{}/{}", link.sender.psm, link.sender.port),
            });
            hs_in.push(components.len());
            components.push(Component {
                kind: ComponentKind::HandshakeIn,
                psm: rp,
                index: l,
                name: format!("{}/{}", link.receiver.psm, link.receiver.port),
            });
        }
        ComponentTable {
            components,
            mcc_refs,
            fsm,
            mcc,
            hs_out,
            hs_in,
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn n_mccs(&self) -> usize {
        self.mcc_refs.len()
    }

    pub fn fsm(&self, psm: usize) -> usize {
        self.fsm[psm]
    }

    pub fn mcc(&self, global_mcc: usize) -> usize {
        self.mcc[global_mcc]
    }

    pub fn hs_out(&self, link: usize) -> usize {
        self.hs_out[link]
    }

    pub fn hs_in(&self, link: usize) -> usize {
        self.hs_in[link]
    }
}

impl SystemModel {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let model: SystemModel =
            serde_json::from_str(text).map_err(|e| DseError::Parse(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("system model serializes")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string() + "\n").map_err(|e| DseError::io(path, e))
    }

    pub fn psm_index(&self, id: &str) -> Option<usize> {
        self.psms.iter().position(|p| p.id == id)
    }

    /// Global MCC list in declaration order.
    pub fn mccs(&self) -> impl Iterator<Item = (&Psm, &Mcc)> {
        self.psms
            .iter()
            .flat_map(|p| p.mccs.iter().map(move |m| (p, m)))
    }

    pub fn n_mccs(&self) -> usize {
        self.psms.iter().map(|p| p.mccs.len()).sum()
    }

    pub fn n_alternatives(&self) -> usize {
        self.mccs().map(|(_, m)| m.alternatives.len()).sum()
    }

    /// Number of frequency-bearing components (FSMs, MCCs, handshake endpoints).
    pub fn n_components(&self) -> usize {
        self.psms.len() + self.n_mccs() + 2 * self.links.len()
    }

    pub fn grid(&self) -> Vec<f64> {
        self.freq_grid.values()
    }

    /// Checks every structural invariant; the error names the first violation.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(DseError::Validation(msg));
        if self.psms.is_empty() {
            return fail("model declares no PSMs".into());
        }
        if self.n_fpin < 1 {
            return fail("n_fpin must be at least 1".into());
        }
        let g = &self.freq_grid;
        if !(g.f_lo > 0.0) || !g.f_lo.is_finite() {
            return fail(format!("freq_grid.f_lo must be positive, got {}", g.f_lo));
        }
        if !(g.f_lo <= g.f_hi) || !g.f_hi.is_finite() {
            return fail(format!(
                "freq_grid requires f_lo <= f_hi, got {} and {}",
                g.f_lo, g.f_hi
            ));
        }
        if !(g.step > 0.0) || !g.step.is_finite() {
            return fail(format!("freq_grid.step must be positive, got {}", g.step));
        }

        let mut psm_ids = HashSet::new();
        for psm in &self.psms {
            if !psm_ids.insert(psm.id.as_str()) {
                return fail(format!("duplicate PSM id '{}'", psm.id));
            }
            validate_psm(psm)?;
        }

        let mut link_ids = HashSet::new();
        let mut used_ports: HashSet<(&str, &str, bool)> = HashSet::new();
        for link in &self.links {
            if !link_ids.insert(link.id.as_str()) {
                return fail(format!("duplicate link id '{}'", link.id));
            }
            for (end, is_out) in [(&link.sender, true), (&link.receiver, false)] {
                let Some(p) = self.psm_index(&end.psm) else {
                    return fail(format!(
                        "link '{}' references undeclared PSM '{}'",
                        link.id, end.psm
                    ));
                };
                let ports = if is_out {
                    &self.psms[p].handshake_out_ports
                } else {
                    &self.psms[p].handshake_in_ports
                };
                if !ports.iter().any(|pt| pt.id == end.port) {
                    return fail(format!(
                        "link '{}' references undeclared {} port '{}' of PSM '{}'",
                        link.id,
                        if is_out { "handshake-out" } else { "handshake-in" },
                        end.port,
                        end.psm
                    ));
                }
                if !used_ports.insert((end.psm.as_str(), end.port.as_str(), is_out)) {
                    return fail(format!(
                        "port '{}' of PSM '{}' belongs to more than one link",
                        end.port, end.psm
                    ));
                }
            }
        }

        let mut constraint_ids = HashSet::new();
        for c in &self.constraints {
            if !constraint_ids.insert(c.id.as_str()) {
                return fail(format!("duplicate constraint id '{}'", c.id));
            }
            if !(c.bound > 0.0) {
                return fail(format!(
                    "constraint '{}' bound must be positive, got {}",
                    c.id, c.bound
                ));
            }
            for end in [&c.start, &c.end] {
                if !self.resolves(end, &used_ports) {
                    return fail(format!(
                        "constraint '{}' endpoint '{}' is not a node of the system graph",
                        c.id, end
                    ));
                }
            }
        }
        Ok(())
    }

    fn resolves(&self, end: &NodeRef, linked: &HashSet<(&str, &str, bool)>) -> bool {
        let Some(p) = self.psm_index(&end.psm) else {
            return false;
        };
        let psm = &self.psms[p];
        psm.states.iter().any(|s| *s == end.node)
            || psm.mccs.iter().any(|m| m.id == end.node)
            || (psm.handshake_in_ports.iter().any(|pt| pt.id == end.node)
                && linked.contains(&(end.psm.as_str(), end.node.as_str(), false)))
            || (psm.handshake_out_ports.iter().any(|pt| pt.id == end.node)
                && linked.contains(&(end.psm.as_str(), end.node.as_str(), true)))
    }
}

fn validate_psm(psm: &Psm) -> Result<()> {
    let fail = |msg: String| Err(DseError::Validation(msg));
    if !(psm.period > 0.0) || !psm.period.is_finite() {
        return fail(format!(
            "PSM '{}' period must be positive, got {}",
            psm.id, psm.period
        ));
    }
    if psm.states.is_empty() {
        return fail(format!("PSM '{}' declares no states", psm.id));
    }
    // States, MCCs and ports share one local namespace per PSM.
    let mut local = HashSet::new();
    for s in &psm.states {
        if !local.insert(s.as_str()) {
            return fail(format!("PSM '{}' reuses local id '{}'", psm.id, s));
        }
    }
    let states: HashSet<&str> = psm.states.iter().map(String::as_str).collect();
    for (from, to) in &psm.transitions {
        for s in [from, to] {
            if !states.contains(s.as_str()) {
                return fail(format!(
                    "PSM '{}' transition {} -> {} references undeclared state '{}'",
                    psm.id, from, to, s
                ));
            }
        }
    }
    for mcc in &psm.mccs {
        if !local.insert(mcc.id.as_str()) {
            return fail(format!("PSM '{}' reuses local id '{}'", psm.id, mcc.id));
        }
        if !states.contains(mcc.attached_state.as_str()) {
            return fail(format!(
                "MCC '{}' of PSM '{}' attaches to undeclared state '{}'",
                mcc.id, psm.id, mcc.attached_state
            ));
        }
        if mcc.alternatives.is_empty() {
            return fail(format!(
                "MCC '{}' of PSM '{}' has no alternatives",
                mcc.id, psm.id
            ));
        }
        let mut alt_ids = HashSet::new();
        for alt in &mcc.alternatives {
            if !alt_ids.insert(alt.id.as_str()) {
                return fail(format!(
                    "MCC '{}' of PSM '{}' repeats alternative id '{}'",
                    mcc.id, psm.id, alt.id
                ));
            }
            validate_alternative(alt).map_err(|msg| {
                DseError::Validation(format!(
                    "alternative '{}' of MCC '{}' in PSM '{}': {}",
                    alt.id, mcc.id, psm.id, msg
                ))
            })?;
        }
    }
    for port in psm
        .handshake_in_ports
        .iter()
        .chain(psm.handshake_out_ports.iter())
    {
        if !local.insert(port.id.as_str()) {
            return fail(format!("PSM '{}' reuses local id '{}'", psm.id, port.id));
        }
        if !states.contains(port.state.as_str()) {
            return fail(format!(
                "port '{}' of PSM '{}' attaches to undeclared state '{}'",
                port.id, psm.id, port.state
            ));
        }
    }
    Ok(())
}

fn validate_alternative(alt: &MccAlternative) -> std::result::Result<(), String> {
    if alt.exec_cycles < 1 {
        return Err("exec_cycles must be at least 1".into());
    }
    if !(alt.critical_path > 0.0) || !alt.critical_path.is_finite() {
        return Err(format!(
            "critical_path must be positive, got {}",
            alt.critical_path
        ));
    }
    if !(alt.f_max > 0.0) || !alt.f_max.is_finite() {
        return Err(format!("f_max must be positive, got {}", alt.f_max));
    }
    let ceiling = 1000.0 / alt.critical_path;
    if alt.f_max > ceiling * (1.0 + 1e-9) {
        return Err(format!(
            "f_max {} MHz exceeds 1000/critical_path = {} MHz",
            alt.f_max, ceiling
        ));
    }
    if !(alt.power > 0.0) || !alt.power.is_finite() {
        return Err(format!("power must be positive, got {}", alt.power));
    }
    if !(alt.area > 0.0) || !alt.area.is_finite() {
        return Err(format!("area must be positive, got {}", alt.area));
    }
    Ok(())
}

/// Reads and validates a system description file.
pub fn load_system(path: impl AsRef<Path>) -> Result<SystemModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DseError::io(path, e))?;
    SystemModel::from_json_str(&text)
}

/// Human-readable statement of how [`design_space_size`] counts.
pub fn counting_rule(model: &SystemModel, n_freq_choices: u64) -> String {
    format!(
        "size = prod(alternatives per MCC over {} MCCs) x {}^{} \
         (each of {} FSMs, {} MCCs and {} handshake endpoints picks one of {} frequency choices)",
        model.n_mccs(),
        n_freq_choices,
        model.n_components(),
        model.psms.len(),
        model.n_mccs(),
        2 * model.links.len(),
        n_freq_choices
    )
}

/// Product of alternative counts times `n_freq_choices` raised to the number
/// of frequency-bearing components. The rule is logged at info level.
pub fn design_space_size(model: &SystemModel, n_freq_choices: u64) -> BigUint {
    log::info!("{}", counting_rule(model, n_freq_choices));
    alternative_product(model) * BigUint::from(n_freq_choices).pow(model.n_components() as u32)
}

pub fn alternative_product(model: &SystemModel) -> BigUint {
    model
        .mccs()
        .fold(BigUint::from(1u32), |acc, (_, m)| acc * m.alternatives.len())
}
