//! Seeded synthetic system generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chromosome::{Chromosome, FrequencyAssignment};
use crate::error::{DseError, Result};
use crate::latency::Evaluator;
use crate::model::{
    design_space_size, FreqGrid, HandshakeLink, LatencyConstraint, Mcc, MccAlternative, NodeRef, Port, PortRef, Psm,
    SystemModel,
};
use crate::pathfind::{build_graph, find_etoe_paths};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// `p0 -> p1 -> ... -> p(n-1)`.
    Chain,
    /// Binary tree rooted at `p0`: `p(i)` receives from `p((i-1)/2)`.
    Branch,
    /// Explicit `(sender, receiver)` PSM index pairs.
    Custom(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundRule {
    /// `tightness * worst path latency of a mid-range configuration`;
    /// infinite tightness means unconstrained.
    Tightness(f64),
    /// Fixed bound in seconds.
    Absolute(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchParams {
    pub names: Vec<String>,
    pub mccs_per_psm: Vec<usize>,
    /// Alternatives per global MCC.
    pub alts_per_mcc: Vec<usize>,
    pub topology: Topology,
    /// `(source psm, sink psm)`: from the source's idle state to the sink's send state.
    pub constraints: Vec<(usize, usize)>,
    pub bound: BoundRule,
    pub n_fpin: usize,
    pub freq_grid: FreqGrid,
    /// PSM periods are drawn log-uniformly from this range (seconds).
    pub period_range: (f64, f64),
    /// Unscaled minimum MCC frequencies are drawn log-uniformly from this range (MHz).
    pub base_freq_range: (f64, f64),
    pub seed: u64,
}

/// Effective bound used for an unconstrained system.
pub const UNBOUNDED: f64 = 1e9;

impl BenchParams {
    /// Uniform shape: `psms` PSMs with `mccs` MCCs of `alts` alternatives each.
    pub fn uniform(psms: usize, mccs: usize, alts: usize, topology: Topology, tightness: f64, seed: u64) -> Self {
        let constraints = default_constraints(psms, &topology);
        BenchParams {
            names: (0..psms).map(|i| format!("p{i}")).collect(),
            mccs_per_psm: vec![mccs; psms],
            alts_per_mcc: vec![alts; psms * mccs],
            topology,
            constraints,
            bound: BoundRule::Tightness(tightness),
            n_fpin: 4,
            freq_grid: FreqGrid { f_lo: 2.0, f_hi: 108.0, step: 5.0 },
            period_range: (1e-3, 1e-2),
            base_freq_range: (5.0, 60.0),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.names.len();
        let bad = |m: String| Err(DseError::Validation(m));
        if n == 0 {
            return bad("a benchmark needs at least one PSM".into());
        }
        if self.mccs_per_psm.len() != n {
            return bad(format!("{} MCC counts for {n} PSMs", self.mccs_per_psm.len()));
        }
        let n_mcc: usize = self.mccs_per_psm.iter().sum();
        if self.alts_per_mcc.len() != n_mcc {
            return bad(format!("{} alternative counts for {n_mcc} MCCs", self.alts_per_mcc.len()));
        }
        if self.alts_per_mcc.iter().any(|&a| a == 0) {
            return bad("every MCC needs at least one alternative".into());
        }
        if let Topology::Custom(links) = &self.topology {
            if links.iter().any(|&(s, r)| s >= n || r >= n || s == r) {
                return bad("custom link refers to a missing PSM or loops on itself".into());
            }
        }
        if self.constraints.iter().any(|&(s, e)| s >= n || e >= n) {
            return bad("constraint refers to a missing PSM".into());
        }
        let (lo, hi) = self.period_range;
        if !(lo > 0.0 && lo <= hi) {
            return bad("period range must be positive and ordered".into());
        }
        let (lo, hi) = self.base_freq_range;
        if !(lo > 0.0 && lo <= hi) {
            return bad("base frequency range must be positive and ordered".into());
        }
        match self.bound {
            BoundRule::Tightness(t) if !(t > 0.0) => bad(format!("tightness must be positive, got {t}")),
            BoundRule::Absolute(b) if !(b >= 0.0) => bad(format!("bound must be non-negative, got {b}")),
            _ => Ok(()),
        }
    }

    fn links(&self) -> Vec<(usize, usize)> {
        let n = self.names.len();
        match &self.topology {
            Topology::Chain => (1..n).map(|i| (i - 1, i)).collect(),
            Topology::Branch => (1..n).map(|i| ((i - 1) / 2, i)).collect(),
            Topology::Custom(l) => l.clone(),
        }
    }
}

fn default_constraints(psms: usize, topology: &Topology) -> Vec<(usize, usize)> {
    match topology {
        Topology::Branch if psms >= 3 => vec![(0, psms - 1), (0, psms - 2)],
        _ => vec![(0, psms.saturating_sub(1))],
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn alternatives(rng: &mut ChaCha8Rng, count: usize, period: f64, base_mhz: f64, grid_hi: f64) -> Vec<MccAlternative> {
    let work = base_mhz * 1e6 * period;
    let base_area = log_uniform(rng, 500.0, 5000.0);
    let base_power = log_uniform(rng, 20.0, 200.0);
    let mut out: Vec<MccAlternative> = (0..count)
        .map(|i| {
            let unroll = log_uniform(rng, 0.5, 4.0);
            let critical_path = log_uniform(rng, 4.0, 12.0);
            MccAlternative {
                id: format!("a{i}"),
                exec_cycles: ((work / unroll).round() as u64).max(1),
                critical_path,
                power: base_power * unroll.powf(0.7) * log_uniform(rng, 0.8, 1.25),
                f_max: 1000.0 / critical_path,
                area: base_area * unroll.powf(0.9) * log_uniform(rng, 0.8, 1.25),
            }
        })
        .collect();
    let reachable = |a: &MccAlternative| {
        let f = a.min_frequency(period);
        f <= a.f_max && f <= grid_hi
    };
    if !out.iter().any(reachable) {
        // make the first alternative the widest so the MCC stays feasible
        let a = &mut out[0];
        a.exec_cycles = ((work / 4.0).round() as u64).max(1);
        let f = a.min_frequency(period).min(grid_hi).min(a.f_max);
        a.exec_cycles = ((f * 1e6 * period).floor() as u64).max(1);
    }
    out
}

/// Builds a system from `params`. The same parameters always give the same
/// system.
pub fn gen_bench(params: &BenchParams) -> Result<SystemModel> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let grid = params.freq_grid.values();
    let grid_hi = grid.last().copied().unwrap_or(params.freq_grid.f_hi);
    let links = params.links();

    let mut alt_counts = params.alts_per_mcc.iter();
    let mut psms = Vec::with_capacity(params.names.len());
    for (p, name) in params.names.iter().enumerate() {
        let period = log_uniform(&mut rng, params.period_range.0, params.period_range.1);
        let n_mcc = params.mccs_per_psm[p];
        let mut states = vec!["idle".to_string()];
        states.extend((0..n_mcc).map(|i| format!("c{i}")));
        states.push("send".into());
        let mut transitions: Vec<(String, String)> = states.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        transitions.push(("send".into(), "idle".into()));
        if n_mcc >= 2 {
            transitions.push(("idle".into(), "c1".into()));
        }
        let mccs = (0..n_mcc)
            .map(|i| {
                let base = log_uniform(&mut rng, params.base_freq_range.0, params.base_freq_range.1);
                let count = *alt_counts.next().expect("validated counts");
                Mcc {
                    id: format!("m{i}"),
                    attached_state: format!("c{i}"),
                    alternatives: alternatives(&mut rng, count, period, base, grid_hi),
                }
            })
            .collect();
        let handshake_in_ports = links
            .iter()
            .enumerate()
            .filter(|(_, &(_, r))| r == p)
            .map(|(l, _)| Port {
                id: format!("in{l}"),
                state: "idle".into(),
            })
            .collect();
        let handshake_out_ports = links
            .iter()
            .enumerate()
            .filter(|(_, &(s, _))| s == p)
            .map(|(l, _)| Port {
                id: format!("out{l}"),
                state: "send".into(),
            })
            .collect();
        psms.push(Psm {
            id: name.clone(),
            period,
            states,
            transitions,
            mccs,
            handshake_in_ports,
            handshake_out_ports,
        });
    }

    let links = links
        .iter()
        .enumerate()
        .map(|(l, &(s, r))| HandshakeLink {
            id: format!("l{l}"),
            sender: PortRef {
                psm: params.names[s].clone(),
                port: format!("out{l}"),
            },
            receiver: PortRef {
                psm: params.names[r].clone(),
                port: format!("in{l}"),
            },
        })
        .collect();
    let constraints = params
        .constraints
        .iter()
        .enumerate()
        .map(|(i, &(s, e))| LatencyConstraint {
            id: format!("lc{i}"),
            start: NodeRef {
                psm: params.names[s].clone(),
                node: "idle".into(),
            },
            end: NodeRef {
                psm: params.names[e].clone(),
                node: "send".into(),
            },
            bound: UNBOUNDED,
        })
        .collect();
    let mut model = SystemModel {
        psms,
        links,
        constraints,
        n_fpin: params.n_fpin,
        freq_grid: params.freq_grid,
    };
    model.validate()?;

    let bound = match params.bound {
        BoundRule::Absolute(b) => b,
        BoundRule::Tightness(t) if t.is_infinite() => UNBOUNDED,
        BoundRule::Tightness(t) => t * reference_latency(&model)?,
    };
    for c in &mut model.constraints {
        c.bound = bound;
    }
    Ok(model)
}

/// Worst constrained-path latency (seconds) of the mid-range configuration:
/// the middle alternative of every MCC at the lowest grid frequency not
/// below both its minimum and the grid median, other components at the
/// grid median.
pub fn reference_latency(model: &SystemModel) -> Result<f64> {
    let graph = build_graph(model);
    let paths = find_etoe_paths(&graph, &model.constraints)?;
    let eval = Evaluator::new(model, &graph, &paths);
    let grid = &eval.grid;
    let median = grid.len() / 2;
    let mut alternatives = Vec::new();
    let mut freqs = vec![median; eval.table.len()];
    for (j, &(p, m)) in eval.table.mcc_refs.iter().enumerate() {
        let psm = &model.psms[p];
        let alts = &psm.mccs[m].alternatives;
        let mut order: Vec<usize> = (0..alts.len()).collect();
        order.retain(|&i| grid.iter().any(|&f| alts[i].accepts_frequency(f, psm.period)));
        order.sort_by(|&a, &b| alts[a].exec_cycles.cmp(&alts[b].exec_cycles).then(a.cmp(&b)));
        let pick = *order
            .get(order.len() / 2)
            .ok_or_else(|| DseError::Infeasible(format!("MCC {}/{} cannot meet its period", psm.id, psm.mccs[m].id)))?;
        alternatives.push(pick);
        let alt = &alts[pick];
        let feasible: Vec<usize> = (0..grid.len()).filter(|&f| alt.accepts_frequency(grid[f], psm.period)).collect();
        freqs[eval.table.mcc(j)] = feasible.iter().copied().find(|&f| f >= median).unwrap_or(*feasible.last().expect("retained"));
    }
    let chrom = Chromosome {
        alternatives,
        frequencies: FrequencyAssignment(freqs),
    };
    Ok(eval.evaluate(&chrom).latencies.into_iter().fold(0.0, f64::max))
}

/// ADS-shaped preset: 10 PSMs, 18 MCCs, 490 alternatives, 4 clock pins,
/// a 2 to 108 MHz grid in 5 MHz steps and two sensor-to-actuator
/// constraints with the given bound in seconds.
pub fn ads_preset(bound: f64, seed: u64) -> BenchParams {
    let names = [
        "gps",
        "imu",
        "lidar",
        "camera",
        "radar",
        "localization",
        "perception",
        "fusion",
        "planning",
        "control",
    ];
    let mccs_per_psm = vec![1, 2, 2, 2, 2, 3, 2, 2, 1, 1];
    let mut alts_per_mcc = vec![28; 4];
    alts_per_mcc.extend(vec![27; 14]);
    BenchParams {
        names: names.iter().map(|s| s.to_string()).collect(),
        mccs_per_psm,
        alts_per_mcc,
        topology: Topology::Custom(vec![(0, 5), (1, 5), (2, 6), (3, 6), (4, 7), (5, 7), (6, 7), (7, 8), (8, 9)]),
        constraints: vec![(0, 9), (2, 7)],
        bound: BoundRule::Absolute(bound),
        n_fpin: 4,
        freq_grid: FreqGrid { f_lo: 2.0, f_hi: 108.0, step: 5.0 },
        period_range: (0.015, 0.035),
        base_freq_range: (5.0, 40.0),
        seed,
    }
}

/// Small random system whose full design space (every grid frequency on
/// every component) stays at or below `max_size` configurations.
pub fn tiny_params(seed: u64, max_size: u64) -> BenchParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7153_u64);
    loop {
        let psms = rng.gen_range(1..=2usize);
        let mccs_per_psm: Vec<usize> = (0..psms).map(|_| rng.gen_range(1..=2usize)).collect();
        let n_mcc: usize = mccs_per_psm.iter().sum();
        let alts_per_mcc: Vec<usize> = (0..n_mcc).map(|_| rng.gen_range(2..=3usize)).collect();
        let n_freq = rng.gen_range(3..=4usize);
        let f_lo = 10.0;
        let step = 20.0;
        let tightness = rng.gen_range(0.6..1.6);
        let p = BenchParams {
            names: (0..psms).map(|i| format!("p{i}")).collect(),
            mccs_per_psm,
            alts_per_mcc,
            topology: Topology::Chain,
            constraints: vec![(0, psms - 1)],
            bound: BoundRule::Tightness(tightness),
            n_fpin: rng.gen_range(2..=3usize),
            freq_grid: FreqGrid {
                f_lo,
                f_hi: f_lo + step * (n_freq - 1) as f64,
                step,
            },
            period_range: (1e-6, 4e-6),
            base_freq_range: (8.0, 40.0),
            seed,
        };
        let alts: u64 = p.alts_per_mcc.iter().map(|&a| a as u64).product();
        let components = (psms + n_mcc + 2 * (psms - 1)) as u32;
        if alts.saturating_mul((n_freq as u64).saturating_pow(components)) <= max_size {
            return p;
        }
    }
}

/// Design-space size of a generated system under its full grid.
pub fn full_space_size(model: &SystemModel) -> num_bigint::BigUint {
    design_space_size(model, model.grid().len() as u64)
}
