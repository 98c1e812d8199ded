//! System-level state graph and end-to-end path enumeration.
//!
//! The graph merges the FSM states of every PSM, one node per MCC and one node
//! per handshake endpoint. Paths are enumerated per latency constraint by
//! backtracking from the constraint start; a path stops the first time it
//! reaches the constraint end, and branches that revisit a node are cut.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{DseError, Result};
use crate::model::{LatencyConstraint, NodeRef, SystemModel};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NodeKind {
    FsmState,
    Mcc,
    HandshakeOut,
    HandshakeIn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphNode {
    pub kind: NodeKind,
    /// Owning PSM id.
    pub psm: String,
    /// State, MCC or port id inside the owning PSM.
    pub local: String,
    /// Owning PSM index.
    #[serde(skip)]
    pub psm_index: usize,
    /// State index for states, global MCC index for MCCs, link index for handshake nodes.
    #[serde(skip)]
    pub item: usize,
}

impl GraphNode {
    pub fn label(&self) -> String {
        format!("{}:{}", self.psm, self.local)
    }
}

#[derive(Debug, Clone)]
pub struct EtoEGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(NodeId, NodeId)>,
    succ: Vec<Vec<NodeId>>,
    lookup: HashMap<(String, String), NodeId>,
}

impl EtoEGraph {
    /// Assembles a graph from explicit nodes and edges. Duplicate edges are
    /// collapsed; successor lists are kept sorted.
    pub fn from_parts(nodes: Vec<GraphNode>, edges: Vec<(NodeId, NodeId)>) -> Result<Self> {
        let n = nodes.len();
        let mut succ = vec![Vec::new(); n];
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(DseError::Contract(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            succ[a].push(b);
        }
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        let edges = succ
            .iter()
            .enumerate()
            .flat_map(|(a, s)| s.iter().map(move |&b| (a, b)))
            .collect();
        let mut lookup = HashMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if lookup
                .insert((node.psm.clone(), node.local.clone()), i)
                .is_some()
            {
                return Err(DseError::Contract(format!(
                    "duplicate graph node {}",
                    node.label()
                )));
            }
        }
        Ok(EtoEGraph {
            nodes,
            edges,
            succ,
            lookup,
        })
    }

    pub fn successors(&self, node: NodeId) -> &[NodeId] {
        &self.succ[node]
    }

    pub fn resolve(&self, r: &NodeRef) -> Option<NodeId> {
        self.lookup.get(&(r.psm.clone(), r.node.clone())).copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Builds the system graph.
///
/// Every MCC attached to a state is interposed between the state and its
/// successors (`state -> mcc -> successor`); several MCCs on one state run
/// in declaration order. A handshake link leaves the sender port's state
/// after its MCCs and enters the receiver port's state:
/// `state -> handshake-out -> handshake-in -> state`.
pub fn build_graph(model: &SystemModel) -> EtoEGraph {
    let mut nodes = Vec::new();
    let mut state_node: Vec<HashMap<&str, NodeId>> = Vec::with_capacity(model.psms.len());
    let mut exit_node: Vec<HashMap<&str, NodeId>> = Vec::with_capacity(model.psms.len());
    let mut edges = Vec::new();
    let mut global_mcc = 0;

    for (p, psm) in model.psms.iter().enumerate() {
        let mut states = HashMap::new();
        for (s, id) in psm.states.iter().enumerate() {
            states.insert(id.as_str(), nodes.len());
            nodes.push(GraphNode {
                kind: NodeKind::FsmState,
                psm: psm.id.clone(),
                local: id.clone(),
                psm_index: p,
                item: s,
            });
        }
        let mut exits = states.clone();
        for mcc in &psm.mccs {
            let id = nodes.len();
            nodes.push(GraphNode {
                kind: NodeKind::Mcc,
                psm: psm.id.clone(),
                local: mcc.id.clone(),
                psm_index: p,
                item: global_mcc,
            });
            global_mcc += 1;
            let prev = exits[mcc.attached_state.as_str()];
            edges.push((prev, id));
            exits.insert(mcc.attached_state.as_str(), id);
        }
        for (from, to) in &psm.transitions {
            edges.push((exits[from.as_str()], states[to.as_str()]));
        }
        state_node.push(states);
        exit_node.push(exits);
    }

    for (l, link) in model.links.iter().enumerate() {
        let sp = model.psm_index(&link.sender.psm).expect("validated link");
        let rp = model.psm_index(&link.receiver.psm).expect("validated link");
        let out_state = model.psms[sp]
            .handshake_out_ports
            .iter()
            .find(|pt| pt.id == link.sender.port)
            .map(|pt| pt.state.as_str())
            .expect("validated port");
        let in_state = model.psms[rp]
            .handshake_in_ports
            .iter()
            .find(|pt| pt.id == link.receiver.port)
            .map(|pt| pt.state.as_str())
            .expect("validated port");
        let out = nodes.len();
        nodes.push(GraphNode {
            kind: NodeKind::HandshakeOut,
            psm: link.sender.psm.clone(),
            local: link.sender.port.clone(),
            psm_index: sp,
            item: l,
        });
        let inp = nodes.len();
        nodes.push(GraphNode {
            kind: NodeKind::HandshakeIn,
            psm: link.receiver.psm.clone(),
            local: link.receiver.port.clone(),
            psm_index: rp,
            item: l,
        });
        edges.push((exit_node[sp][out_state], out));
        edges.push((out, inp));
        edges.push((inp, state_node[rp][in_state]));
    }

    EtoEGraph::from_parts(nodes, edges).expect("model graph is well formed")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEntry {
    pub start: NodeId,
    pub end: NodeId,
    pub constraint: LatencyConstraint,
    pub paths: Vec<Vec<NodeId>>,
}

/// Constraint-relevant paths, one entry per latency constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtoEPathSet {
    pub entries: Vec<PathEntry>,
}

impl EtoEPathSet {
    /// Iterates `(entry index, path index, path)` over all entries.
    pub fn iter_paths(&self) -> impl Iterator<Item = (usize, usize, &[NodeId])> {
        self.entries.iter().enumerate().flat_map(|(e, entry)| {
            entry
                .paths
                .iter()
                .enumerate()
                .map(move |(i, p)| (e, i, p.as_slice()))
        })
    }

    /// Column labels `<constraint>#<path index>` in iteration order.
    pub fn path_labels(&self) -> Vec<String> {
        self.iter_paths()
            .map(|(e, i, _)| format!("{}#{}", self.entries[e].constraint.id, i))
            .collect()
    }

    /// One line per path, then a summary line.
    pub fn to_text(&self, graph: &EtoEGraph) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            for (i, path) in entry.paths.iter().enumerate() {
                let seq: Vec<String> = path.iter().map(|&n| graph.nodes[n].label()).collect();
                let _ = writeln!(out, "{}\t{}\t{}", entry.constraint.id, i, seq.join(" -> "));
            }
        }
        let per: Vec<String> = self
            .entries
            .iter()
            .map(|e| format!("{}={}", e.constraint.id, e.paths.len()))
            .collect();
        let _ = writeln!(out, "# total paths: {} ({})", count_paths(self), per.join(", "));
        out
    }
}

pub fn count_paths(pathset: &EtoEPathSet) -> usize {
    pathset.entries.iter().map(|e| e.paths.len()).sum()
}

/// Enumerates every constraint's connecting paths.
///
/// A path is a walk `start, ..., end` whose nodes are pairwise distinct,
/// except that when `start == end` the terminal node closes the cycle back
/// to the start. Paths within an entry are sorted lexicographically by node id.
pub fn find_etoe_paths(
    graph: &EtoEGraph,
    constraints: &[LatencyConstraint],
) -> Result<EtoEPathSet> {
    let mut entries = Vec::with_capacity(constraints.len());
    for c in constraints {
        let start = graph.resolve(&c.start).ok_or_else(|| {
            DseError::Contract(format!("constraint '{}' start {} not in graph", c.id, c.start))
        })?;
        let end = graph.resolve(&c.end).ok_or_else(|| {
            DseError::Contract(format!("constraint '{}' end {} not in graph", c.id, c.end))
        })?;
        let mut paths = connecting_paths(graph, start, end);
        paths.sort();
        paths.dedup();
        if paths.is_empty() {
            log::warn!(
                "constraint '{}' ({} -> {}) has no connecting path",
                c.id,
                c.start,
                c.end
            );
        }
        entries.push(PathEntry {
            start,
            end,
            constraint: c.clone(),
            paths,
        });
    }
    Ok(EtoEPathSet { entries })
}

fn connecting_paths(graph: &EtoEGraph, start: NodeId, end: NodeId) -> Vec<Vec<NodeId>> {
    let mut out = Vec::new();
    let mut on_path = vec![false; graph.node_count()];
    let mut path = vec![start];
    // (node, index of the next successor to try)
    let mut stack = vec![(start, 0usize)];
    on_path[start] = true;

    while let Some(top) = stack.last_mut() {
        let (node, next) = *top;
        let succ = graph.successors(node);
        if next < succ.len() {
            top.1 += 1;
            let w = succ[next];
            if w == end {
                let mut p = path.clone();
                p.push(w);
                out.push(p);
            } else if !on_path[w] {
                on_path[w] = true;
                path.push(w);
                stack.push((w, 0));
            }
        } else {
            stack.pop();
            path.pop();
            on_path[node] = false;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(labels: &[&str], edges: &[(usize, usize)]) -> EtoEGraph {
        let nodes = labels
            .iter()
            .enumerate()
            .map(|(i, l)| GraphNode {
                kind: NodeKind::FsmState,
                psm: "g".into(),
                local: l.to_string(),
                psm_index: 0,
                item: i,
            })
            .collect();
        EtoEGraph::from_parts(nodes, edges.to_vec()).unwrap()
    }

    fn constraint(a: &str, b: &str) -> LatencyConstraint {
        LatencyConstraint {
            id: format!("{a}{b}"),
            start: NodeRef { psm: "g".into(), node: a.into() },
            end: NodeRef { psm: "g".into(), node: b.into() },
            bound: 1.0,
        }
    }

    #[test]
    fn chain_has_single_path() {
        let g = plain(&["A", "B", "C"], &[(0, 1), (1, 2)]);
        let ps = find_etoe_paths(&g, &[constraint("A", "C")]).unwrap();
        assert_eq!(ps.entries[0].paths, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn diamond_has_two_paths() {
        let g = plain(&["A", "B1", "B2", "C"], &[(0, 1), (0, 2), (1, 3), (2, 3)]);
        let ps = find_etoe_paths(&g, &[constraint("A", "C")]).unwrap();
        assert_eq!(ps.entries[0].paths, vec![vec![0, 1, 3], vec![0, 2, 3]]);
        assert_eq!(count_paths(&ps), 2);
    }

    #[test]
    fn empty_pathset_counts_zero() {
        assert_eq!(count_paths(&EtoEPathSet { entries: vec![] }), 0);
    }

    #[test]
    fn cycle_back_to_start_is_closed() {
        let g = plain(&["A", "B", "C"], &[(0, 1), (1, 2), (2, 0), (1, 0)]);
        let ps = find_etoe_paths(&g, &[constraint("A", "A")]).unwrap();
        assert_eq!(ps.entries[0].paths, vec![vec![0, 1, 0], vec![0, 1, 2, 0]]);
    }

    #[test]
    fn unreachable_constraint_yields_empty_entry() {
        let g = plain(&["A", "B"], &[(1, 0)]);
        let ps = find_etoe_paths(&g, &[constraint("A", "B")]).unwrap();
        assert!(ps.entries[0].paths.is_empty());
    }

    #[test]
    fn unknown_endpoint_is_contract_error() {
        let g = plain(&["A"], &[]);
        assert!(find_etoe_paths(&g, &[constraint("A", "Z")]).is_err());
    }
}
