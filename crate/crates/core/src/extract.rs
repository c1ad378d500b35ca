// SPDX-License-Identifier: Apache-2.0

//! State-register identification and FSM candidate extraction.
//!
//! Registers are grouped by a deterministic two-stage procedure: strongly
//! connected components of the register feedback graph seed the groups, then
//! groups are merged agglomeratively while their mean pairwise support
//! similarity (Jaccard index of transitive fan-in sources) stays at or above
//! a threshold.

use std::collections::HashMap;

use thiserror::Error;

use crate::graph::{strongly_connected, Csr};
use crate::netlist::{Driver, GateKind, NetId, Netlist};

pub const DEFAULT_THETA: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractError {
    #[error("flip-flop group is empty")]
    EmptyGroup,
    #[error("flip-flop index {0} out of range")]
    BadIndex(usize),
    #[error("flip-flop {0} listed twice in group")]
    Duplicate(usize),
    #[error("net {0:?} is not a flip-flop output")]
    NotAFlipFlop(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegisterEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
    /// `a`'s output is in `b`'s support.
    pub a_feeds_b: bool,
    pub b_feeds_a: bool,
}

impl RegisterEdge {
    pub fn feedback(&self) -> bool {
        self.a_feeds_b || self.b_feeds_a
    }
}

#[derive(Debug, Clone)]
pub struct RegisterDependencyGraph {
    /// Per flip-flop, the sorted source nets feeding its data and enable.
    pub supports: Vec<Vec<NetId>>,
    /// Flip-flops whose own output is in their support.
    pub self_feedback: Vec<bool>,
    /// Pairs (`a < b`) with non-zero weight or a feedback relation.
    pub edges: Vec<RegisterEdge>,
    weights: Vec<f64>,
    feeds: Vec<bool>,
}

impl RegisterDependencyGraph {
    pub fn node_count(&self) -> usize {
        self.supports.len()
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.weights[a * self.node_count() + b]
    }

    /// `a`'s output is in `b`'s support.
    pub fn feeds(&self, a: usize, b: usize) -> bool {
        self.feeds[a * self.node_count() + b]
    }

    pub fn edge(&self, a: usize, b: usize) -> Option<&RegisterEdge> {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.edges.iter().find(|e| e.a == a && e.b == b)
    }
}

fn jaccard(x: &[NetId], y: &[NetId]) -> f64 {
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = x.len() + y.len() - common;
    if union == 0 {
        0.0
    } else {
        common as f64 / union as f64
    }
}

fn ff_roots(netlist: &Netlist, ff: usize) -> Vec<NetId> {
    let f = &netlist.flip_flops()[ff];
    let mut roots = vec![f.data];
    roots.extend(f.enable);
    roots
}

pub fn build_register_graph(netlist: &Netlist) -> RegisterDependencyGraph {
    let ffs = netlist.flip_flops();
    let n = ffs.len();
    let supports: Vec<Vec<NetId>> = (0..n)
        .map(|i| netlist.support_of(&ff_roots(netlist, i)))
        .collect();
    let mut feeds = vec![false; n * n];
    for (b, support) in supports.iter().enumerate() {
        for &net in support {
            if let Some(a) = netlist.flip_flop_of(net) {
                feeds[a * n + b] = true;
            }
        }
    }
    let mut weights = vec![0.0; n * n];
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let w = jaccard(&supports[a], &supports[b]);
            weights[a * n + b] = w;
            weights[b * n + a] = w;
            let (ab, ba) = (feeds[a * n + b], feeds[b * n + a]);
            if w > 0.0 || ab || ba {
                edges.push(RegisterEdge {
                    a,
                    b,
                    weight: w,
                    a_feeds_b: ab,
                    b_feeds_a: ba,
                });
            }
        }
    }
    let self_feedback = (0..n).map(|i| feeds[i * n + i]).collect();
    RegisterDependencyGraph {
        supports,
        self_feedback,
        edges,
        weights,
        feeds,
    }
}

/// Partitions all flip-flops into groups. Groups are returned sorted by
/// their lowest member; members are ascending.
pub fn cluster_registers(graph: &RegisterDependencyGraph, theta: f64) -> Vec<Vec<usize>> {
    let n = graph.node_count();
    let csr = Csr::from_edges(
        n,
        (0..n).flat_map(|a| {
            (0..n)
                .filter(move |&b| graph.feeds(a, b))
                .map(move |b| (a as u32, b as u32))
        }),
    );
    let (comp, count) = strongly_connected(&csr);
    let mut seeds: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (ff, &c) in comp.iter().enumerate() {
        seeds[c as usize].push(ff);
    }
    let (mut mergeable, mut fixed): (Vec<Vec<usize>>, Vec<Vec<usize>>) = seeds
        .into_iter()
        .partition(|g| g.len() > 1 || graph.self_feedback[g[0]]);
    mergeable.sort_by_key(|g| g[0]);

    let mean = |x: &[usize], y: &[usize]| -> f64 {
        let total: f64 = x
            .iter()
            .flat_map(|&a| y.iter().map(move |&b| graph.weight(a, b)))
            .sum();
        total / (x.len() * y.len()) as f64
    };

    loop {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for i in 0..mergeable.len() {
            for j in i + 1..mergeable.len() {
                let w = mean(&mergeable[i], &mergeable[j]);
                if w < theta {
                    continue;
                }
                let key = (mergeable[i][0], mergeable[j][0]);
                let better = match &best {
                    None => true,
                    Some((bw, bkey, _, _)) => w > *bw || (w == *bw && key < *bkey),
                };
                if better {
                    best = Some((w, key, i, j));
                }
            }
        }
        let Some((_, _, i, j)) = best else { break };
        let absorbed = mergeable.remove(j);
        mergeable[i].extend(absorbed);
        mergeable[i].sort_unstable();
        mergeable.sort_by_key(|g| g[0]);
    }

    fixed.append(&mut mergeable);
    fixed.sort_by_key(|g| g[0]);
    fixed
}

/// Whether a group has any internal feedback (an FSM rather than a pipeline
/// register or input latch).
pub fn group_has_feedback(graph: &RegisterDependencyGraph, group: &[usize]) -> bool {
    group
        .iter()
        .any(|&a| group.iter().any(|&b| graph.feeds(a, b)))
}

/// Clusters that contain feedback, in clustering order.
pub fn candidate_groups(graph: &RegisterDependencyGraph, theta: f64) -> Vec<Vec<usize>> {
    cluster_registers(graph, theta)
        .into_iter()
        .filter(|g| group_has_feedback(graph, g))
        .collect()
}

#[derive(Debug, Clone)]
struct ConeGate {
    kind: GateKind,
    inputs: Vec<u32>,
    out: u32,
}

/// A combinational subnetlist compiled to slot form. Slots `0..sources.len()`
/// hold the source values; gate outputs follow.
#[derive(Debug, Clone)]
pub struct Cone {
    sources: Vec<NetId>,
    gates: Vec<ConeGate>,
    gate_ids: Vec<usize>,
    slots: usize,
    net_slot: HashMap<NetId, u32>,
}

impl Cone {
    fn compile(netlist: &Netlist, sources: &[NetId], roots: &[NetId]) -> Cone {
        let mut net_slot: HashMap<NetId, u32> = HashMap::new();
        for (i, &s) in sources.iter().enumerate() {
            net_slot.insert(s, i as u32);
        }
        let gate_ids = netlist.fanin_gates(roots);
        let mut gates = Vec::with_capacity(gate_ids.len());
        let mut slots = sources.len() as u32;
        for &g in &gate_ids {
            let gate = &netlist.gates()[g];
            let inputs = gate
                .inputs
                .iter()
                .map(|n| *net_slot.get(n).expect("cone source missing for gate input"))
                .collect();
            net_slot.insert(gate.output, slots);
            gates.push(ConeGate {
                kind: gate.kind,
                inputs,
                out: slots,
            });
            slots += 1;
        }
        Cone {
            sources: sources.to_vec(),
            gates,
            gate_ids,
            slots: slots as usize,
            net_slot,
        }
    }

    pub fn sources(&self) -> &[NetId] {
        &self.sources
    }

    /// Netlist gate indices in evaluation order.
    pub fn gate_ids(&self) -> &[usize] {
        &self.gate_ids
    }

    pub fn slot(&self, net: NetId) -> Option<u32> {
        self.net_slot.get(&net).copied()
    }

    /// Evaluates all slots for 64 lanes.
    pub fn eval(&self, source_words: &[u64]) -> Vec<u64> {
        let mut values = vec![0u64; self.slots];
        values[..self.sources.len()].copy_from_slice(source_words);
        for g in &self.gates {
            values[g.out as usize] = g
                .kind
                .eval_words(g.inputs.iter().map(|&s| values[s as usize]));
        }
        values
    }
}

/// Where a group-dependent signal leaves the group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputSink {
    Primary {
        net: NetId,
        name: String,
    },
    /// Data (and enable) of a flip-flop outside the group.
    Register {
        ff: usize,
        name: String,
        data: NetId,
        enable: Option<NetId>,
    },
}

impl OutputSink {
    pub fn name(&self) -> &str {
        match self {
            OutputSink::Primary { name, .. } | OutputSink::Register { name, .. } => name,
        }
    }
}

/// Value observed at an output sink for one `(state, input)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SinkValue {
    Bit(bool),
    /// Enable register sink whose enable is low: the register keeps its value.
    Held,
}

#[derive(Debug, Clone)]
pub struct FsmCandidate {
    pub state_ffs: Vec<usize>,
    pub state_nets: Vec<NetId>,
    pub state_names: Vec<String>,
    /// Sources outside the group feeding the next-state cone: primary inputs
    /// in declaration order, then foreign flip-flop outputs in flip-flop order.
    pub control_inputs: Vec<NetId>,
    pub control_names: Vec<String>,
    /// Extra sources read only by the output cone.
    pub output_only_inputs: Vec<NetId>,
    pub output_sinks: Vec<OutputSink>,
    /// Power-up value of the group, bit `k` = `state_ffs[k]`.
    pub init_state: u64,
    next_cone: Cone,
    next_roots: Vec<(u32, Option<u32>)>,
    output_cone: Cone,
    sink_slots: Vec<(u32, Option<u32>)>,
}

fn order_sources(netlist: &Netlist, nets: impl IntoIterator<Item = NetId>) -> Vec<NetId> {
    let mut nets: Vec<NetId> = nets.into_iter().collect();
    nets.sort_by_key(|&n| match netlist.driver(n) {
        Some(Driver::Input(i)) => (0, i),
        Some(Driver::FlipFlop(i)) => (1, i),
        _ => (2, n),
    });
    nets.dedup();
    nets
}

fn lane(bit: bool) -> u64 {
    if bit {
        !0
    } else {
        0
    }
}

pub fn extract_candidate(netlist: &Netlist, group: &[usize]) -> Result<FsmCandidate, ExtractError> {
    if group.is_empty() {
        return Err(ExtractError::EmptyGroup);
    }
    let ffs = netlist.flip_flops();
    let mut in_group = vec![false; ffs.len()];
    for &g in group {
        if g >= ffs.len() {
            return Err(ExtractError::BadIndex(g));
        }
        if in_group[g] {
            return Err(ExtractError::Duplicate(g));
        }
        in_group[g] = true;
    }
    let state_ffs = group.to_vec();
    let state_nets: Vec<NetId> = state_ffs.iter().map(|&i| ffs[i].output).collect();
    let is_state = |net: NetId| matches!(netlist.flip_flop_of(net), Some(i) if in_group[i]);

    let next_root_nets: Vec<NetId> = state_ffs
        .iter()
        .flat_map(|&i| ff_roots(netlist, i))
        .collect();
    let control_inputs = order_sources(
        netlist,
        netlist
            .support_of(&next_root_nets)
            .into_iter()
            .filter(|&n| !is_state(n)),
    );

    let mut next_sources = state_nets.clone();
    next_sources.extend(&control_inputs);
    let next_cone = Cone::compile(netlist, &next_sources, &next_root_nets);
    let next_roots = state_ffs
        .iter()
        .map(|&i| {
            let ff = &ffs[i];
            let data = next_cone.slot(ff.data).expect("data root compiled");
            let en = ff
                .enable
                .map(|e| next_cone.slot(e).expect("enable root compiled"));
            (data, en)
        })
        .collect();

    // Sinks: primary outputs and foreign registers whose support touches the group.
    let touches_group = |roots: &[NetId]| netlist.support_of(roots).into_iter().any(is_state);
    let mut output_sinks = Vec::new();
    for &po in netlist.primary_outputs() {
        if touches_group(&[po]) {
            output_sinks.push(OutputSink::Primary {
                net: po,
                name: netlist.net_name(po).to_string(),
            });
        }
    }
    for (i, ff) in ffs.iter().enumerate() {
        if in_group[i] {
            continue;
        }
        let roots = ff_roots(netlist, i);
        if touches_group(&roots) {
            output_sinks.push(OutputSink::Register {
                ff: i,
                name: netlist.net_name(ff.output).to_string(),
                data: ff.data,
                enable: ff.enable,
            });
        }
    }
    let sink_root_nets: Vec<NetId> = output_sinks
        .iter()
        .flat_map(|s| match s {
            OutputSink::Primary { net, .. } => vec![*net],
            OutputSink::Register { data, enable, .. } => {
                let mut v = vec![*data];
                v.extend(*enable);
                v
            }
        })
        .collect();
    let output_only_inputs = order_sources(
        netlist,
        netlist
            .support_of(&sink_root_nets)
            .into_iter()
            .filter(|&n| !is_state(n) && !control_inputs.contains(&n)),
    );
    let mut out_sources = next_sources.clone();
    out_sources.extend(&output_only_inputs);
    let output_cone = Cone::compile(netlist, &out_sources, &sink_root_nets);
    let sink_slots = output_sinks
        .iter()
        .map(|s| match s {
            OutputSink::Primary { net, .. } => (output_cone.slot(*net).unwrap(), None),
            OutputSink::Register { data, enable, .. } => (
                output_cone.slot(*data).unwrap(),
                enable.map(|e| output_cone.slot(e).unwrap()),
            ),
        })
        .collect();

    let init_state = state_ffs.iter().enumerate().fold(0u64, |acc, (k, &i)| {
        acc | ((ffs[i].init as u64) << k.min(63))
    });

    Ok(FsmCandidate {
        state_names: state_nets
            .iter()
            .map(|&n| netlist.net_name(n).to_string())
            .collect(),
        control_names: control_inputs
            .iter()
            .map(|&n| netlist.net_name(n).to_string())
            .collect(),
        state_ffs,
        state_nets,
        control_inputs,
        output_only_inputs,
        output_sinks,
        init_state,
        next_cone,
        next_roots,
        output_cone,
        sink_slots,
    })
}

/// Resolves flip-flop output net names (as in a `--group-file`) to indices.
pub fn group_from_names(netlist: &Netlist, names: &[&str]) -> Result<Vec<usize>, ExtractError> {
    names
        .iter()
        .map(|name| {
            netlist
                .net_id(name)
                .and_then(|n| netlist.flip_flop_of(n))
                .ok_or_else(|| ExtractError::NotAFlipFlop(name.to_string()))
        })
        .collect()
}

impl FsmCandidate {
    /// State width.
    pub fn n(&self) -> usize {
        self.state_ffs.len()
    }

    /// Control width.
    pub fn m(&self) -> usize {
        self.control_inputs.len()
    }

    pub fn next_state_gates(&self) -> &[usize] {
        self.next_cone.gate_ids()
    }

    pub fn output_gates(&self) -> &[usize] {
        self.output_cone.gate_ids()
    }

    /// Lane-parallel next state. `state_words[k]` and `control_words[j]`
    /// hold bit `k` of the state and bit `j` of the control vector per lane.
    pub fn step_words(&self, state_words: &[u64], control_words: &[u64]) -> Vec<u64> {
        let mut sources = Vec::with_capacity(state_words.len() + control_words.len());
        sources.extend_from_slice(state_words);
        sources.extend_from_slice(control_words);
        let values = self.next_cone.eval(&sources);
        self.next_roots
            .iter()
            .zip(state_words)
            .map(|(&(data, en), &cur)| match en {
                Some(en) => {
                    let e = values[en as usize];
                    (values[data as usize] & e) | (cur & !e)
                }
                None => values[data as usize],
            })
            .collect()
    }

    /// Next state for a single `(state, control)` pair; requires `n, m <= 64`.
    pub fn step(&self, state: u64, control: u64) -> u64 {
        let sw: Vec<u64> = (0..self.n()).map(|k| lane((state >> k) & 1 == 1)).collect();
        let cw: Vec<u64> = (0..self.m())
            .map(|k| lane((control >> k) & 1 == 1))
            .collect();
        self.step_words(&sw, &cw)
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &w)| acc | ((w & 1) << k))
    }

    /// Values at every output sink. `extra` assigns the output-only inputs
    /// (bit `j` = `output_only_inputs[j]`).
    pub fn outputs(&self, state: u64, control: u64, extra: u64) -> Vec<SinkValue> {
        let mut sources: Vec<u64> = (0..self.n()).map(|k| lane((state >> k) & 1 == 1)).collect();
        sources.extend((0..self.m()).map(|k| lane((control >> k) & 1 == 1)));
        sources.extend((0..self.output_only_inputs.len()).map(|k| lane((extra >> k) & 1 == 1)));
        let values = self.output_cone.eval(&sources);
        self.sink_slots
            .iter()
            .map(|&(data, en)| match en {
                Some(en) if values[en as usize] & 1 == 0 => SinkValue::Held,
                _ => SinkValue::Bit(values[data as usize] & 1 == 1),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::parse_bench;

    const TOGGLES: &str =
        "OUTPUT(a)\nOUTPUT(b)\na = DFF(na)\nna = NOT(a)\nb = DFF(nb)\nnb = NOT(b)\n";

    const COUNTER2: &str = "\
OUTPUT(q0)
OUTPUT(q1)
q0 = DFF(n0)
q1 = DFF(n1)
n0 = NOT(q0)
n1 = XOR(q1, q0)
";

    #[test]
    fn independent_toggles() {
        let n = parse_bench(TOGGLES).unwrap();
        let g = build_register_graph(&n);
        assert_eq!(g.node_count(), 2);
        assert!(g.self_feedback.iter().all(|&f| f));
        assert_eq!(g.weight(0, 1), 0.0);
        assert!(g.edge(0, 1).is_none());
        assert_eq!(cluster_registers(&g, 0.5), vec![vec![0], vec![1]]);
    }

    #[test]
    fn counter_bits_share_support() {
        let n = parse_bench(COUNTER2).unwrap();
        let g = build_register_graph(&n);
        let e = g.edge(0, 1).unwrap();
        assert!(e.weight > 0.0);
        assert!(e.a_feeds_b);
        assert!(!e.b_feeds_a);
        assert!(e.feedback());
    }

    #[test]
    fn one_hot_ring_is_one_group() {
        let text = "OUTPUT(a)\na = DFF(c)\nb = DFF(a)\nc = DFF(b)\n";
        let n = parse_bench(text).unwrap();
        let g = build_register_graph(&n);
        assert_eq!(cluster_registers(&g, 0.5), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn toggle_candidate() {
        let n = parse_bench("OUTPUT(q)\nq = DFF(nq)\nnq = NOT(q)").unwrap();
        let c = extract_candidate(&n, &[0]).unwrap();
        assert_eq!((c.n(), c.m()), (1, 0));
        assert_eq!(c.next_state_gates().len(), 1);
        assert_eq!(c.step(0, 0), 1);
        assert_eq!(c.step(1, 0), 0);
        assert_eq!(c.output_sinks.len(), 1);
    }

    #[test]
    fn empty_group_rejected() {
        let n = parse_bench(TOGGLES).unwrap();
        assert_eq!(
            extract_candidate(&n, &[]).unwrap_err(),
            ExtractError::EmptyGroup
        );
        assert_eq!(
            extract_candidate(&n, &[5]).unwrap_err(),
            ExtractError::BadIndex(5)
        );
    }

    #[test]
    fn foreign_register_becomes_control() {
        // b toggles on its own; a follows a XOR b
        let text = "OUTPUT(a)\na = DFF(x)\nx = XOR(a, b)\nb = DFF(nb)\nnb = NOT(b)\n";
        let n = parse_bench(text).unwrap();
        let c = extract_candidate(&n, &[0]).unwrap();
        assert_eq!(c.control_names, vec!["b".to_string()]);
        assert_eq!(c.step(0, 1), 1);
        assert_eq!(c.step(1, 1), 0);
        assert_eq!(c.step(1, 0), 1);
    }

    #[test]
    fn enable_sink_reports_hold() {
        let text = "INPUT(i)\nOUTPUT(o)\ns = DFF(ns)\nns = NOT(s)\no = DFFE(s, i)\n";
        let n = parse_bench(text).unwrap();
        let c = extract_candidate(&n, &[0]).unwrap();
        // the primary output reads the register, not the group
        assert_eq!(c.output_sinks.len(), 1);
        assert!(matches!(c.output_sinks[0], OutputSink::Register { .. }));
        assert_eq!(c.output_only_inputs.len(), 1);
        assert_eq!(c.outputs(1, 0, 0), vec![SinkValue::Held]);
        assert_eq!(c.outputs(1, 0, 1), vec![SinkValue::Bit(true)]);
    }
}
