// SPDX-License-Identifier: Apache-2.0

//! Gate-level netlist model: nets, gates, flip-flops, validation and
//! cycle-accurate evaluation.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::bits::BitVector;

pub type NetId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buff,
}

impl GateKind {
    pub fn from_name(name: &str) -> Option<Self> {
        let kind = match name.to_ascii_uppercase().as_str() {
            "AND" => GateKind::And,
            "NAND" => GateKind::Nand,
            "OR" => GateKind::Or,
            "NOR" => GateKind::Nor,
            "XOR" => GateKind::Xor,
            "XNOR" => GateKind::Xnor,
            "NOT" => GateKind::Not,
            "BUFF" | "BUF" => GateKind::Buff,
            _ => return None,
        };
        Some(kind)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buff => "BUFF",
        }
    }

    pub fn is_unary(self) -> bool {
        matches!(self, GateKind::Not | GateKind::Buff)
    }

    pub fn arity_ok(self, arity: usize) -> bool {
        if self.is_unary() {
            arity == 1
        } else {
            arity >= 2
        }
    }

    /// Evaluates the gate on 64 independent lanes at once.
    ///
    /// XOR folds left over its inputs; XNOR is the complement of that fold.
    #[inline]
    pub fn eval_words<I: IntoIterator<Item = u64>>(self, inputs: I) -> u64 {
        let mut it = inputs.into_iter();
        let first = it.next().unwrap_or(0);
        match self {
            GateKind::And => it.fold(first, |a, b| a & b),
            GateKind::Nand => !it.fold(first, |a, b| a & b),
            GateKind::Or => it.fold(first, |a, b| a | b),
            GateKind::Nor => !it.fold(first, |a, b| a | b),
            GateKind::Xor => it.fold(first, |a, b| a ^ b),
            GateKind::Xnor => !it.fold(first, |a, b| a ^ b),
            GateKind::Not => !first,
            GateKind::Buff => first,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<NetId>,
    pub output: NetId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipFlopKind {
    Dff,
    /// Enable flip-flop: loads `data` when `enable` is 1, holds otherwise.
    Dffe,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipFlop {
    pub kind: FlipFlopKind,
    pub data: NetId,
    pub enable: Option<NetId>,
    pub output: NetId,
    pub init: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Input(usize),
    Gate(usize),
    FlipFlop(usize),
}

/// A violated netlist invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    EmptyNetlist,
    DuplicateDriver {
        net: String,
    },
    DrivenPrimaryInput {
        net: String,
    },
    UndrivenNet {
        net: String,
    },
    ArityMismatch {
        net: String,
        kind: GateKind,
        arity: usize,
    },
    EnableMismatch {
        net: String,
    },
    CombinationalCycle {
        nets: Vec<String>,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::EmptyNetlist => write!(f, "netlist is empty"),
            Diagnostic::DuplicateDriver { net } => write!(f, "net {net} has more than one driver"),
            Diagnostic::DrivenPrimaryInput { net } => {
                write!(f, "primary input {net} is also driven by logic")
            }
            Diagnostic::UndrivenNet { net } => write!(f, "net {net} is used but never driven"),
            Diagnostic::ArityMismatch { net, kind, arity } => {
                write!(f, "{kind} gate driving {net} has {arity} inputs")
            }
            Diagnostic::EnableMismatch { net } => {
                write!(
                    f,
                    "flip-flop {net}: enable presence does not match its kind"
                )
            }
            Diagnostic::CombinationalCycle { nets } => {
                write!(f, "combinational cycle through {}", nets.join(" -> "))
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown gate kind {kind:?}")]
    UnknownGateKind { line: usize, kind: String },
    #[error("net {net} has more than one driver")]
    DuplicateDriver { net: String },
    #[error("net {net} is used but never driven")]
    UndrivenNet { net: String },
    #[error("combinational cycle through {}", nets.join(" -> "))]
    CombinationalCycle { nets: Vec<String> },
    #[error("invalid netlist: {0}")]
    Invalid(Diagnostic),
    #[error("{what}: expected width {expected}, got {actual}")]
    WidthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
}

impl From<Diagnostic> for NetlistError {
    fn from(d: Diagnostic) -> Self {
        match d {
            Diagnostic::DuplicateDriver { net } => NetlistError::DuplicateDriver { net },
            Diagnostic::UndrivenNet { net } => NetlistError::UndrivenNet { net },
            Diagnostic::CombinationalCycle { nets } => NetlistError::CombinationalCycle { nets },
            other => NetlistError::Invalid(other),
        }
    }
}

/// An immutable gate-level netlist.
///
/// Flip-flop state vectors follow flip-flop declaration order: bit 0 is the
/// first declared flip-flop.
#[derive(Debug, Clone)]
pub struct Netlist {
    name: String,
    net_names: Vec<String>,
    net_index: HashMap<String, NetId>,
    primary_inputs: Vec<NetId>,
    primary_outputs: Vec<NetId>,
    gates: Vec<Gate>,
    flip_flops: Vec<FlipFlop>,
    drivers: Vec<Option<Driver>>,
    topo: Vec<usize>,
}

impl Netlist {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn net_count(&self) -> usize {
        self.net_names.len()
    }

    pub fn net_name(&self, net: NetId) -> &str {
        &self.net_names[net]
    }

    pub fn net_id(&self, name: &str) -> Option<NetId> {
        self.net_index.get(name).copied()
    }

    pub fn primary_inputs(&self) -> &[NetId] {
        &self.primary_inputs
    }

    pub fn primary_outputs(&self) -> &[NetId] {
        &self.primary_outputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn flip_flops(&self) -> &[FlipFlop] {
        &self.flip_flops
    }

    pub fn driver(&self, net: NetId) -> Option<Driver> {
        self.drivers[net]
    }

    /// Gate indices in an order where every gate follows the drivers of its
    /// inputs.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Index of the flip-flop whose output is `net`.
    pub fn flip_flop_of(&self, net: NetId) -> Option<usize> {
        match self.drivers[net] {
            Some(Driver::FlipFlop(i)) => Some(i),
            _ => None,
        }
    }

    pub fn is_source(&self, net: NetId) -> bool {
        matches!(
            self.drivers[net],
            Some(Driver::Input(_)) | Some(Driver::FlipFlop(_)) | None
        )
    }

    /// Power-up register values.
    pub fn initial_state(&self) -> BitVector {
        BitVector::from_bits(self.flip_flops.iter().map(|ff| ff.init).collect())
    }

    /// Gates in the transitive fan-in of `roots`, stopping at primary inputs
    /// and flip-flop outputs, listed in topological order.
    pub fn fanin_gates(&self, roots: &[NetId]) -> Vec<usize> {
        let mut seen = vec![false; self.gates.len()];
        let mut stack: Vec<NetId> = roots.to_vec();
        while let Some(net) = stack.pop() {
            if let Some(Driver::Gate(g)) = self.drivers[net] {
                if !seen[g] {
                    seen[g] = true;
                    stack.extend(self.gates[g].inputs.iter().copied());
                }
            }
        }
        self.topo.iter().copied().filter(|&g| seen[g]).collect()
    }

    /// Source nets (primary inputs, flip-flop outputs) in the transitive
    /// fan-in of `roots`.
    pub fn support_of(&self, roots: &[NetId]) -> Vec<NetId> {
        let mut seen = vec![false; self.net_count()];
        let mut stack: Vec<NetId> = roots.to_vec();
        let mut out = Vec::new();
        while let Some(net) = stack.pop() {
            if seen[net] {
                continue;
            }
            seen[net] = true;
            match self.drivers[net] {
                Some(Driver::Gate(g)) => stack.extend(self.gates[g].inputs.iter().copied()),
                _ => out.push(net),
            }
        }
        out.sort_unstable();
        out
    }

    /// Evaluates every net for 64 lanes at once. `ff_words[k]` carries the
    /// value of flip-flop `k` in each lane, likewise `input_words` for the
    /// primary inputs.
    pub fn eval_words(&self, ff_words: &[u64], input_words: &[u64]) -> Vec<u64> {
        let mut values = vec![0u64; self.net_count()];
        for (k, &net) in self.primary_inputs.iter().enumerate() {
            values[net] = input_words[k];
        }
        for (k, ff) in self.flip_flops.iter().enumerate() {
            values[ff.output] = ff_words[k];
        }
        for &g in &self.topo {
            let gate = &self.gates[g];
            values[gate.output] = gate.kind.eval_words(gate.inputs.iter().map(|&n| values[n]));
        }
        values
    }

    /// One clock cycle: returns `(next_state, outputs)`.
    pub fn evaluate_cycle(
        &self,
        ff_state: &BitVector,
        inputs: &BitVector,
    ) -> Result<(BitVector, BitVector), NetlistError> {
        if ff_state.width() != self.flip_flops.len() {
            return Err(NetlistError::WidthMismatch {
                what: "flip-flop state",
                expected: self.flip_flops.len(),
                actual: ff_state.width(),
            });
        }
        if inputs.width() != self.primary_inputs.len() {
            return Err(NetlistError::WidthMismatch {
                what: "primary inputs",
                expected: self.primary_inputs.len(),
                actual: inputs.width(),
            });
        }
        let lane = |b: bool| if b { !0u64 } else { 0 };
        let ff_words: Vec<u64> = ff_state.iter().map(lane).collect();
        let in_words: Vec<u64> = inputs.iter().map(lane).collect();
        let values = self.eval_words(&ff_words, &in_words);
        let next = self
            .flip_flops
            .iter()
            .zip(ff_state.iter())
            .map(|(ff, cur)| {
                let enabled = ff.enable.is_none_or(|en| values[en] & 1 == 1);
                if enabled {
                    values[ff.data] & 1 == 1
                } else {
                    cur
                }
            })
            .collect();
        let outputs = self
            .primary_outputs
            .iter()
            .map(|&n| values[n] & 1 == 1)
            .collect();
        Ok((BitVector::from_bits(next), BitVector::from_bits(outputs)))
    }
}

/// Incremental netlist construction used by the parser and the synthesizer.
#[derive(Debug, Default)]
pub struct NetlistBuilder {
    name: String,
    net_names: Vec<String>,
    net_index: HashMap<String, NetId>,
    primary_inputs: Vec<NetId>,
    primary_outputs: Vec<NetId>,
    gates: Vec<Gate>,
    flip_flops: Vec<FlipFlop>,
}

impl NetlistBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    /// Returns the id of `name`, creating the net on first use.
    pub fn net(&mut self, name: &str) -> NetId {
        if let Some(&id) = self.net_index.get(name) {
            return id;
        }
        let id = self.net_names.len();
        self.net_names.push(name.to_string());
        self.net_index.insert(name.to_string(), id);
        id
    }

    pub fn has_net(&self, name: &str) -> bool {
        self.net_index.contains_key(name)
    }

    pub fn add_input(&mut self, name: &str) -> NetId {
        let id = self.net(name);
        self.primary_inputs.push(id);
        id
    }

    pub fn add_output(&mut self, name: &str) -> NetId {
        let id = self.net(name);
        self.primary_outputs.push(id);
        id
    }

    pub fn add_gate(&mut self, kind: GateKind, output: &str, inputs: &[&str]) -> NetId {
        let output = self.net(output);
        let inputs = inputs.iter().map(|n| self.net(n)).collect();
        self.gates.push(Gate {
            kind,
            inputs,
            output,
        });
        output
    }

    pub fn add_gate_ids(&mut self, kind: GateKind, output: NetId, inputs: Vec<NetId>) {
        self.gates.push(Gate {
            kind,
            inputs,
            output,
        });
    }

    pub fn add_flip_flop(&mut self, output: &str, data: &str, enable: Option<&str>) -> NetId {
        let output = self.net(output);
        let data = self.net(data);
        let enable = enable.map(|e| self.net(e));
        let kind = if enable.is_some() {
            FlipFlopKind::Dffe
        } else {
            FlipFlopKind::Dff
        };
        self.flip_flops.push(FlipFlop {
            kind,
            data,
            enable,
            output,
            init: false,
        });
        output
    }

    /// Sets the power-up value of the flip-flop driving `output`.
    pub fn set_init(&mut self, output: &str, init: bool) -> bool {
        let Some(&net) = self.net_index.get(output) else {
            return false;
        };
        match self.flip_flops.iter_mut().find(|ff| ff.output == net) {
            Some(ff) => {
                ff.init = init;
                true
            }
            None => false,
        }
    }

    /// Builds without rejecting invalid structure; run [`validate`] on the
    /// result to list problems.
    pub fn build_unchecked(self) -> Netlist {
        let n = self.net_names.len();
        let mut drivers = vec![None; n];
        for (i, &net) in self.primary_inputs.iter().enumerate() {
            drivers[net].get_or_insert(Driver::Input(i));
        }
        for (i, g) in self.gates.iter().enumerate() {
            drivers[g.output].get_or_insert(Driver::Gate(i));
        }
        for (i, ff) in self.flip_flops.iter().enumerate() {
            drivers[ff.output].get_or_insert(Driver::FlipFlop(i));
        }
        let (topo, _) = topo_sort(&self.gates, &drivers);
        Netlist {
            name: self.name,
            net_names: self.net_names,
            net_index: self.net_index,
            primary_inputs: self.primary_inputs,
            primary_outputs: self.primary_outputs,
            gates: self.gates,
            flip_flops: self.flip_flops,
            drivers,
            topo,
        }
    }

    /// Builds and validates; the first diagnostic becomes the error.
    pub fn build(self) -> Result<Netlist, NetlistError> {
        let netlist = self.build_unchecked();
        match validate(&netlist).into_iter().next() {
            Some(diag) => Err(diag.into()),
            None => Ok(netlist),
        }
    }
}

/// Kahn's algorithm over gates. Returns the order of all acyclic gates and
/// the indices left over (members of or downstream of a cycle).
fn topo_sort(gates: &[Gate], drivers: &[Option<Driver>]) -> (Vec<usize>, Vec<usize>) {
    let mut indegree = vec![0usize; gates.len()];
    let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); gates.len()];
    for (i, g) in gates.iter().enumerate() {
        for &inp in &g.inputs {
            if let Some(Driver::Gate(src)) = drivers[inp] {
                indegree[i] += 1;
                fanout[src].push(i);
            }
        }
    }
    let mut queue: std::collections::VecDeque<usize> =
        (0..gates.len()).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(gates.len());
    while let Some(g) = queue.pop_front() {
        order.push(g);
        for &next in &fanout[g] {
            indegree[next] -= 1;
            if indegree[next] == 0 {
                queue.push_back(next);
            }
        }
    }
    let leftover = (0..gates.len()).filter(|&i| indegree[i] > 0).collect();
    (order, leftover)
}

/// Finds one cycle among the leftover gates of a failed topological sort.
fn find_cycle(netlist: &Netlist, leftover: &[usize]) -> Vec<NetId> {
    let mut in_leftover = vec![false; netlist.gates.len()];
    for &g in leftover {
        in_leftover[g] = true;
    }
    let mut position: HashMap<usize, usize> = HashMap::new();
    let mut path: Vec<usize> = Vec::new();
    let mut current = leftover[0];
    loop {
        if let Some(&start) = position.get(&current) {
            return path[start..]
                .iter()
                .map(|&g| netlist.gates[g].output)
                .collect();
        }
        position.insert(current, path.len());
        path.push(current);
        // every leftover gate has at least one leftover predecessor
        current = netlist.gates[current]
            .inputs
            .iter()
            .filter_map(|&n| match netlist.drivers[n] {
                Some(Driver::Gate(src)) if in_leftover[src] => Some(src),
                _ => None,
            })
            .min()
            .expect("leftover gate without leftover predecessor");
    }
}

/// Lists every violated netlist invariant. Empty iff the netlist is valid.
pub fn validate(netlist: &Netlist) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if netlist.net_count() == 0 {
        diags.push(Diagnostic::EmptyNetlist);
        return diags;
    }
    let name = |n: NetId| netlist.net_names[n].clone();

    let mut input_count = vec![0usize; netlist.net_count()];
    let mut logic_count = vec![0usize; netlist.net_count()];
    for &n in &netlist.primary_inputs {
        input_count[n] += 1;
    }
    for g in &netlist.gates {
        logic_count[g.output] += 1;
    }
    for ff in &netlist.flip_flops {
        logic_count[ff.output] += 1;
    }
    for net in 0..netlist.net_count() {
        if input_count[net] > 0 && logic_count[net] > 0 {
            diags.push(Diagnostic::DrivenPrimaryInput { net: name(net) });
        } else if input_count[net] + logic_count[net] > 1 {
            diags.push(Diagnostic::DuplicateDriver { net: name(net) });
        }
    }

    for g in &netlist.gates {
        if !g.kind.arity_ok(g.inputs.len()) {
            diags.push(Diagnostic::ArityMismatch {
                net: name(g.output),
                kind: g.kind,
                arity: g.inputs.len(),
            });
        }
    }
    for ff in &netlist.flip_flops {
        let has_enable = ff.enable.is_some();
        if has_enable != (ff.kind == FlipFlopKind::Dffe) {
            diags.push(Diagnostic::EnableMismatch {
                net: name(ff.output),
            });
        }
    }

    let mut used = vec![false; netlist.net_count()];
    for g in &netlist.gates {
        for &n in &g.inputs {
            used[n] = true;
        }
    }
    for ff in &netlist.flip_flops {
        used[ff.data] = true;
        if let Some(e) = ff.enable {
            used[e] = true;
        }
    }
    for &n in &netlist.primary_outputs {
        used[n] = true;
    }
    for (net, driver) in netlist.drivers.iter().enumerate() {
        if driver.is_none() && used[net] {
            diags.push(Diagnostic::UndrivenNet { net: name(net) });
        }
    }

    let (_, leftover) = topo_sort(&netlist.gates, &netlist.drivers);
    if !leftover.is_empty() {
        let nets = find_cycle(netlist, &leftover)
            .into_iter()
            .map(name)
            .collect();
        diags.push(Diagnostic::CombinationalCycle { nets });
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_netlist() -> Netlist {
        let mut b = NetlistBuilder::new("xor");
        b.add_input("a");
        b.add_input("b");
        b.add_output("o");
        b.add_gate(GateKind::Xor, "o", &["a", "b"]);
        b.build().unwrap()
    }

    #[test]
    fn xor_truth_table() {
        let n = xor_netlist();
        for a in 0..2u64 {
            for b in 0..2u64 {
                let inputs = BitVector::from_u64(a | (b << 1), 2);
                let (_, out) = n.evaluate_cycle(&BitVector::zeros(0), &inputs).unwrap();
                assert_eq!(out.get(0), (a ^ b) == 1);
            }
        }
    }

    #[test]
    fn well_formed_netlist_has_no_diagnostics() {
        let mut b = NetlistBuilder::new("two");
        b.add_input("a");
        b.add_input("b");
        b.add_output("y");
        b.add_gate(GateKind::And, "t", &["a", "b"]);
        b.add_gate(GateKind::Not, "y", &["t"]);
        let n = b.build_unchecked();
        assert!(validate(&n).is_empty());
    }

    #[test]
    fn unregistered_loop_is_a_cycle() {
        let mut b = NetlistBuilder::new("loop");
        b.add_output("a");
        b.add_gate(GateKind::Not, "a", &["b"]);
        b.add_gate(GateKind::Not, "b", &["a"]);
        let n = b.build_unchecked();
        let diags = validate(&n);
        assert_eq!(diags.len(), 1);
        match &diags[0] {
            Diagnostic::CombinationalCycle { nets } => {
                let mut nets = nets.clone();
                nets.sort();
                assert_eq!(nets, vec!["a".to_string(), "b".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_drivers_reported() {
        let mut b = NetlistBuilder::new("dup");
        b.add_input("a");
        b.add_input("c");
        b.add_output("q");
        b.add_gate(GateKind::Not, "q", &["a"]);
        b.add_gate(GateKind::Buff, "q", &["c"]);
        let n = b.build_unchecked();
        assert_eq!(
            validate(&n),
            vec![Diagnostic::DuplicateDriver { net: "q".into() }]
        );
    }

    #[test]
    fn empty_netlist_diagnostic() {
        let n = NetlistBuilder::new("empty").build_unchecked();
        assert_eq!(validate(&n), vec![Diagnostic::EmptyNetlist]);
    }

    #[test]
    fn undriven_and_driven_input() {
        let mut b = NetlistBuilder::new("bad");
        b.add_input("a");
        b.add_output("y");
        b.add_gate(GateKind::And, "y", &["a", "ghost"]);
        b.add_gate(GateKind::Not, "a", &["y"]);
        let diags = validate(&b.build_unchecked());
        assert!(diags.contains(&Diagnostic::UndrivenNet {
            net: "ghost".into()
        }));
        assert!(diags.contains(&Diagnostic::DrivenPrimaryInput { net: "a".into() }));
    }

    #[test]
    fn enable_flip_flop_holds() {
        let mut b = NetlistBuilder::new("hold");
        b.add_input("d");
        b.add_input("en");
        b.add_output("q");
        b.add_flip_flop("q", "d", Some("en"));
        let n = b.build().unwrap();
        // q=1, d=0, en=0 -> hold
        let (next, _) = n
            .evaluate_cycle(&BitVector::from_u64(1, 1), &BitVector::from_u64(0b00, 2))
            .unwrap();
        assert!(next.get(0));
        // en=1 loads d
        let (next, _) = n
            .evaluate_cycle(&BitVector::from_u64(1, 1), &BitVector::from_u64(0b10, 2))
            .unwrap();
        assert!(!next.get(0));
    }

    #[test]
    fn width_mismatch() {
        let n = xor_netlist();
        let err = n
            .evaluate_cycle(&BitVector::zeros(0), &BitVector::zeros(3))
            .unwrap_err();
        assert!(matches!(err, NetlistError::WidthMismatch { .. }));
    }

    #[test]
    fn variadic_xnor_is_complement_of_parity() {
        let v = GateKind::Xnor.eval_words([0b1100u64, 0b1010, 0b1001]);
        assert_eq!(v & 0xf, !(0b1100u64 ^ 0b1010 ^ 0b1001) & 0xf);
    }
}
