// SPDX-License-Identifier: Apache-2.0

//! Truth-table synthesis to `.bench`, netlist printing and stimulus vectors.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::bits::BitVector;
use crate::encoding::EncodedTables;
use crate::extract::FsmCandidate;
use crate::netlist::{
    validate, Diagnostic, Driver, FlipFlopKind, GateKind, Netlist, NetlistBuilder, NetlistError,
};
use crate::reach::{replay, ReachError, WitnessTrace};

/// Largest `w + m` synthesized from a full truth table.
pub const MAX_SYNTH_BITS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmitError {
    #[error("truth table over {bits} bits exceeds the synthesis cap of {cap}")]
    CapacityExceeded { bits: usize, cap: usize },
    #[error("refusing to emit an invalid netlist: {0}")]
    Invalid(Diagnostic),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Trace(#[from] ReachError),
    #[error("stimulus line {line}: {reason}")]
    Stimulus { line: usize, reason: String },
    #[error("cycle {cycle}: expected state {expected}, simulated {actual}")]
    VectorMismatch {
        cycle: usize,
        expected: String,
        actual: String,
    },
}

/// Literal of one variable inside a product term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Literal {
    Positive,
    Negative,
    Absent,
}

/// Sum-of-products per target bit over `vars` variables (state bits first,
/// then input bits).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SopCover {
    pub vars: usize,
    pub terms: Vec<Vec<Vec<Literal>>>,
}

impl SopCover {
    /// Minterm cover: one full product per true row of each column.
    pub fn from_columns(vars: usize, columns: &[Vec<bool>]) -> Self {
        let terms = columns
            .iter()
            .map(|col| {
                col.iter()
                    .enumerate()
                    .filter(|(_, &v)| v)
                    .map(|(row, _)| minterm(vars, row))
                    .collect()
            })
            .collect();
        Self { vars, terms }
    }

    /// Value of target `bit` at the assignment whose variable `j` is bit `j`
    /// of `assignment`.
    pub fn eval(&self, bit: usize, assignment: u64) -> bool {
        self.terms[bit].iter().any(|term| {
            term.iter().enumerate().all(|(j, lit)| match lit {
                Literal::Positive => (assignment >> j) & 1 == 1,
                Literal::Negative => (assignment >> j) & 1 == 0,
                Literal::Absent => true,
            })
        })
    }
}

fn minterm(vars: usize, row: usize) -> Vec<Literal> {
    (0..vars)
        .map(|j| {
            if (row >> j) & 1 == 1 {
                Literal::Positive
            } else {
                Literal::Negative
            }
        })
        .collect()
}

/// Truth-table row `word << m | input` as a variable assignment (state bits
/// are variables `0..w`, inputs `w..w+m`).
fn assignment_of_row(row: usize, w: usize, m: usize) -> u64 {
    let word = (row >> m) as u64;
    let input = (row & ((1 << m) - 1)) as u64;
    word | (input << w)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynthOptions {
    /// Register each output in a `DFFE` enabled only on these state words;
    /// on any other word the output register keeps its value.
    pub output_enable_words: Option<Vec<u64>>,
}

struct Synth {
    builder: NetlistBuilder,
    var_names: Vec<String>,
    inverted: HashMap<usize, String>,
    terms: HashMap<Vec<Literal>, String>,
    const0: Option<String>,
}

impl Synth {
    fn literal(&mut self, var: usize, lit: Literal) -> Option<String> {
        match lit {
            Literal::Positive => Some(self.var_names[var].clone()),
            Literal::Negative => {
                if let Some(net) = self.inverted.get(&var) {
                    return Some(net.clone());
                }
                let net = format!("{}_n", self.var_names[var]);
                let src = self.var_names[var].clone();
                self.builder.add_gate(GateKind::Not, &net, &[&src]);
                self.inverted.insert(var, net.clone());
                Some(net)
            }
            Literal::Absent => None,
        }
    }

    fn term(&mut self, term: &[Literal]) -> String {
        if let Some(net) = self.terms.get(term) {
            return net.clone();
        }
        let lits: Vec<String> = term
            .iter()
            .enumerate()
            .filter_map(|(j, &l)| self.literal(j, l))
            .collect();
        let net = if lits.len() == 1 {
            lits[0].clone()
        } else {
            let net = format!("t{}", self.terms.len());
            let refs: Vec<&str> = lits.iter().map(String::as_str).collect();
            self.builder.add_gate(GateKind::And, &net, &refs);
            net
        };
        self.terms.insert(term.to_vec(), net.clone());
        net
    }

    fn zero(&mut self) -> String {
        if let Some(net) = &self.const0 {
            return net.clone();
        }
        let pos = self.var_names[0].clone();
        let neg = self
            .literal(0, Literal::Negative)
            .expect("negative literal");
        self.builder
            .add_gate(GateKind::And, "const0", &[&pos, &neg]);
        self.const0 = Some("const0".to_string());
        "const0".to_string()
    }

    /// Net computing the OR of `terms`; a single term is returned as is.
    fn sop(&mut self, terms: &[Vec<Literal>], name: &str) -> String {
        let nets: Vec<String> = terms.iter().map(|t| self.term(t)).collect();
        match nets.len() {
            0 => self.zero(),
            1 => nets[0].clone(),
            _ => {
                let refs: Vec<&str> = nets.iter().map(String::as_str).collect();
                self.builder.add_gate(GateKind::Or, name, &refs);
                name.to_string()
            }
        }
    }
}

/// Two-level minterm realization of encoded tables: one `DFF` per state bit
/// (power-up = reset word), shared product terms and inverters.
///
/// Nets: state `s<k>`, inputs `in<j>`, outputs `y<k>`.
pub fn synthesize_netlist(
    tables: &EncodedTables,
    name: &str,
    options: &SynthOptions,
) -> Result<Netlist, EmitError> {
    let (w, m) = (tables.width, tables.input_width);
    if w + m > MAX_SYNTH_BITS {
        return Err(EmitError::CapacityExceeded {
            bits: w + m,
            cap: MAX_SYNTH_BITS,
        });
    }
    if w == 0 {
        return Err(EmitError::Invalid(Diagnostic::EmptyNetlist));
    }
    let vars = w + m;
    let rows = 1usize << vars;
    let mut var_names: Vec<String> = (0..w).map(|k| format!("s{k}")).collect();
    var_names.extend((0..m).map(|j| format!("in{j}")));

    let column = |table: &[u64], bit: usize| -> Vec<bool> {
        let mut col = vec![false; rows];
        for (row, &v) in table.iter().enumerate() {
            col[assignment_of_row(row, w, m) as usize] = (v >> bit) & 1 == 1;
        }
        col
    };
    let next_cols: Vec<Vec<bool>> = (0..w).map(|k| column(&tables.next, k)).collect();
    let out_cols: Vec<Vec<bool>> = (0..tables.output_width)
        .map(|k| column(&tables.outputs, k))
        .collect();
    let next_cover = SopCover::from_columns(vars, &next_cols);
    let out_cover = SopCover::from_columns(vars, &out_cols);

    let mut builder = NetlistBuilder::new(name);
    for j in 0..m {
        builder.add_input(&format!("in{j}"));
    }
    for k in 0..tables.output_width {
        builder.add_output(&format!("y{k}"));
    }
    let mut synth = Synth {
        builder,
        var_names,
        inverted: HashMap::new(),
        terms: HashMap::new(),
        const0: None,
    };

    for k in 0..w {
        let data = synth.sop(&next_cover.terms[k], &format!("d{k}"));
        let q = format!("s{k}");
        synth.builder.add_flip_flop(&q, &data, None);
        synth
            .builder
            .set_init(&q, (tables.reset_word >> k) & 1 == 1);
    }

    let enable = options.output_enable_words.as_ref().map(|words| {
        let terms: Vec<Vec<Literal>> = words
            .iter()
            .map(|&word| {
                (0..vars)
                    .map(|j| match j {
                        j if j >= w => Literal::Absent,
                        j if (word >> j) & 1 == 1 => Literal::Positive,
                        _ => Literal::Negative,
                    })
                    .collect()
            })
            .collect();
        synth.sop(&terms, "valid")
    });
    for k in 0..tables.output_width {
        let y = format!("y{k}");
        match &enable {
            None => {
                let f = synth.sop(&out_cover.terms[k], &format!("f{k}"));
                synth.builder.add_gate(GateKind::Buff, &y, &[&f]);
            }
            Some(en) => {
                let f = synth.sop(&out_cover.terms[k], &format!("f{k}"));
                synth.builder.add_flip_flop(&y, &f, Some(en));
            }
        }
    }
    Ok(synth.builder.build()?)
}

/// Prints a netlist in the `.bench` grammar: header comment, inputs,
/// outputs, power-up directives, flip-flops, gates in topological order.
pub fn emit_bench(netlist: &Netlist) -> Result<String, EmitError> {
    if let Some(diag) = validate(netlist).into_iter().next() {
        return Err(EmitError::Invalid(diag));
    }
    let name = |n: usize| netlist.net_name(n);
    let mut out = String::new();
    let header = netlist
        .name()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_");
    if !header.is_empty() {
        writeln!(out, "# {header}").unwrap();
    }
    for &pi in netlist.primary_inputs() {
        writeln!(out, "INPUT({})", name(pi)).unwrap();
    }
    for &po in netlist.primary_outputs() {
        writeln!(out, "OUTPUT({})", name(po)).unwrap();
    }
    for ff in netlist.flip_flops().iter().filter(|ff| ff.init) {
        writeln!(out, "#@ init {} 1", name(ff.output)).unwrap();
    }
    for ff in netlist.flip_flops() {
        match (ff.kind, ff.enable) {
            (FlipFlopKind::Dffe, Some(en)) => {
                writeln!(
                    out,
                    "{} = DFFE({}, {})",
                    name(ff.output),
                    name(ff.data),
                    name(en)
                )
            }
            _ => writeln!(out, "{} = DFF({})", name(ff.output), name(ff.data)),
        }
        .unwrap();
    }
    for &g in netlist.topo_order() {
        let gate = &netlist.gates()[g];
        let args: Vec<&str> = gate.inputs.iter().map(|&i| name(i)).collect();
        writeln!(
            out,
            "{} = {}({})",
            name(gate.output),
            gate.kind,
            args.join(", ")
        )
        .unwrap();
    }
    Ok(out)
}

/// One stimulus row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StimulusRow {
    pub cycle: usize,
    pub inputs: Vec<bool>,
    /// Expected state after the transition and any flip.
    pub state: Vec<bool>,
    pub seu_bit: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StimulusFile {
    pub input_names: Vec<String>,
    pub state_names: Vec<String>,
    pub rows: Vec<StimulusRow>,
}

fn bit_char(b: bool) -> char {
    if b {
        '1'
    } else {
        '0'
    }
}

impl StimulusFile {
    pub fn to_text(&self) -> String {
        let mut out = String::from("cycle");
        for name in self.input_names.iter().chain(&self.state_names) {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",seu_bit\n");
        for row in &self.rows {
            write!(out, "{}", row.cycle).unwrap();
            for &b in row.inputs.iter().chain(&row.state) {
                out.push(',');
                out.push(bit_char(b));
            }
            out.push(',');
            if let Some(bit) = row.seu_bit {
                write!(out, "{bit}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses a stimulus file whose last `state_width` signal columns are
    /// state bits.
    pub fn parse(text: &str, state_width: usize) -> Result<Self, EmitError> {
        let err = |line: usize, reason: &str| EmitError::Stimulus {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.split('\n');
        let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
        if header.len() < 2 + state_width
            || header[0] != "cycle"
            || header[header.len() - 1] != "seu_bit"
        {
            return Err(err(1, "header must be `cycle,<inputs>,<states>,seu_bit`"));
        }
        let signals = &header[1..header.len() - 1];
        let input_count = signals.len() - state_width;
        let mut rows = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != header.len() {
                return Err(err(line_no, "column count differs from header"));
            }
            let cycle: usize = cols[0].parse().map_err(|_| err(line_no, "bad cycle"))?;
            if cycle != rows.len() {
                return Err(err(line_no, "cycles must count up from 0"));
            }
            let bits = cols[1..cols.len() - 1]
                .iter()
                .map(|c| match *c {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    _ => Err(err(line_no, "bits must be 0 or 1")),
                })
                .collect::<Result<Vec<bool>, _>>()?;
            let seu = cols[cols.len() - 1];
            let seu_bit = if seu.is_empty() {
                None
            } else {
                let bit: u32 = seu.parse().map_err(|_| err(line_no, "bad seu_bit"))?;
                if bit as usize >= state_width {
                    return Err(err(line_no, "seu_bit out of range"));
                }
                Some(bit)
            };
            rows.push(StimulusRow {
                cycle,
                inputs: bits[..input_count].to_vec(),
                state: bits[input_count..].to_vec(),
                seu_bit,
            });
        }
        Ok(Self {
            input_names: signals[..input_count]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            state_names: signals[input_count..]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            rows,
        })
    }
}

fn bits_of(value: u64, width: usize) -> Vec<bool> {
    (0..width).map(|k| (value >> k) & 1 == 1).collect()
}

fn value_of(bits: &[bool]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (k, &b)| acc | ((b as u64) << k))
}

/// Stimulus rows for a witness trace; the trace is replayed first.
pub fn emit_vectors(
    trace: &WitnessTrace,
    candidate: &FsmCandidate,
) -> Result<StimulusFile, EmitError> {
    replay(candidate, trace, trace.start)?;
    let after = trace.states_after();
    let rows = trace
        .steps
        .iter()
        .zip(after)
        .enumerate()
        .map(|(cycle, (step, state))| StimulusRow {
            cycle,
            inputs: bits_of(step.input as u64, candidate.m()),
            state: bits_of(state as u64, candidate.n()),
            seu_bit: step.seu_flip,
        })
        .collect();
    Ok(StimulusFile {
        input_names: candidate.control_names.clone(),
        state_names: candidate.state_names.clone(),
        rows,
    })
}

fn mismatch(cycle: usize, expected: &[bool], actual: &[bool]) -> EmitError {
    let show = |b: &[bool]| BitVector::from_bits(b.to_vec()).to_string();
    EmitError::VectorMismatch {
        cycle,
        expected: show(expected),
        actual: show(actual),
    }
}

/// Drives the candidate's cones with the file's inputs from `start`, checking
/// every expected-state row.
pub fn replay_stimulus(
    candidate: &FsmCandidate,
    file: &StimulusFile,
    start: u64,
) -> Result<u64, EmitError> {
    let mut state = start;
    for row in &file.rows {
        state = candidate.step(state, value_of(&row.inputs));
        if let Some(bit) = row.seu_bit {
            state ^= 1 << bit;
        }
        let actual = bits_of(state, candidate.n());
        if actual != row.state {
            return Err(mismatch(row.cycle, &row.state, &actual));
        }
    }
    Ok(state)
}

/// Drives a whole netlist from `start` (all flip-flops). Input columns must
/// name primary inputs and state columns flip-flop outputs; unnamed primary
/// inputs are held at 0.
pub fn replay_stimulus_netlist(
    netlist: &Netlist,
    file: &StimulusFile,
    start: &BitVector,
) -> Result<BitVector, EmitError> {
    let unknown = |name: &str| EmitError::Stimulus {
        line: 1,
        reason: format!("signal {name} is not in the netlist"),
    };
    let pi_index = |name: &str| {
        let net = netlist.net_id(name).ok_or_else(|| unknown(name))?;
        match netlist.driver(net) {
            Some(Driver::Input(i)) => Ok(i),
            _ => Err(unknown(name)),
        }
    };
    let ff_index = |name: &str| {
        let net = netlist.net_id(name).ok_or_else(|| unknown(name))?;
        netlist.flip_flop_of(net).ok_or_else(|| unknown(name))
    };
    let inputs: Vec<usize> = file
        .input_names
        .iter()
        .map(|n| pi_index(n))
        .collect::<Result<_, _>>()?;
    let states: Vec<usize> = file
        .state_names
        .iter()
        .map(|n| ff_index(n))
        .collect::<Result<_, _>>()?;
    let mut state = start.clone();
    for row in &file.rows {
        let mut pis = BitVector::zeros(netlist.primary_inputs().len());
        for (&pi, &b) in inputs.iter().zip(&row.inputs) {
            pis.set(pi, b);
        }
        let (next, _) = netlist.evaluate_cycle(&state, &pis)?;
        state = next;
        if let Some(bit) = row.seu_bit {
            state.flip(states[bit as usize]);
        }
        let actual: Vec<bool> = states.iter().map(|&f| state.get(f)).collect();
        if actual != row.state {
            return Err(mismatch(row.cycle, &row.state, &actual));
        }
    }
    Ok(state)
}
