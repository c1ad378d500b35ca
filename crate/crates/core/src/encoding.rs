// SPDX-License-Identifier: Apache-2.0

//! State encodings, distance-3 correction and re-encoding of abstract
//! machines.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::bits::format_bits;
use crate::extract::{FsmCandidate, SinkValue};
use crate::stg::Stg;

/// Largest `w + m` for which encoded truth tables are built.
pub const MAX_TABLE_BITS: usize = 24;
/// Largest number of abstract states pulled out of a graph.
pub const MAX_ABSTRACT_STATES: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("an encoding needs at least 2 states, got {0}")]
    TooFewStates(usize),
    #[error("{scheme} cannot encode {states} states")]
    UnsupportedSize { scheme: Scheme, states: usize },
    #[error("minimum distance {found} is below the required {required}")]
    DistanceTooSmall { found: u32, required: u32 },
    #[error("table line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("table has {table} states, machine has {fsm}")]
    StateCountMismatch { table: usize, fsm: usize },
    #[error("truth table over {bits} bits exceeds the cap of {cap}")]
    CapacityExceeded { bits: usize, cap: usize },
    #[error("policy {policy:?} needs a one-hot table")]
    PolicyNeedsOneHot { policy: UnusedPolicy },
    #[error("legal state {state:#x} has an illegal successor {next:#x}")]
    LegalSetNotClosed { state: u32, next: u32 },
    #[error("graph has no legal states or no reset state")]
    NoLegalStates,
    #[error("{0} legal states exceed the abstract machine limit")]
    TooManyStates(usize),
    #[error("output width {0} exceeds 64")]
    OutputTooWide(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scheme {
    Binary,
    Gray,
    OneHot,
    /// Minimum pairwise distance `d` (only 3 is generated).
    Hamming(u32),
    /// Imported from a table file.
    Custom,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Binary => f.write_str("binary"),
            Scheme::Gray => f.write_str("gray"),
            Scheme::OneHot => f.write_str("onehot"),
            Scheme::Hamming(d) => write!(f, "hamming{d}"),
            Scheme::Custom => f.write_str("custom"),
        }
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "binary" => Ok(Scheme::Binary),
            "gray" => Ok(Scheme::Gray),
            "onehot" | "one-hot" => Ok(Scheme::OneHot),
            "hamming" | "hamming3" => Ok(Scheme::Hamming(3)),
            other => Err(format!(
                "unknown scheme {other:?} (expected binary, gray, onehot or hamming3)"
            )),
        }
    }
}

/// Symbolic machine: `S` states, `m` input bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractFsm {
    pub num_states: usize,
    pub input_width: usize,
    /// `delta[id << m | input]`.
    pub delta: Vec<u32>,
    pub output_width: usize,
    /// `lambda[id << m | input]`, bit `k` = output `k`.
    pub lambda: Vec<u64>,
    pub reset_id: u32,
    pub default_id: u32,
}

impl AbstractFsm {
    pub fn next(&self, id: u32, input: u32) -> u32 {
        self.delta[((id as usize) << self.input_width) | input as usize]
    }

    pub fn output(&self, id: u32, input: u32) -> u64 {
        self.lambda[((id as usize) << self.input_width) | input as usize]
    }

    /// Machine with state ids renamed by `perm[old] = new`.
    pub fn relabel(&self, perm: &[u32]) -> AbstractFsm {
        let m = self.input_width;
        let mut delta = vec![0; self.delta.len()];
        let mut lambda = vec![0; self.lambda.len()];
        for old in 0..self.num_states {
            let new = perm[old] as usize;
            for i in 0..1usize << m {
                delta[(new << m) | i] = perm[self.delta[(old << m) | i] as usize];
                lambda[(new << m) | i] = self.lambda[(old << m) | i];
            }
        }
        AbstractFsm {
            num_states: self.num_states,
            input_width: m,
            delta,
            output_width: self.output_width,
            lambda,
            reset_id: perm[self.reset_id as usize],
            default_id: perm[self.default_id as usize],
        }
    }
}

/// Modulo-`modulus` counter with a count-enable input; the output is the
/// count in `ceil(log2 modulus)` bits.
pub fn counter_fsm(modulus: usize) -> AbstractFsm {
    let width = ceil_log2(modulus).max(1);
    let mut delta = Vec::with_capacity(modulus * 2);
    let mut lambda = Vec::with_capacity(modulus * 2);
    for id in 0..modulus as u32 {
        delta.push(id);
        delta.push((id + 1) % modulus as u32);
        lambda.push(id as u64);
        lambda.push(id as u64);
    }
    AbstractFsm {
        num_states: modulus,
        input_width: 1,
        delta,
        output_width: width,
        lambda,
        reset_id: 0,
        default_id: 0,
    }
}

fn ceil_log2(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()) as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingTable {
    pub scheme: Scheme,
    pub width: usize,
    /// `codewords[id]`, bit 0 = first state register.
    pub codewords: Vec<u64>,
}

fn hamming74(data: u64) -> u64 {
    let d = |k: u32| (data >> k) & 1;
    let p1 = d(0) ^ d(1) ^ d(3);
    let p2 = d(0) ^ d(2) ^ d(3);
    let p3 = d(1) ^ d(2) ^ d(3);
    data | (p1 << 4) | (p2 << 5) | (p3 << 6)
}

/// Deterministic table for `num_states` states.
pub fn gen_encoding(scheme: Scheme, num_states: usize) -> Result<EncodingTable, EncodingError> {
    if num_states < 2 {
        return Err(EncodingError::TooFewStates(num_states));
    }
    let ids = 0..num_states as u64;
    let (width, codewords): (usize, Vec<u64>) = match scheme {
        Scheme::Binary => (ceil_log2(num_states), ids.collect()),
        Scheme::Gray => (ceil_log2(num_states), ids.map(|k| k ^ (k >> 1)).collect()),
        Scheme::OneHot if num_states <= 64 => (num_states, ids.map(|k| 1 << k).collect()),
        Scheme::Hamming(3) if num_states <= 16 => (7, ids.map(hamming74).collect()),
        _ => {
            return Err(EncodingError::UnsupportedSize {
                scheme,
                states: num_states,
            })
        }
    };
    Ok(EncodingTable {
        scheme,
        width,
        codewords,
    })
}

impl EncodingTable {
    pub fn num_states(&self) -> usize {
        self.codewords.len()
    }

    pub fn encode(&self, id: u32) -> u64 {
        self.codewords[id as usize]
    }

    pub fn decode(&self, word: u64) -> Option<u32> {
        self.codewords
            .iter()
            .position(|&c| c == word)
            .map(|i| i as u32)
    }

    /// `<id> <codeword>` per line, codeword MSB first.
    pub fn to_text(&self) -> String {
        self.codewords
            .iter()
            .enumerate()
            .map(|(id, &c)| format!("{id} {}\n", format_bits(c, self.width)))
            .collect()
    }

    pub fn from_text(text: &str) -> Result<Self, EncodingError> {
        let mut rows: Vec<(usize, u64)> = Vec::new();
        let mut width = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |reason: &str| EncodingError::Parse {
                line,
                reason: reason.to_string(),
            };
            let mut parts = content.split_whitespace();
            let (Some(id), Some(word), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err("expected `<id> <codeword>`"));
            };
            let id: usize = id.parse().map_err(|_| err("bad state id"))?;
            if word.is_empty() || word.len() > 64 || !word.chars().all(|c| c == '0' || c == '1') {
                return Err(err("codeword must be 1 to 64 binary digits"));
            }
            if *width.get_or_insert(word.len()) != word.len() {
                return Err(err("codeword width differs from earlier lines"));
            }
            let value = u64::from_str_radix(word, 2).map_err(|_| err("bad codeword"))?;
            rows.push((id, value));
        }
        rows.sort_unstable();
        for (k, &(id, _)) in rows.iter().enumerate() {
            if id != k {
                return Err(EncodingError::Parse {
                    line: 0,
                    reason: format!("state ids must be 0..{} exactly once", rows.len()),
                });
            }
        }
        let codewords: Vec<u64> = rows.into_iter().map(|(_, c)| c).collect();
        if codewords.len() < 2 {
            return Err(EncodingError::TooFewStates(codewords.len()));
        }
        let table = EncodingTable {
            scheme: Scheme::Custom,
            width: width.unwrap_or(0),
            codewords,
        };
        if min_distance(&table) == 0 {
            return Err(EncodingError::Parse {
                line: 0,
                reason: "codewords must be distinct".into(),
            });
        }
        Ok(table)
    }
}

/// Smallest pairwise Hamming distance (brute force).
pub fn min_distance(table: &EncodingTable) -> u32 {
    let c = &table.codewords;
    let mut best = u32::MAX;
    for a in 0..c.len() {
        for b in a + 1..c.len() {
            best = best.min((c[a] ^ c[b]).count_ones());
        }
    }
    best
}

/// Total map from register words to codewords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corrector {
    pub radius: u32,
    pub default_id: u32,
    /// Per word: the id of the codeword within `radius`, if any.
    nearest: Vec<Option<u32>>,
    codewords: Vec<u64>,
}

/// How the corrector resolves one register word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Resolution {
    /// Word lies within the radius of this state's codeword.
    Within(u32),
    /// No codeword within the radius; the default state is used.
    Fallback,
}

pub fn make_corrector(table: &EncodingTable, default_id: u32) -> Result<Corrector, EncodingError> {
    let d = min_distance(table);
    if d < 3 {
        return Err(EncodingError::DistanceTooSmall {
            found: d,
            required: 3,
        });
    }
    if table.width > MAX_TABLE_BITS {
        return Err(EncodingError::CapacityExceeded {
            bits: table.width,
            cap: MAX_TABLE_BITS,
        });
    }
    if default_id as usize >= table.num_states() {
        return Err(EncodingError::StateCountMismatch {
            table: table.num_states(),
            fsm: default_id as usize + 1,
        });
    }
    let radius = (d - 1) / 2;
    let nearest = (0..1u64 << table.width)
        .map(|word| {
            table
                .codewords
                .iter()
                .position(|&c| (c ^ word).count_ones() <= radius)
                .map(|i| i as u32)
        })
        .collect();
    Ok(Corrector {
        radius,
        default_id,
        nearest,
        codewords: table.codewords.clone(),
    })
}

impl Corrector {
    pub fn width_words(&self) -> usize {
        self.nearest.len()
    }

    pub fn resolve(&self, word: u64) -> Resolution {
        match self.nearest[word as usize] {
            Some(id) => Resolution::Within(id),
            None => Resolution::Fallback,
        }
    }

    /// State id the word is corrected to.
    pub fn correct_id(&self, word: u64) -> u32 {
        self.nearest[word as usize].unwrap_or(self.default_id)
    }

    /// Codeword the word is corrected to.
    pub fn correct(&self, word: u64) -> u64 {
        self.codewords[self.correct_id(word) as usize]
    }
}

/// Fate of a corrupted codeword under a corrector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsetVerdict {
    /// Restored to the original codeword.
    Corrected,
    /// Outside every correction radius; replaced by the default codeword.
    Fallback,
    /// Pulled to a different state's codeword.
    Miscorrected { to: u32 },
}

pub fn upset_verdict(corrector: &Corrector, origin: u32, mask: u64) -> UpsetVerdict {
    let word = corrector.codewords[origin as usize] ^ mask;
    match corrector.resolve(word) {
        Resolution::Within(id) if id == origin => UpsetVerdict::Corrected,
        Resolution::Within(id) => UpsetVerdict::Miscorrected { to: id },
        Resolution::Fallback => UpsetVerdict::Fallback,
    }
}

/// Behavior of register words that are not codewords (without a corrector).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum UnusedPolicy {
    /// Next word is the default state's codeword; outputs are the default
    /// state's outputs.
    #[default]
    DefaultState,
    /// One-hot decode by OR: next word and outputs are the bitwise OR over
    /// the set bits' states (zero-hot yields all zeros).
    OneHotOr,
}

/// Encoded next-state and output truth tables over `w` state bits and `m`
/// input bits, row `word << m | input`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedTables {
    pub width: usize,
    pub input_width: usize,
    pub output_width: usize,
    pub next: Vec<u64>,
    pub outputs: Vec<u64>,
    pub reset_word: u64,
}

impl EncodedTables {
    pub fn row(&self, word: u64, input: u64) -> usize {
        ((word as usize) << self.input_width) | input as usize
    }
}

pub fn reencode(
    fsm: &AbstractFsm,
    table: &EncodingTable,
    corrector: Option<&Corrector>,
    policy: UnusedPolicy,
) -> Result<EncodedTables, EncodingError> {
    if table.num_states() != fsm.num_states {
        return Err(EncodingError::StateCountMismatch {
            table: table.num_states(),
            fsm: fsm.num_states,
        });
    }
    let (w, m) = (table.width, fsm.input_width);
    if w + m > MAX_TABLE_BITS {
        return Err(EncodingError::CapacityExceeded {
            bits: w + m,
            cap: MAX_TABLE_BITS,
        });
    }
    if policy == UnusedPolicy::OneHotOr
        && corrector.is_none()
        && table
            .codewords
            .iter()
            .enumerate()
            .any(|(k, &c)| c != 1 << k)
    {
        return Err(EncodingError::PolicyNeedsOneHot { policy });
    }
    let mut decode = vec![None; 1 << w];
    for (id, &c) in table.codewords.iter().enumerate() {
        decode[c as usize] = Some(id as u32);
    }
    let rows = 1usize << (w + m);
    let mut next = vec![0u64; rows];
    let mut outputs = vec![0u64; rows];
    for word in 0..1u64 << w {
        let state = match corrector {
            Some(c) => Some(c.correct_id(word)),
            None => decode[word as usize],
        };
        for input in 0..1u32 << m {
            let row = ((word as usize) << m) | input as usize;
            let (nw, out) = match (state, policy) {
                (Some(id), _) => (table.encode(fsm.next(id, input)), fsm.output(id, input)),
                (None, UnusedPolicy::DefaultState) => (
                    table.encode(fsm.default_id),
                    fsm.output(fsm.default_id, input),
                ),
                (None, UnusedPolicy::OneHotOr) => (0..fsm.num_states as u32)
                    .filter(|k| (word >> k) & 1 == 1)
                    .fold((0, 0), |(nw, out), k| {
                        (
                            nw | table.encode(fsm.next(k, input)),
                            out | fsm.output(k, input),
                        )
                    }),
            };
            next[row] = nw;
            outputs[row] = out;
        }
    }
    Ok(EncodedTables {
        width: w,
        input_width: m,
        output_width: fsm.output_width,
        next,
        outputs,
        reset_word: table.encode(fsm.reset_id),
    })
}

/// Abstract machine over the legal states of a classified graph, ids in
/// ascending state order. Outputs come from the candidate's output sinks
/// with output-only sources at 0; held sinks read as 0.
pub fn extract_abstract(stg: &Stg, candidate: &FsmCandidate) -> Result<AbstractFsm, EncodingError> {
    let legal = stg.legal_states();
    if legal.is_empty() || stg.reset_states().is_empty() {
        return Err(EncodingError::NoLegalStates);
    }
    if legal.len() > MAX_ABSTRACT_STATES {
        return Err(EncodingError::TooManyStates(legal.len()));
    }
    let output_width = candidate.output_sinks.len();
    if output_width > 64 {
        return Err(EncodingError::OutputTooWide(output_width));
    }
    let mut id_of = vec![u32::MAX; stg.state_count()];
    for (id, &s) in legal.iter().enumerate() {
        id_of[s as usize] = id as u32;
    }
    let m = stg.m();
    let mut delta = Vec::with_capacity(legal.len() << m);
    let mut lambda = Vec::with_capacity(legal.len() << m);
    for &s in &legal {
        for (input, &t) in stg.successors(s).iter().enumerate() {
            let id = id_of[t as usize];
            if id == u32::MAX {
                return Err(EncodingError::LegalSetNotClosed { state: s, next: t });
            }
            delta.push(id);
            let out = candidate
                .outputs(s as u64, input as u64, 0)
                .iter()
                .enumerate()
                .fold(0u64, |acc, (k, v)| match v {
                    SinkValue::Bit(true) => acc | (1 << k),
                    _ => acc,
                });
            lambda.push(out);
        }
    }
    let reset = *stg.reset_states().iter().min().expect("checked non-empty");
    let reset_id = id_of[reset as usize];
    Ok(AbstractFsm {
        num_states: legal.len(),
        input_width: m,
        delta,
        output_width,
        lambda,
        reset_id,
        default_id: reset_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_prefix() {
        let t = gen_encoding(Scheme::Gray, 10).unwrap();
        assert_eq!(t.width, 4);
        assert_eq!(&t.codewords[..4], &[0b0000, 0b0001, 0b0011, 0b0010]);
    }

    #[test]
    fn distances() {
        assert_eq!(min_distance(&gen_encoding(Scheme::Binary, 10).unwrap()), 1);
        assert_eq!(min_distance(&gen_encoding(Scheme::OneHot, 10).unwrap()), 2);
        let h = gen_encoding(Scheme::Hamming(3), 10).unwrap();
        assert_eq!(h.width, 7);
        assert_eq!(min_distance(&h), 3);
        assert!(gen_encoding(Scheme::Hamming(3), 17).is_err());
        assert!(gen_encoding(Scheme::Binary, 1).is_err());
    }

    #[test]
    fn corrector_rules() {
        let h = gen_encoding(Scheme::Hamming(3), 10).unwrap();
        let c = make_corrector(&h, 0).unwrap();
        assert_eq!(c.radius, 1);
        let cw = h.encode(4);
        assert_eq!(c.correct(cw ^ 1), cw);
        assert!(make_corrector(&gen_encoding(Scheme::OneHot, 4).unwrap(), 0).is_err());
    }

    #[test]
    fn binary_default_case() {
        let fsm = counter_fsm(10);
        let t = gen_encoding(Scheme::Binary, 10).unwrap();
        let enc = reencode(&fsm, &t, None, UnusedPolicy::DefaultState).unwrap();
        assert_eq!(enc.next[enc.row(0b1010, 1)], 0);
        assert_eq!(enc.next[enc.row(9, 1)], 0);
        assert_eq!(enc.next[enc.row(3, 1)], 4);
        assert_eq!(enc.next[enc.row(3, 0)], 3);
    }

    #[test]
    fn gray_step() {
        let fsm = counter_fsm(10);
        let t = gen_encoding(Scheme::Gray, 10).unwrap();
        let enc = reencode(&fsm, &t, None, UnusedPolicy::DefaultState).unwrap();
        assert_eq!(enc.next[enc.row(0b0001, 1)], 0b0011);
    }

    #[test]
    fn onehot_or_policy() {
        let fsm = counter_fsm(10);
        let t = gen_encoding(Scheme::OneHot, 10).unwrap();
        let enc = reencode(&fsm, &t, None, UnusedPolicy::OneHotOr).unwrap();
        // two-hot {3, 8}: outputs 3 | 8 = 11
        let word = (1 << 3) | (1 << 8);
        assert_eq!(enc.outputs[enc.row(word, 0)], 11);
        assert_eq!(enc.next[enc.row(word, 1)], (1 << 4) | (1 << 9));
        assert_eq!(enc.next[enc.row(0, 1)], 0);
        let bin = gen_encoding(Scheme::Binary, 10).unwrap();
        assert!(reencode(&fsm, &bin, None, UnusedPolicy::OneHotOr).is_err());
    }

    #[test]
    fn table_text_round_trip() {
        let t = gen_encoding(Scheme::Hamming(3), 5).unwrap();
        let text = t.to_text();
        assert!(text.starts_with("0 0000000\n1 0110001\n"));
        let back = EncodingTable::from_text(&text).unwrap();
        assert_eq!(back.codewords, t.codewords);
        assert_eq!(back.width, 7);
        assert!(EncodingTable::from_text("0 01\n0 10\n").is_err());
        assert!(EncodingTable::from_text("0 01\n1 011\n").is_err());
        assert!(EncodingTable::from_text("0 01\n1 01\n").is_err());
    }

    #[test]
    fn scheme_names() {
        for s in ["binary", "gray", "onehot", "hamming3"] {
            let scheme: Scheme = s.parse().unwrap();
            assert_eq!(scheme.to_string(), s);
        }
        assert!("ternary".parse::<Scheme>().is_err());
    }
}
