// SPDX-License-Identifier: Apache-2.0

//! Explicit state transition graphs and illegal-state classification.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::extract::FsmCandidate;
use crate::graph::{strongly_connected, Csr};

pub const DEFAULT_MAX_STATE_BITS: usize = 20;
pub const DEFAULT_MAX_TOTAL_BITS: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StgCaps {
    pub max_state_bits: usize,
    pub max_total_bits: usize,
}

impl Default for StgCaps {
    fn default() -> Self {
        Self {
            max_state_bits: DEFAULT_MAX_STATE_BITS,
            max_total_bits: DEFAULT_MAX_TOTAL_BITS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StgError {
    #[error("state space too large: n = {n}, m = {m} (caps: n <= {max_state_bits}, n + m <= {max_total_bits})")]
    CapacityExceeded {
        n: usize,
        m: usize,
        max_state_bits: usize,
        max_total_bits: usize,
    },
    #[error("legal set has not been computed")]
    LegalSetMissing,
    #[error("state {state:#x} does not fit in {n} bits")]
    StateOutOfRange { state: u64, n: usize },
    #[error("transition table has {actual} entries, expected {expected}")]
    TableSize { expected: usize, actual: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StateClass {
    Legal,
    Recoverable,
    Conditional,
    Irrecoverable,
    Deadlock,
}

impl StateClass {
    pub fn is_legal(self) -> bool {
        self == StateClass::Legal
    }

    /// Irrecoverable or deadlocked: no way back without a reset.
    pub fn is_trap(self) -> bool {
        matches!(self, StateClass::Irrecoverable | StateClass::Deadlock)
    }

    pub fn name(self) -> &'static str {
        match self {
            StateClass::Legal => "LEGAL",
            StateClass::Recoverable => "RECOVERABLE",
            StateClass::Conditional => "CONDITIONAL",
            StateClass::Irrecoverable => "IRRECOVERABLE",
            StateClass::Deadlock => "DEADLOCK",
        }
    }
}

impl std::fmt::Display for StateClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Cycles needed to reach the first legal state. `max` is `None` when some
/// input sequence avoids the legal set forever.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RecoveryDepth {
    pub min: u32,
    pub max: Option<u32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub legal: usize,
    pub recoverable: usize,
    pub conditional: usize,
    pub irrecoverable: usize,
    pub deadlock: usize,
}

impl ClassCounts {
    pub fn add(&mut self, class: StateClass) {
        match class {
            StateClass::Legal => self.legal += 1,
            StateClass::Recoverable => self.recoverable += 1,
            StateClass::Conditional => self.conditional += 1,
            StateClass::Irrecoverable => self.irrecoverable += 1,
            StateClass::Deadlock => self.deadlock += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.legal + self.recoverable + self.conditional + self.irrecoverable + self.deadlock
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub classes: Vec<StateClass>,
    /// Defined for illegal states with a path to the legal set.
    pub depth: Vec<Option<RecoveryDepth>>,
}

impl Classification {
    pub fn counts(&self) -> ClassCounts {
        let mut c = ClassCounts::default();
        for &class in &self.classes {
            c.add(class);
        }
        c
    }

    /// Largest `max` depth over RECOVERABLE states.
    pub fn worst_recovery_depth(&self) -> Option<u32> {
        self.classes
            .iter()
            .zip(&self.depth)
            .filter(|(c, _)| **c == StateClass::Recoverable)
            .filter_map(|(_, d)| d.and_then(|d| d.max))
            .max()
    }
}

/// State transition graph of an `n`-bit machine with `m` control bits.
#[derive(Debug, Clone)]
pub struct Stg {
    n: usize,
    m: usize,
    /// Successor of `(s, i)` at `s << m | i`.
    edges: Vec<u32>,
    reset_states: Vec<u32>,
    legal: Option<Vec<bool>>,
    classification: Option<Classification>,
}

impl Stg {
    /// Wraps a ready-made table (row `s << m | i`).
    pub fn from_table(n: usize, m: usize, edges: Vec<u32>) -> Result<Self, StgError> {
        if n > 31 || n + m > 40 {
            return Err(StgError::CapacityExceeded {
                n,
                m,
                max_state_bits: 31,
                max_total_bits: 40,
            });
        }
        let expected = 1usize << (n + m);
        if edges.len() != expected {
            return Err(StgError::TableSize {
                expected,
                actual: edges.len(),
            });
        }
        if let Some(&bad) = edges.iter().find(|&&t| (t as u64) >> n != 0) {
            return Err(StgError::StateOutOfRange {
                state: bad as u64,
                n,
            });
        }
        Ok(Self {
            n,
            m,
            edges,
            reset_states: Vec::new(),
            legal: None,
            classification: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn state_count(&self) -> usize {
        1 << self.n
    }

    pub fn input_count(&self) -> usize {
        1 << self.m
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[u32] {
        &self.edges
    }

    pub fn successor(&self, state: u32, input: u32) -> u32 {
        self.edges[((state as usize) << self.m) | input as usize]
    }

    /// Successors of `state` indexed by input vector.
    pub fn successors(&self, state: u32) -> &[u32] {
        let base = (state as usize) << self.m;
        &self.edges[base..base + (1 << self.m)]
    }

    pub fn reset_states(&self) -> &[u32] {
        &self.reset_states
    }

    pub fn legal(&self) -> Option<&[bool]> {
        self.legal.as_deref()
    }

    pub fn is_legal(&self, state: u32) -> bool {
        self.legal.as_ref().is_some_and(|l| l[state as usize])
    }

    pub fn legal_states(&self) -> Vec<u32> {
        match &self.legal {
            Some(l) => (0..l.len() as u32).filter(|&s| l[s as usize]).collect(),
            None => Vec::new(),
        }
    }

    pub fn legal_count(&self) -> usize {
        self.legal
            .as_ref()
            .map_or(0, |l| l.iter().filter(|&&b| b).count())
    }

    /// Installs a legal set and clears any stale classification.
    pub fn set_legal(&mut self, reset_states: Vec<u32>, legal: Vec<bool>) -> Result<(), StgError> {
        if legal.len() != self.state_count() {
            return Err(StgError::TableSize {
                expected: self.state_count(),
                actual: legal.len(),
            });
        }
        self.check_states(&reset_states)?;
        self.reset_states = reset_states;
        self.legal = Some(legal);
        self.classification = None;
        Ok(())
    }

    /// Forward closure from `reset_states`, installed as the legal set.
    pub fn set_reset(&mut self, reset_states: Vec<u32>) -> Result<(), StgError> {
        let legal = compute_legal_set(self, &reset_states)?;
        self.set_legal(reset_states, legal)
    }

    /// True when no legal state has an illegal successor.
    pub fn legal_is_closed(&self) -> bool {
        let Some(legal) = &self.legal else {
            return false;
        };
        (0..self.state_count() as u32)
            .filter(|&s| legal[s as usize])
            .all(|s| self.successors(s).iter().all(|&t| legal[t as usize]))
    }

    /// Classifies every state and stores the result.
    pub fn classify(&mut self) -> Result<&Classification, StgError> {
        let c = classify_states(self)?;
        self.classification = Some(c);
        Ok(self.classification.as_ref().expect("just set"))
    }

    pub fn classification(&self) -> Option<&Classification> {
        self.classification.as_ref()
    }

    pub fn class(&self, state: u32) -> Option<StateClass> {
        self.classification
            .as_ref()
            .map(|c| c.classes[state as usize])
    }

    pub fn recovery(&self, state: u32) -> Option<RecoveryDepth> {
        self.classification
            .as_ref()
            .and_then(|c| c.depth[state as usize])
    }

    fn check_states(&self, states: &[u32]) -> Result<(), StgError> {
        match states.iter().find(|&&s| (s as usize) >= self.state_count()) {
            Some(&s) => Err(StgError::StateOutOfRange {
                state: s as u64,
                n: self.n,
            }),
            None => Ok(()),
        }
    }
}

/// Lane pattern of row bit `b` within a 64-row block.
const LANE_PATTERNS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

fn row_bit_word(base: usize, bit: usize) -> u64 {
    if bit < 6 {
        LANE_PATTERNS[bit]
    } else if (base >> bit) & 1 == 1 {
        !0
    } else {
        0
    }
}

/// Evaluates the candidate's next-state cone on every `(state, input)` pair.
pub fn enumerate_stg(candidate: &FsmCandidate, caps: StgCaps) -> Result<Stg, StgError> {
    let (n, m) = (candidate.n(), candidate.m());
    if n > caps.max_state_bits || n + m > caps.max_total_bits || n + m > 40 {
        return Err(StgError::CapacityExceeded {
            n,
            m,
            max_state_bits: caps.max_state_bits,
            max_total_bits: caps.max_total_bits,
        });
    }
    let rows = 1usize << (n + m);
    let mut edges = vec![0u32; rows];
    edges
        .par_chunks_mut(64)
        .enumerate()
        .for_each(|(chunk, out)| {
            let base = chunk * 64;
            let state_words: Vec<u64> = (0..n).map(|k| row_bit_word(base, m + k)).collect();
            let control_words: Vec<u64> = (0..m).map(|k| row_bit_word(base, k)).collect();
            let next = candidate.step_words(&state_words, &control_words);
            for (lane, slot) in out.iter_mut().enumerate() {
                *slot = next
                    .iter()
                    .enumerate()
                    .fold(0u32, |acc, (k, &w)| acc | ((((w >> lane) & 1) as u32) << k));
            }
        });
    log::debug!("enumerated {rows} transitions (n = {n}, m = {m})");
    Stg::from_table(n, m, edges)
}

/// Smallest superset of `reset_states` closed under every transition.
pub fn compute_legal_set(stg: &Stg, reset_states: &[u32]) -> Result<Vec<bool>, StgError> {
    stg.check_states(reset_states)?;
    let mut legal = vec![false; stg.state_count()];
    let mut queue: VecDeque<u32> = VecDeque::new();
    for &s in reset_states {
        if !legal[s as usize] {
            legal[s as usize] = true;
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        for &t in stg.successors(s) {
            if !legal[t as usize] {
                legal[t as usize] = true;
                queue.push_back(t);
            }
        }
    }
    Ok(legal)
}

/// Distinct illegal successors of every illegal state (legal states get none).
fn illegal_subgraph(stg: &Stg, legal: &[bool]) -> Csr {
    Csr::from_fn(stg.state_count(), |s, buf| {
        if legal[s] {
            return;
        }
        buf.extend(
            stg.successors(s as u32)
                .iter()
                .copied()
                .filter(|&t| !legal[t as usize]),
        );
        buf.sort_unstable();
        buf.dedup();
    })
}

/// States lying on some cycle of `graph` (component size >= 2 or a self-loop).
fn cyclic_states(graph: &Csr, comp: &[u32], comp_count: usize) -> Vec<bool> {
    let mut size = vec![0u32; comp_count];
    for &c in comp {
        size[c as usize] += 1;
    }
    (0..graph.node_count())
        .map(|s| size[comp[s] as usize] >= 2 || graph.neighbors(s).contains(&(s as u32)))
        .collect()
}

fn backward_closure(reverse: &Csr, seeds: &[bool]) -> Vec<bool> {
    let mut seen = seeds.to_vec();
    let mut queue: VecDeque<u32> = (0..seeds.len() as u32)
        .filter(|&s| seeds[s as usize])
        .collect();
    while let Some(s) = queue.pop_front() {
        for &p in reverse.neighbors(s as usize) {
            if !seen[p as usize] {
                seen[p as usize] = true;
                queue.push_back(p);
            }
        }
    }
    seen
}

/// Classifies every state against the installed legal set.
///
/// Recovery is judged over all input sequences: an illegal state is
/// RECOVERABLE only if no input sequence keeps it away from the legal set.
pub fn classify_states(stg: &Stg) -> Result<Classification, StgError> {
    let legal = stg.legal().ok_or(StgError::LegalSetMissing)?;
    let states = stg.state_count();
    let sub = illegal_subgraph(stg, legal);
    let reverse = sub.reversed();
    let (comp, comp_count) = strongly_connected(&sub);
    let cyclic = cyclic_states(&sub, &comp, comp_count);
    let reaches_cycle = backward_closure(&reverse, &cyclic);

    // shortest distance to the legal set through illegal states
    let mut min_depth = vec![u32::MAX; states];
    let mut queue: VecDeque<u32> = VecDeque::new();
    for s in 0..states as u32 {
        if !legal[s as usize] && stg.successors(s).iter().any(|&t| legal[t as usize]) {
            min_depth[s as usize] = 1;
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        let d = min_depth[s as usize];
        for &p in reverse.neighbors(s as usize) {
            if min_depth[p as usize] == u32::MAX {
                min_depth[p as usize] = d + 1;
                queue.push_back(p);
            }
        }
    }

    let mut classes = vec![StateClass::Legal; states];
    let mut depth: Vec<Option<RecoveryDepth>> = vec![None; states];
    let mut recoverable: Vec<u32> = Vec::new();
    for s in 0..states {
        if legal[s] {
            continue;
        }
        let reaches_legal = min_depth[s] != u32::MAX;
        let stuck = stg.successors(s as u32).iter().all(|&t| t as usize == s);
        classes[s] = if stuck {
            StateClass::Deadlock
        } else if reaches_cycle[s] {
            if reaches_legal {
                StateClass::Conditional
            } else {
                StateClass::Irrecoverable
            }
        } else {
            recoverable.push(s as u32);
            StateClass::Recoverable
        };
        if reaches_legal {
            depth[s] = Some(RecoveryDepth {
                min: min_depth[s],
                max: None,
            });
        }
    }

    // longest path over the acyclic part; Tarjan numbers sinks first
    recoverable.sort_by_key(|&s| comp[s as usize]);
    let mut max_depth = vec![0u32; states];
    for &s in &recoverable {
        let longest = sub
            .neighbors(s as usize)
            .iter()
            .map(|&t| max_depth[t as usize])
            .max()
            .unwrap_or(0);
        max_depth[s as usize] = longest + 1;
        if let Some(d) = depth[s as usize].as_mut() {
            d.max = Some(longest + 1);
        }
    }

    Ok(Classification { classes, depth })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    /// No member can reach the legal set.
    Trap,
    /// Members can still reach the legal set under some inputs.
    RecoverableAdjacent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IllegalLoop {
    /// Simple cycle, starting at the lowest state of its component.
    pub states: Vec<u32>,
    pub kind: LoopKind,
}

/// One simple cycle per cyclic component of the illegal subgraph, ordered by
/// lowest member.
pub fn report_illegal_loops(stg: &Stg) -> Result<Vec<IllegalLoop>, StgError> {
    let legal = stg.legal().ok_or(StgError::LegalSetMissing)?;
    let sub = illegal_subgraph(stg, legal);
    let (comp, comp_count) = strongly_connected(&sub);
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); comp_count];
    for s in 0..stg.state_count() {
        if !legal[s] {
            members[comp[s] as usize].push(s as u32);
        }
    }
    let computed;
    let classes = match stg.classification() {
        Some(c) => &c.classes,
        None => {
            computed = classify_states(stg)?;
            &computed.classes
        }
    };

    let mut loops = Vec::new();
    for group in members.iter().filter(|g| !g.is_empty()) {
        let start = group[0];
        let cycle = if group.len() == 1 {
            if !sub.neighbors(start as usize).contains(&start) {
                continue;
            }
            vec![start]
        } else {
            shortest_cycle(&sub, &comp, start)
        };
        let recoverable = group
            .iter()
            .any(|&s| classes[s as usize] == StateClass::Conditional);
        loops.push(IllegalLoop {
            states: cycle,
            kind: if recoverable {
                LoopKind::RecoverableAdjacent
            } else {
                LoopKind::Trap
            },
        });
    }
    loops.sort_by_key(|l| l.states[0]);
    Ok(loops)
}

/// Shortest cycle of length >= 2 through `start` inside its component.
fn shortest_cycle(sub: &Csr, comp: &[u32], start: u32) -> Vec<u32> {
    let c = comp[start as usize];
    let mut parent: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in sub.neighbors(u as usize) {
            if v == u || comp[v as usize] != c {
                continue;
            }
            if v == start {
                let mut path = vec![u];
                let mut cur = u;
                while cur != start {
                    cur = parent[&cur];
                    path.push(cur);
                }
                path.reverse();
                return path;
            }
            if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(v) {
                e.insert(u);
                queue.push_back(v);
            }
        }
    }
    unreachable!("component of size >= 2 always has a cycle through each member")
}
