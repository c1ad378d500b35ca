// SPDX-License-Identifier: Apache-2.0

//! Bounded reachability with upset budgets, witness traces and replay.

use serde::Serialize;
use thiserror::Error;

use crate::extract::FsmCandidate;
use crate::graph::Csr;
use crate::stg::Stg;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReachError {
    #[error("{what} state set is empty")]
    EmptySet { what: &'static str },
    #[error("state {state:#x} does not fit in {n} bits")]
    StateOutOfRange { state: u64, n: usize },
    #[error(
        "trace diverges at step {step}: recorded state {recorded:#x}, simulated {simulated:#x}"
    )]
    TraceMismatch {
        step: usize,
        recorded: u32,
        simulated: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachQuery {
    pub targets: Vec<u32>,
    /// Empty means the graph's reset states.
    pub sources: Vec<u32>,
    /// `None` means `2^n * (budget + 1)`.
    pub max_cycles: Option<u64>,
    pub budget: u32,
}

impl ReachQuery {
    pub fn new(targets: Vec<u32>) -> Self {
        Self {
            targets,
            sources: Vec::new(),
            max_cycles: None,
            budget: 0,
        }
    }

    pub fn sources(mut self, sources: Vec<u32>) -> Self {
        self.sources = sources;
        self
    }

    pub fn budget(mut self, budget: u32) -> Self {
        self.budget = budget;
        self
    }

    pub fn max_cycles(mut self, cycles: u64) -> Self {
        self.max_cycles = Some(cycles);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WitnessStep {
    pub state_before: u32,
    pub input: u32,
    /// Bit flipped after this step's transition.
    pub seu_flip: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessTrace {
    pub start: u32,
    pub steps: Vec<WitnessStep>,
    pub final_state: u32,
}

impl WitnessTrace {
    pub fn upsets(&self) -> usize {
        self.steps.iter().filter(|s| s.seu_flip.is_some()).count()
    }

    /// Post-transition state of every step (after any flip).
    pub fn states_after(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self.steps.iter().skip(1).map(|s| s.state_before).collect();
        if !self.steps.is_empty() {
            out.push(self.final_state);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Unreachable,
    Reachable(WitnessTrace),
}

impl Verdict {
    pub fn is_reachable(&self) -> bool {
        matches!(self, Verdict::Reachable(_))
    }

    pub fn witness(&self) -> Option<&WitnessTrace> {
        match self {
            Verdict::Reachable(w) => Some(w),
            Verdict::Unreachable => None,
        }
    }
}

fn state_mask(stg: &Stg, states: &[u32], what: &'static str) -> Result<Vec<bool>, ReachError> {
    if states.is_empty() {
        return Err(ReachError::EmptySet { what });
    }
    let mut mask = vec![false; stg.state_count()];
    for &s in states {
        if s as usize >= mask.len() {
            return Err(ReachError::StateOutOfRange {
                state: s as u64,
                n: stg.n(),
            });
        }
        mask[s as usize] = true;
    }
    Ok(mask)
}

fn resolve_sources(stg: &Stg, query: &ReachQuery) -> Vec<u32> {
    let mut sources = if query.sources.is_empty() {
        stg.reset_states().to_vec()
    } else {
        query.sources.clone()
    };
    sources.sort_unstable();
    sources.dedup();
    sources
}

fn default_bound(stg: &Stg, budget: u32) -> u64 {
    (stg.state_count() as u64).saturating_mul(budget as u64 + 1)
}

/// Back pointer of a search node; `choice` is the flipped bit plus one,
/// zero for no flip.
#[derive(Clone, Copy)]
struct Link {
    from: usize,
    input: u32,
    choice: u8,
}

impl Link {
    const NONE: Link = Link {
        from: usize::MAX,
        input: 0,
        choice: 0,
    };
}

/// Shortest witness from any source to any target, or a definitive
/// UNREACHABLE within the cycle bound.
///
/// Ties: fewest steps, then fewest upsets, then the lexicographically
/// smallest sequence of per-step choices, where a choice orders by input
/// vector and then by flip (no flip first, then bit 0 upward).
pub fn check_reachable(stg: &Stg, query: &ReachQuery) -> Result<Verdict, ReachError> {
    let targets = state_mask(stg, &query.targets, "target")?;
    let sources = resolve_sources(stg, query);
    state_mask(stg, &sources, "source")?;
    let n = stg.n();
    let b = query.budget as usize;
    let layers = b + 1;
    let bound = query
        .max_cycles
        .unwrap_or_else(|| default_bound(stg, query.budget));

    if let Some(&s) = sources.iter().find(|&&s| targets[s as usize]) {
        return Ok(Verdict::Reachable(WitnessTrace {
            start: s,
            steps: Vec::new(),
            final_state: s,
        }));
    }

    let node = |s: u32, used: usize| s as usize * layers + used;
    let total = stg.state_count() * layers;
    let mut seen = vec![false; total];
    let mut parent = vec![Link::NONE; total];
    let mut frontier: Vec<(u32, usize)> = Vec::new();
    for &s in &sources {
        seen[node(s, 0)] = true;
        frontier.push((s, 0));
    }

    let mut depth = 0u64;
    while !frontier.is_empty() && depth < bound {
        depth += 1;
        let mut next: Vec<(u32, usize)> = Vec::new();
        for &(s, used) in &frontier {
            let from = node(s, used);
            for (input, &t) in stg.successors(s).iter().enumerate() {
                let flips = if used < b { n } else { 0 };
                for choice in 0..=flips {
                    let (dest, u) = if choice == 0 {
                        (t, used)
                    } else {
                        (t ^ (1 << (choice - 1)), used + 1)
                    };
                    let id = node(dest, u);
                    if seen[id] {
                        continue;
                    }
                    seen[id] = true;
                    parent[id] = Link {
                        from,
                        input: input as u32,
                        choice: choice as u8,
                    };
                    next.push((dest, u));
                }
            }
        }
        let hit = next
            .iter()
            .enumerate()
            .filter(|(_, &(s, _))| targets[s as usize])
            .min_by_key(|(pos, &(_, used))| (used, *pos))
            .map(|(_, &v)| v);
        if let Some((s, used)) = hit {
            return Ok(Verdict::Reachable(rebuild(&parent, node(s, used), layers)));
        }
        frontier = next;
    }
    Ok(Verdict::Unreachable)
}

fn rebuild(parent: &[Link], mut id: usize, layers: usize) -> WitnessTrace {
    let final_state = (id / layers) as u32;
    let mut steps = Vec::new();
    while parent[id].from != usize::MAX {
        let link = parent[id];
        steps.push(WitnessStep {
            state_before: (link.from / layers) as u32,
            input: link.input,
            seu_flip: (link.choice as u32).checked_sub(1),
        });
        id = link.from;
    }
    steps.reverse();
    WitnessTrace {
        start: steps.first().map_or(final_state, |s| s.state_before),
        steps,
        final_state,
    }
}

/// Same verdict as [`check_reachable`], found by searching backwards from
/// the targets over the reversed transition relation.
pub fn reachable_backward(stg: &Stg, query: &ReachQuery) -> Result<bool, ReachError> {
    let targets = state_mask(stg, &query.targets, "target")?;
    let sources = resolve_sources(stg, query);
    let source_mask = state_mask(stg, &sources, "source")?;
    let n = stg.n();
    let b = query.budget as usize;
    let layers = b + 1;
    let bound = query
        .max_cycles
        .unwrap_or_else(|| default_bound(stg, query.budget));

    let forward = Csr::from_fn(stg.state_count(), |s, buf| {
        buf.extend_from_slice(stg.successors(s as u32));
        buf.sort_unstable();
        buf.dedup();
    });
    let reverse = forward.reversed();

    // dist over (state, upsets used so far on the forward path)
    let node = |s: usize, used: usize| s * layers + used;
    let mut seen = vec![false; stg.state_count() * layers];
    let mut frontier: Vec<(usize, usize)> = Vec::new();
    for t in (0..stg.state_count()).filter(|&t| targets[t]) {
        for used in 0..layers {
            seen[node(t, used)] = true;
            frontier.push((t, used));
        }
    }
    let mut depth = 0u64;
    loop {
        if frontier
            .iter()
            .any(|&(s, used)| used == 0 && source_mask[s])
        {
            return Ok(true);
        }
        if frontier.is_empty() || depth >= bound {
            return Ok(false);
        }
        depth += 1;
        let mut next = Vec::new();
        for &(t, used) in &frontier {
            // plain transition into t
            for &p in reverse.neighbors(t) {
                let id = node(p as usize, used);
                if !seen[id] {
                    seen[id] = true;
                    next.push((p as usize, used));
                }
            }
            // transition into t ^ e_j followed by a flip of bit j
            if used > 0 {
                for j in 0..n {
                    for &p in reverse.neighbors(t ^ (1 << j)) {
                        let id = node(p as usize, used - 1);
                        if !seen[id] {
                            seen[id] = true;
                            next.push((p as usize, used - 1));
                        }
                    }
                }
            }
        }
        frontier = next;
    }
}

fn replay_with(
    trace: &WitnessTrace,
    start: u32,
    mut step: impl FnMut(u32, u32) -> u32,
) -> Result<u32, ReachError> {
    let mut state = start;
    for (k, s) in trace.steps.iter().enumerate() {
        if s.state_before != state {
            return Err(ReachError::TraceMismatch {
                step: k,
                recorded: s.state_before,
                simulated: state,
            });
        }
        state = step(state, s.input);
        if let Some(bit) = s.seu_flip {
            state ^= 1 << bit;
        }
    }
    if state != trace.final_state {
        return Err(ReachError::TraceMismatch {
            step: trace.steps.len(),
            recorded: trace.final_state,
            simulated: state,
        });
    }
    Ok(state)
}

/// Re-simulates a trace through the candidate's cones.
pub fn replay(
    candidate: &FsmCandidate,
    trace: &WitnessTrace,
    start: u32,
) -> Result<u32, ReachError> {
    replay_with(trace, start, |s, i| {
        candidate.step(s as u64, i as u64) as u32
    })
}

/// Re-simulates a trace over an enumerated transition table.
pub fn replay_stg(stg: &Stg, trace: &WitnessTrace, start: u32) -> Result<u32, ReachError> {
    replay_with(trace, start, |s, i| stg.successor(s, i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counter() -> Stg {
        let edges = (0..32u32)
            .map(|r| {
                let (s, i) = (r >> 1, r & 1);
                if s >= 10 {
                    0
                } else {
                    (s + i) % 10
                }
            })
            .collect();
        let mut stg = Stg::from_table(4, 1, edges).unwrap();
        stg.set_reset(vec![0]).unwrap();
        stg
    }

    #[test]
    fn illegal_state_needs_an_upset() {
        let stg = counter();
        let q = ReachQuery::new(vec![15]).sources(vec![0]);
        assert_eq!(check_reachable(&stg, &q).unwrap(), Verdict::Unreachable);
        assert!(!reachable_backward(&stg, &q).unwrap());

        let q = q.budget(1);
        let w = check_reachable(&stg, &q)
            .unwrap()
            .witness()
            .unwrap()
            .clone();
        assert_eq!(w.steps.len(), 7);
        assert!(w.steps.iter().all(|s| s.input == 1));
        assert_eq!(w.steps[6].state_before, 6);
        assert_eq!(w.steps[6].seu_flip, Some(3));
        assert_eq!(w.final_state, 15);
        assert_eq!(replay_stg(&stg, &w, 0), Ok(15));
        assert!(reachable_backward(&stg, &q).unwrap());
    }

    #[test]
    fn empty_witness_and_tampering() {
        let stg = counter();
        let w = check_reachable(&stg, &ReachQuery::new(vec![0, 3]))
            .unwrap()
            .witness()
            .unwrap()
            .clone();
        assert!(w.steps.is_empty());
        assert_eq!(replay_stg(&stg, &w, 0), Ok(0));

        let q = ReachQuery::new(vec![3]);
        let mut w = check_reachable(&stg, &q)
            .unwrap()
            .witness()
            .unwrap()
            .clone();
        assert_eq!(w.steps.len(), 3);
        w.steps[1].input = 0;
        assert!(matches!(
            replay_stg(&stg, &w, 0),
            Err(ReachError::TraceMismatch { step: 2, .. })
        ));
    }

    #[test]
    fn cycle_bound() {
        let stg = counter();
        let q = ReachQuery::new(vec![5]).max_cycles(4);
        assert_eq!(check_reachable(&stg, &q).unwrap(), Verdict::Unreachable);
        assert!(!reachable_backward(&stg, &q).unwrap());
        let q = q.max_cycles(5);
        assert!(check_reachable(&stg, &q).unwrap().is_reachable());
        assert!(reachable_backward(&stg, &q).unwrap());
    }

    #[test]
    fn bad_queries() {
        let stg = counter();
        assert!(check_reachable(&stg, &ReachQuery::new(vec![])).is_err());
        assert!(check_reachable(&stg, &ReachQuery::new(vec![16])).is_err());
    }
}
