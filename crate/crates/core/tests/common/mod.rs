// SPDX-License-Identifier: Apache-2.0

//! Brute-force reference models shared by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;

use seufsm::bits::BitVector;
use seufsm::extract::FsmCandidate;
use seufsm::fixtures::{self, CounterVariant};
use seufsm::netlist::{GateKind, Netlist};
use seufsm::stg::{StateClass, Stg, StgCaps};
use seufsm::{build_register_graph, candidate_groups, classified_stg, extract_candidate};

/// Gate-by-gate recursive evaluation by net name (no topological order).
pub fn reference_eval(
    netlist: &Netlist,
    ff_state: &BitVector,
    inputs: &BitVector,
) -> (Vec<bool>, Vec<bool>) {
    let mut memo: HashMap<usize, bool> = HashMap::new();
    for (i, &pi) in netlist.primary_inputs().iter().enumerate() {
        memo.insert(pi, inputs.get(i));
    }
    for (i, ff) in netlist.flip_flops().iter().enumerate() {
        memo.insert(ff.output, ff_state.get(i));
    }
    let driver_gate: HashMap<usize, usize> = netlist
        .gates()
        .iter()
        .enumerate()
        .map(|(i, g)| (g.output, i))
        .collect();

    fn value(
        net: usize,
        netlist: &Netlist,
        driver_gate: &HashMap<usize, usize>,
        memo: &mut HashMap<usize, bool>,
    ) -> bool {
        if let Some(&v) = memo.get(&net) {
            return v;
        }
        let gate = &netlist.gates()[driver_gate[&net]];
        let ins: Vec<bool> = gate
            .inputs
            .iter()
            .map(|&i| value(i, netlist, driver_gate, memo))
            .collect();
        let xor = ins.iter().fold(false, |a, &b| a ^ b);
        let v = match gate.kind {
            GateKind::And => ins.iter().all(|&b| b),
            GateKind::Nand => !ins.iter().all(|&b| b),
            GateKind::Or => ins.iter().any(|&b| b),
            GateKind::Nor => !ins.iter().any(|&b| b),
            GateKind::Xor => xor,
            GateKind::Xnor => !xor,
            GateKind::Not => !ins[0],
            GateKind::Buff => ins[0],
        };
        memo.insert(net, v);
        v
    }

    let next = netlist
        .flip_flops()
        .iter()
        .enumerate()
        .map(|(i, ff)| {
            let en = ff
                .enable
                .is_none_or(|e| value(e, netlist, &driver_gate, &mut memo));
            if en {
                value(ff.data, netlist, &driver_gate, &mut memo)
            } else {
                ff_state.get(i)
            }
        })
        .collect();
    let outs = netlist
        .primary_outputs()
        .iter()
        .map(|&o| value(o, netlist, &driver_gate, &mut memo))
        .collect();
    (next, outs)
}

/// Classification by path enumeration over layered state sets.
///
/// `avoid[k]` = illegal states with an illegal-only path of `k` transitions.
/// A path of `2^n` transitions inside the illegal set must repeat a state, so
/// `avoid[2^n]` is exactly the set of states with an infinite avoiding path.
pub struct OracleClass {
    pub classes: Vec<StateClass>,
    pub min_depth: Vec<Option<u32>>,
    pub max_depth: Vec<Option<u32>>,
}

pub fn oracle_classify(stg: &Stg) -> OracleClass {
    let legal = stg.legal().expect("legal set");
    let states = stg.state_count();
    let horizon = states;

    let mut avoid: Vec<Vec<bool>> = vec![legal.iter().map(|&l| !l).collect()];
    for k in 1..=horizon {
        let prev = &avoid[k - 1];
        let layer = (0..states)
            .map(|s| !legal[s] && stg.successors(s as u32).iter().any(|&t| prev[t as usize]))
            .collect();
        avoid.push(layer);
    }

    // reach[k] = can enter the legal set within k transitions
    let mut reach: Vec<bool> = legal.to_vec();
    let mut min_depth = vec![None; states];
    for k in 1..=horizon as u32 {
        let next: Vec<bool> = (0..states)
            .map(|s| {
                reach[s]
                    || stg
                        .successors(s as u32)
                        .iter()
                        .any(|&t| legal[t as usize] || reach[t as usize])
            })
            .collect();
        for s in 0..states {
            if !legal[s] && next[s] && min_depth[s].is_none() {
                min_depth[s] = Some(k);
            }
        }
        reach = next;
    }

    let mut classes = Vec::with_capacity(states);
    let mut max_depth = vec![None; states];
    for s in 0..states {
        if legal[s] {
            classes.push(StateClass::Legal);
            continue;
        }
        let stuck = stg.successors(s as u32).iter().all(|&t| t as usize == s);
        let infinite = avoid[horizon][s];
        let can_recover = min_depth[s].is_some();
        let class = if stuck {
            StateClass::Deadlock
        } else if infinite && can_recover {
            StateClass::Conditional
        } else if infinite {
            StateClass::Irrecoverable
        } else {
            let longest = (0..=horizon).filter(|&k| avoid[k][s]).max().unwrap();
            max_depth[s] = Some(longest as u32 + 1);
            StateClass::Recoverable
        };
        classes.push(class);
    }
    OracleClass {
        classes,
        min_depth,
        max_depth,
    }
}

/// For one source and budget: per target state, the fewest steps (and, at
/// that length, fewest upsets) needed, or `None`. Layers are exact-length
/// state sets; iteration stops at `bound` or when a layer repeats.
pub fn oracle_reach_all(
    stg: &Stg,
    source: u32,
    budget: usize,
    bound: usize,
) -> Vec<Option<(usize, usize)>> {
    let states = stg.state_count();
    let n = stg.n();
    let mut best: Vec<Option<(usize, usize)>> = vec![None; states];
    // layer[u * states + s]: s reachable in exactly k steps with exactly u upsets
    let mut layer = vec![false; (budget + 1) * states];
    layer[source as usize] = true;
    let mut seen_layers: std::collections::HashSet<Vec<bool>> = std::collections::HashSet::new();
    for k in 0..=bound {
        for u in 0..=budget {
            for s in 0..states {
                if layer[u * states + s] && best[s].is_none() {
                    best[s] = Some((k, u));
                }
            }
        }
        if k == bound || !seen_layers.insert(layer.clone()) {
            break;
        }
        let mut next = vec![false; (budget + 1) * states];
        for u in 0..=budget {
            for s in 0..states {
                if !layer[u * states + s] {
                    continue;
                }
                for &t in stg.successors(s as u32) {
                    next[u * states + t as usize] = true;
                    if u < budget {
                        for b in 0..n {
                            next[(u + 1) * states + (t ^ (1 << b)) as usize] = true;
                        }
                    }
                }
            }
        }
        layer = next;
    }
    best
}

/// A named fixture graph with its candidate (when built from a netlist).
pub struct FixtureGraph {
    pub name: String,
    pub candidate: FsmCandidate,
    pub stg: Stg,
}

fn from_netlist(name: &str, netlist: &Netlist) -> FixtureGraph {
    let graph = build_register_graph(netlist);
    let group = candidate_groups(&graph, 0.5)
        .into_iter()
        .next()
        .expect("fixture has a feedback group");
    let candidate = extract_candidate(netlist, &group).expect("extract");
    let stg = classified_stg(&candidate, &Default::default()).expect("classify");
    FixtureGraph {
        name: name.to_string(),
        candidate,
        stg,
    }
}

/// Every netlist fixture whose first candidate has at most `max_n` state bits.
pub fn small_fixtures(max_n: usize) -> Vec<FixtureGraph> {
    let mut out = vec![
        from_netlist("toggle", &fixtures::toggle()),
        from_netlist("ring3", &fixtures::ring3()),
        from_netlist("s298", &fixtures::s298()),
    ];
    for v in CounterVariant::ALL {
        out.push(from_netlist(v.name(), &counter_netlist(v)));
    }
    out.retain(|f| f.stg.n() <= max_n);
    out
}

pub fn counter_netlist(variant: CounterVariant) -> Netlist {
    fixtures::counter10(variant).netlist
}

pub fn s298_counter() -> FixtureGraph {
    from_netlist("s298", &fixtures::s298())
}

pub fn default_caps() -> StgCaps {
    StgCaps::default()
}
