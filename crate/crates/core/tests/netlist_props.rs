// SPDX-License-Identifier: Apache-2.0

mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seufsm::extract::DEFAULT_THETA;
use seufsm::fixtures::{self, CounterVariant};
use seufsm::graph::{strongly_connected, Csr};
use seufsm::netlist::Driver;
use seufsm::{
    build_register_graph, cluster_registers, emit_bench, enumerate_stg, extract_candidate,
    parse_bench, validate, BitVector, FsmCandidate, Netlist, StgCaps, StgError,
};

const KINDS: [&str; 8] = ["AND", "NAND", "OR", "NOR", "XOR", "XNOR", "NOT", "BUFF"];

/// Random well-formed sequential netlist; gate lines in random order.
fn random_bench(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pis = rng.gen_range(1..=3);
    let ffs = rng.gen_range(1..=5);
    let gates = rng.gen_range(ffs..=ffs + 10);
    let mut nets: Vec<String> = (0..pis).map(|i| format!("i{i}")).collect();
    nets.extend((0..ffs).map(|f| format!("q{f}")));
    let mut lines = Vec::new();
    for g in 0..gates {
        let kind = KINDS[rng.gen_range(0..KINDS.len())];
        let arity = if matches!(kind, "NOT" | "BUFF") {
            1
        } else {
            rng.gen_range(2..=3)
        };
        let ins: Vec<&str> = (0..arity)
            .map(|_| nets[rng.gen_range(0..nets.len())].as_str())
            .collect();
        lines.push(format!("g{g} = {kind}({})", ins.join(", ")));
        nets.push(format!("g{g}"));
    }
    lines.shuffle(&mut rng);
    let gate_nets = &nets[pis + ffs..];
    let mut text = String::new();
    for i in 0..pis {
        text.push_str(&format!("INPUT(i{i})\n"));
    }
    text.push_str(&format!(
        "OUTPUT({})\n",
        gate_nets[rng.gen_range(0..gate_nets.len())]
    ));
    // each flip-flop takes its own gate so every gate is observed
    for (f, data) in gate_nets.iter().take(ffs).enumerate() {
        if rng.gen_bool(0.3) {
            let en = &nets[rng.gen_range(0..nets.len())];
            text.push_str(&format!("q{f} = DFFE({data}, {en})\n"));
        } else {
            text.push_str(&format!("q{f} = DFF({data})\n"));
        }
        if rng.gen_bool(0.3) {
            text.push_str(&format!("#@ init q{f} 1\n"));
        }
    }
    for line in lines {
        text.push_str(&line);
        text.push('\n');
    }
    text
}

fn eval(netlist: &Netlist, state: u64, inputs: u64) -> (Vec<bool>, Vec<bool>) {
    let s = BitVector::from_u64(state, netlist.flip_flops().len());
    let i = BitVector::from_u64(inputs, netlist.primary_inputs().len());
    let (next, outs) = netlist.evaluate_cycle(&s, &i).unwrap();
    (next.as_slice().to_vec(), outs.as_slice().to_vec())
}

/// Every gate as `(output name, kind, input names)`, sorted.
fn connectivity(netlist: &Netlist) -> Vec<(String, String, Vec<String>)> {
    let mut out: Vec<_> = netlist
        .gates()
        .iter()
        .map(|g| {
            (
                netlist.net_name(g.output).to_string(),
                g.kind.name().to_string(),
                g.inputs
                    .iter()
                    .map(|&i| netlist.net_name(i).to_string())
                    .collect(),
            )
        })
        .collect();
    out.sort();
    out
}

/// Candidate control value for a whole-circuit state and input assignment.
fn control_value(
    netlist: &Netlist,
    candidate: &FsmCandidate,
    ff: &BitVector,
    pi: &BitVector,
) -> u64 {
    candidate
        .control_inputs
        .iter()
        .enumerate()
        .map(|(k, &net)| {
            let bit = match netlist.driver(net) {
                Some(Driver::Input(i)) => pi.get(i),
                Some(Driver::FlipFlop(f)) => ff.get(f),
                other => panic!("control net driven by {other:?}"),
            };
            (bit as u64) << k
        })
        .sum()
}

fn projection_samples(netlist: &Netlist, group: &[usize], seed: u64, samples: usize) {
    let candidate = extract_candidate(netlist, group).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ffs = netlist.flip_flops().len();
    let pis = netlist.primary_inputs().len();
    for _ in 0..samples {
        let ff = BitVector::from_u64(rng.gen::<u64>() & mask(ffs), ffs);
        let pi = BitVector::from_u64(rng.gen::<u64>() & mask(pis), pis);
        let (next, _) = netlist.evaluate_cycle(&ff, &pi).unwrap();
        let state: u64 = group
            .iter()
            .enumerate()
            .map(|(k, &f)| (ff.get(f) as u64) << k)
            .sum();
        let expected: u64 = group
            .iter()
            .enumerate()
            .map(|(k, &f)| (next.get(f) as u64) << k)
            .sum();
        let control = control_value(netlist, &candidate, &ff, &pi);
        assert_eq!(candidate.step(state, control), expected);
    }
}

fn mask(width: usize) -> u64 {
    if width >= 64 {
        !0
    } else {
        (1 << width) - 1
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn evaluation_is_deterministic(seed in any::<u64>(), state in any::<u64>(), inputs in any::<u64>()) {
        let netlist = parse_bench(&random_bench(seed)).unwrap();
        let state = state & mask(netlist.flip_flops().len());
        let inputs = inputs & mask(netlist.primary_inputs().len());
        prop_assert_eq!(eval(&netlist, state, inputs), eval(&netlist, state, inputs));
    }

    #[test]
    fn evaluation_matches_reference(seed in any::<u64>(), state in any::<u64>(), inputs in any::<u64>()) {
        let netlist = parse_bench(&random_bench(seed)).unwrap();
        let ffs = netlist.flip_flops().len();
        let pis = netlist.primary_inputs().len();
        let s = BitVector::from_u64(state & mask(ffs), ffs);
        let i = BitVector::from_u64(inputs & mask(pis), pis);
        let (next, outs) = netlist.evaluate_cycle(&s, &i).unwrap();
        let (ref_next, ref_outs) = common::reference_eval(&netlist, &s, &i);
        prop_assert_eq!(next.as_slice(), &ref_next[..]);
        prop_assert_eq!(outs.as_slice(), &ref_outs[..]);
    }

    #[test]
    fn gate_order_is_irrelevant(seed in any::<u64>(), reorder in any::<u64>()) {
        let text = random_bench(seed);
        let (header, gates): (Vec<&str>, Vec<&str>) = text.lines().partition(|l| !l.starts_with('g'));
        let mut gates = gates;
        gates.shuffle(&mut ChaCha8Rng::seed_from_u64(reorder));
        let shuffled = format!("{}\n{}\n", header.join("\n"), gates.join("\n"));
        let a = parse_bench(&text).unwrap();
        let b = parse_bench(&shuffled).unwrap();
        for state in 0..1u64 << a.flip_flops().len() {
            for inputs in 0..1u64 << a.primary_inputs().len() {
                prop_assert_eq!(eval(&a, state, inputs), eval(&b, state, inputs));
            }
        }
    }

    #[test]
    fn emit_parse_round_trip(seed in any::<u64>()) {
        let netlist = parse_bench(&random_bench(seed)).unwrap();
        let text = emit_bench(&netlist).unwrap();
        let again = parse_bench(&text).unwrap();
        prop_assert_eq!(emit_bench(&again).unwrap(), text);
        prop_assert_eq!(connectivity(&netlist), connectivity(&again));
        prop_assert_eq!(netlist.initial_state(), again.initial_state());
        for state in 0..1u64 << netlist.flip_flops().len() {
            for inputs in 0..1u64 << netlist.primary_inputs().len() {
                prop_assert_eq!(eval(&netlist, state, inputs), eval(&again, state, inputs));
            }
        }
    }

    #[test]
    fn clusters_partition_registers(seed in any::<u64>(), theta in 0.0f64..1.5) {
        let netlist = parse_bench(&random_bench(seed)).unwrap();
        let graph = build_register_graph(&netlist);
        let groups = cluster_registers(&graph, theta);
        let mut all: Vec<usize> = groups.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..netlist.flip_flops().len()).collect::<Vec<_>>());

        // mutually dependent registers always share a group
        let n = graph.node_count();
        let g = &graph;
        let csr = Csr::from_edges(n, (0..n).flat_map(|a| (0..n).filter(move |&b| g.feeds(a, b)).map(move |b| (a as u32, b as u32))));
        let (comp, _) = strongly_connected(&csr);
        let group_of = |f: usize| groups.iter().position(|g| g.contains(&f)).unwrap();
        for a in 0..n {
            for b in 0..n {
                if comp[a] == comp[b] {
                    prop_assert_eq!(group_of(a), group_of(b));
                }
            }
        }
    }

    #[test]
    fn projection_sound_on_random_netlists(seed in any::<u64>()) {
        let netlist = parse_bench(&random_bench(seed)).unwrap();
        let graph = build_register_graph(&netlist);
        for group in cluster_registers(&graph, DEFAULT_THETA) {
            projection_samples(&netlist, &group, seed, 16);
        }
    }
}

#[test]
fn random_netlists_validate() {
    for seed in 0..64 {
        let netlist = parse_bench(&random_bench(seed)).unwrap();
        assert!(validate(&netlist).is_empty(), "seed {seed}");
    }
}

#[test]
fn projection_sound_on_fixtures() {
    let mut netlists = vec![fixtures::s298(), fixtures::toggle(), fixtures::ring3()];
    netlists.extend(
        CounterVariant::ALL
            .iter()
            .map(|&v| common::counter_netlist(v)),
    );
    for (k, netlist) in netlists.iter().enumerate() {
        let graph = build_register_graph(netlist);
        for group in cluster_registers(&graph, DEFAULT_THETA) {
            projection_samples(netlist, &group, k as u64, 1000);
        }
    }
}

#[test]
fn s298_shape() {
    let netlist = fixtures::s298();
    assert_eq!(netlist.primary_inputs().len(), 3);
    assert_eq!(netlist.primary_outputs().len(), 6);
    assert_eq!(netlist.flip_flops().len(), 14);
    let text = emit_bench(&netlist).unwrap();
    let again = parse_bench(&text).unwrap();
    assert_eq!(again.primary_inputs().len(), 3);
    assert_eq!(again.primary_outputs().len(), 6);
    assert_eq!(again.flip_flops().len(), 14);
    assert_eq!(again.gates().len(), netlist.gates().len());
    assert_eq!(connectivity(&netlist), connectivity(&again));
}

#[test]
fn whole_s298_control_is_primary_inputs() {
    let netlist = fixtures::s298();
    let all: Vec<usize> = (0..netlist.flip_flops().len()).collect();
    let candidate = extract_candidate(&netlist, &all).unwrap();
    assert_eq!(candidate.n(), 14);
    assert_eq!(candidate.control_names, ["fast_req", "blink_req", "pause"]);
}

#[test]
fn toggle_candidate() {
    let netlist = fixtures::toggle();
    assert_eq!(netlist.gates().len(), 1);
    let graph = build_register_graph(&netlist);
    let groups = cluster_registers(&graph, DEFAULT_THETA);
    assert_eq!(groups, vec![vec![0]]);
    let candidate = extract_candidate(&netlist, &groups[0]).unwrap();
    assert_eq!((candidate.n(), candidate.m()), (1, 0));
    let stg = enumerate_stg(&candidate, StgCaps::default()).unwrap();
    assert_eq!(stg.edges(), &[1, 0]);
}

#[test]
fn ring_is_one_group() {
    let netlist = fixtures::ring3();
    let graph = build_register_graph(&netlist);
    assert_eq!(
        cluster_registers(&graph, DEFAULT_THETA),
        vec![vec![0, 1, 2]]
    );
}

#[test]
fn wide_candidate_exceeds_caps() {
    let mut text = String::from("INPUT(a)\n");
    for k in 0..29 {
        text.push_str(&format!(
            "r{k} = DFF(x{k})\nx{k} = XOR(r{}, a)\n",
            (k + 1) % 29
        ));
    }
    let netlist = parse_bench(&text).unwrap();
    let all: Vec<usize> = (0..29).collect();
    let candidate = extract_candidate(&netlist, &all).unwrap();
    assert_eq!(candidate.n() + candidate.m(), 30);
    assert!(matches!(
        enumerate_stg(&candidate, StgCaps::default()),
        Err(StgError::CapacityExceeded { n: 29, m: 1, .. })
    ));
}
