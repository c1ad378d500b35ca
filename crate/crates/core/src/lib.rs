// SPDX-License-Identifier: Apache-2.0

//! Finite-state-machine safety analysis for gate-level netlists under single
//! event upsets.
//!
//! The pipeline reads a `.bench` netlist, groups flip-flops into candidate
//! state registers, enumerates each candidate's state transition graph,
//! classifies illegal states by how (and whether) they return to normal
//! operation, injects register bit-flips, and answers reachability queries
//! with replayable witnesses. Abstract machines can be re-encoded (binary,
//! Gray, one-hot, distance-3 with a corrector) and synthesized back into
//! netlists for re-analysis.

pub mod bench;
pub mod bits;
pub mod emit;
pub mod encoding;
pub mod extract;
pub mod fixtures;
pub mod graph;
pub mod netlist;
pub mod pipeline;
pub mod reach;
pub mod report;
pub mod seu;
pub mod stg;

pub use bench::parse_bench;
pub use bits::BitVector;
pub use emit::{emit_bench, emit_vectors, synthesize_netlist, StimulusFile, SynthOptions};
pub use encoding::{
    extract_abstract, gen_encoding, make_corrector, min_distance, reencode, AbstractFsm,
    EncodingTable, Scheme, UnusedPolicy,
};
pub use extract::{
    build_register_graph, candidate_groups, cluster_registers, extract_candidate, FsmCandidate,
};
pub use netlist::{validate, Diagnostic, Netlist, NetlistBuilder, NetlistError};
pub use pipeline::{analyze_group, classified_stg, Analysis, AnalysisOptions};
pub use reach::{check_reachable, replay, ReachQuery, Verdict, WitnessTrace};
pub use report::{to_dot, to_graphml, to_json, AnalysisBundle, GraphView};
pub use seu::{inject_all, output_corruption, SeuReport};
pub use stg::{
    classify_states, compute_legal_set, enumerate_stg, report_illegal_loops, StateClass, Stg,
    StgCaps, StgError,
};
