// SPDX-License-Identifier: Apache-2.0

//! Reference circuits: the s298 controller and re-encoded decade counters.

use crate::bench::parse_bench;
use crate::emit::{synthesize_netlist, SynthOptions};
use crate::encoding::{
    counter_fsm, gen_encoding, make_corrector, reencode, AbstractFsm, Corrector, EncodedTables,
    EncodingTable, Scheme, UnusedPolicy,
};
use crate::netlist::Netlist;

/// ISCAS-89 s298 traffic light controller (with the `.bench` header).
pub const S298_BENCH: &str = include_str!("../fixtures/s298.bench");

/// Single toggle flip-flop.
pub const TOGGLE_BENCH: &str = "# toggle\nOUTPUT(q)\nq = DFF(nq)\nnq = NOT(q)\n";

/// Three-stage one-hot ring (power-up 001).
pub const RING3_BENCH: &str = "\
# ring3
OUTPUT(r0)
OUTPUT(r1)
OUTPUT(r2)
#@ init r0 1
r0 = DFF(r2)
r1 = DFF(r0)
r2 = DFF(r1)
";

pub fn s298() -> Netlist {
    parse_bench(S298_BENCH).expect("s298 fixture parses")
}

pub fn toggle() -> Netlist {
    parse_bench(TOGGLE_BENCH).expect("toggle fixture parses")
}

pub fn ring3() -> Netlist {
    parse_bench(RING3_BENCH).expect("ring fixture parses")
}

/// Counter variants used throughout the tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterVariant {
    /// Binary, unused words go to 0.
    BinaryDefault,
    /// Gray, unused words go to 0, outputs registered and held on unused words.
    GrayHeld,
    /// One-hot decoded by OR, no recovery logic.
    OneHotUnprotected,
    /// Distance-3 code with a corrector ahead of the next-state logic.
    HammingCorrected,
}

impl CounterVariant {
    pub const ALL: [CounterVariant; 4] = [
        CounterVariant::BinaryDefault,
        CounterVariant::GrayHeld,
        CounterVariant::OneHotUnprotected,
        CounterVariant::HammingCorrected,
    ];

    pub fn scheme(self) -> Scheme {
        match self {
            CounterVariant::BinaryDefault => Scheme::Binary,
            CounterVariant::GrayHeld => Scheme::Gray,
            CounterVariant::OneHotUnprotected => Scheme::OneHot,
            CounterVariant::HammingCorrected => Scheme::Hamming(3),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CounterVariant::BinaryDefault => "count10_binary",
            CounterVariant::GrayHeld => "count10_gray",
            CounterVariant::OneHotUnprotected => "count10_onehot",
            CounterVariant::HammingCorrected => "count10_hamming3",
        }
    }
}

/// An abstract machine together with its encoding and synthesized netlist.
#[derive(Debug, Clone)]
pub struct EncodedFixture {
    pub fsm: AbstractFsm,
    pub table: EncodingTable,
    pub corrector: Option<Corrector>,
    pub tables: EncodedTables,
    pub netlist: Netlist,
}

/// Builds an encoded fixture for any machine and scheme.
pub fn encode_fixture(
    fsm: &AbstractFsm,
    scheme: Scheme,
    name: &str,
    held_outputs: bool,
) -> EncodedFixture {
    let table = gen_encoding(scheme, fsm.num_states).expect("fixture encoding");
    let corrector = match scheme {
        Scheme::Hamming(_) => Some(make_corrector(&table, fsm.default_id).expect("distance 3")),
        _ => None,
    };
    let policy = match scheme {
        Scheme::OneHot => UnusedPolicy::OneHotOr,
        _ => UnusedPolicy::DefaultState,
    };
    let tables = reencode(fsm, &table, corrector.as_ref(), policy).expect("fixture re-encoding");
    let options = SynthOptions {
        output_enable_words: held_outputs.then(|| table.codewords.clone()),
    };
    let netlist = synthesize_netlist(&tables, name, &options).expect("fixture synthesis");
    EncodedFixture {
        fsm: fsm.clone(),
        table,
        corrector,
        tables,
        netlist,
    }
}

/// Decade counter (count-enable input, 4-bit count output) in one of the
/// reference encodings.
pub fn counter10(variant: CounterVariant) -> EncodedFixture {
    encode_fixture(
        &counter_fsm(10),
        variant.scheme(),
        variant.name(),
        variant == CounterVariant::GrayHeld,
    )
}
