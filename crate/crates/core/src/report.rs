// SPDX-License-Identifier: Apache-2.0

//! DOT, GraphML and JSON renderings of analysis results.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::bits::format_bits;
use crate::extract::FsmCandidate;
use crate::seu::{SeuCounts, SeuReport};
use crate::stg::{ClassCounts, IllegalLoop, Stg};

pub const LEGAL_COLOR: &str = "blue";
pub const ILLEGAL_COLOR: &str = "red";
/// Largest state width drawn in full without `full_graph`.
pub const FULL_GRAPH_MAX_BITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("state graph has no legal set")]
    LegalSetMissing,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GraphView {
    /// Draw every state even above the size threshold.
    pub full_graph: bool,
}

struct Drawn {
    nodes: Vec<u32>,
    /// `(from, to, label)` in node order, then target order.
    edges: Vec<(u32, u32, String)>,
}

fn edge_label(inputs: &[u32], all: usize) -> String {
    if inputs.len() == all {
        "*".to_string()
    } else {
        inputs
            .iter()
            .map(|i| format!("{i:x}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn drawn(stg: &Stg, view: GraphView) -> Result<Drawn, ReportError> {
    let legal = stg.legal().ok_or(ReportError::LegalSetMissing)?;
    let n = stg.n();
    let include: Vec<bool> = if view.full_graph || n <= FULL_GRAPH_MAX_BITS {
        vec![true; stg.state_count()]
    } else {
        // legal states plus the single-flip frontier
        let mut inc = legal.to_vec();
        for s in (0..stg.state_count()).filter(|&s| legal[s]) {
            for k in 0..n {
                inc[s ^ (1 << k)] = true;
            }
        }
        inc
    };
    let nodes: Vec<u32> = (0..stg.state_count() as u32)
        .filter(|&s| include[s as usize])
        .collect();
    let mut edges = Vec::new();
    for &s in &nodes {
        let mut by_target: Vec<(u32, u32)> = stg
            .successors(s)
            .iter()
            .enumerate()
            .map(|(i, &t)| (t, i as u32))
            .filter(|(t, _)| include[*t as usize])
            .collect();
        by_target.sort_unstable();
        let mut k = 0;
        while k < by_target.len() {
            let t = by_target[k].0;
            let inputs: Vec<u32> = by_target[k..]
                .iter()
                .take_while(|(tt, _)| *tt == t)
                .map(|(_, i)| *i)
                .collect();
            k += inputs.len();
            edges.push((s, t, edge_label(&inputs, stg.input_count())));
        }
    }
    Ok(Drawn { nodes, edges })
}

fn color(stg: &Stg, s: u32) -> &'static str {
    if stg.is_legal(s) {
        LEGAL_COLOR
    } else {
        ILLEGAL_COLOR
    }
}

fn class_name(stg: &Stg, s: u32) -> &'static str {
    match stg.class(s) {
        Some(c) => c.name(),
        None if stg.is_legal(s) => "LEGAL",
        None => "ILLEGAL",
    }
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn dot_escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: legal states blue, illegal red, edges labeled with
/// the input vectors (hex) that take them, `*` for all inputs.
pub fn to_dot(stg: &Stg, name: &str, view: GraphView) -> Result<String, ReportError> {
    let d = drawn(stg, view)?;
    let n = stg.n();
    let mut out = String::new();
    writeln!(out, "digraph \"{}\" {{", dot_escape(name)).unwrap();
    writeln!(out, "  node [shape=circle, style=filled, fontcolor=white];").unwrap();
    for &s in &d.nodes {
        let c = color(stg, s);
        writeln!(
            out,
            "  s{s} [label=\"{}\\n{s}\", fillcolor=\"{c}\", color=\"{c}\", tooltip=\"{}\"];",
            format_bits(s as u64, n),
            class_name(stg, s)
        )
        .unwrap();
    }
    for (s, t, label) in &d.edges {
        writeln!(out, "  s{s} -> s{t} [label=\"{label}\"];").unwrap();
    }
    out.push_str("}\n");
    Ok(out)
}

/// GraphML rendering with the same nodes, colors and labels as [`to_dot`].
pub fn to_graphml(stg: &Stg, name: &str, view: GraphView) -> Result<String, ReportError> {
    let d = drawn(stg, view)?;
    let n = stg.n();
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    for (id, target, ty) in [
        ("label", "node", "string"),
        ("value", "node", "int"),
        ("color", "node", "string"),
        ("class", "node", "string"),
        ("inputs", "edge", "string"),
    ] {
        writeln!(
            out,
            "  <key id=\"{id}\" for=\"{target}\" attr.name=\"{id}\" attr.type=\"{ty}\"/>"
        )
        .unwrap();
    }
    writeln!(
        out,
        "  <graph id=\"{}\" edgedefault=\"directed\">",
        xml_escape(name)
    )
    .unwrap();
    for &s in &d.nodes {
        writeln!(
            out,
            "    <node id=\"s{s}\"><data key=\"label\">{}</data><data key=\"value\">{s}</data>\
             <data key=\"color\">{}</data><data key=\"class\">{}</data></node>",
            format_bits(s as u64, n),
            color(stg, s),
            class_name(stg, s)
        )
        .unwrap();
    }
    for (k, (s, t, label)) in d.edges.iter().enumerate() {
        writeln!(
            out,
            "    <edge id=\"e{k}\" source=\"s{s}\" target=\"s{t}\"><data key=\"inputs\">{label}</data></edge>"
        )
        .unwrap();
    }
    out.push_str("  </graph>\n</graphml>\n");
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateSummary {
    pub n: usize,
    pub m: usize,
    pub state_nets: Vec<String>,
    pub control_nets: Vec<String>,
}

impl CandidateSummary {
    pub fn of(candidate: &FsmCandidate) -> Self {
        Self {
            n: candidate.n(),
            m: candidate.m(),
            state_nets: candidate.state_names.clone(),
            control_nets: candidate.control_names.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisJson {
    pub candidate: CandidateSummary,
    pub counts: ClassCounts,
    pub seu: Option<SeuCounts>,
    pub loops: Vec<IllegalLoop>,
    pub worst_recovery_depth: Option<u32>,
}

/// Inputs for [`to_json`].
pub struct AnalysisBundle<'a> {
    pub candidate: &'a FsmCandidate,
    pub stg: &'a Stg,
    pub seu: Option<&'a SeuReport>,
    pub loops: &'a [IllegalLoop],
}

impl AnalysisBundle<'_> {
    pub fn summary(&self) -> AnalysisJson {
        let classification = self.stg.classification();
        AnalysisJson {
            candidate: CandidateSummary::of(self.candidate),
            counts: classification.map(|c| c.counts()).unwrap_or_default(),
            seu: self.seu.map(|r| r.counts),
            loops: self.loops.to_vec(),
            worst_recovery_depth: classification.and_then(|c| c.worst_recovery_depth()),
        }
    }
}

/// Pretty-printed JSON report with a trailing newline.
pub fn to_json(bundle: &AnalysisBundle<'_>) -> String {
    let mut text = serde_json::to_string_pretty(&bundle.summary()).expect("plain data serializes");
    text.push('\n');
    text
}
