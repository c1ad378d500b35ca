// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use serde::Serialize;

use seufsm::bits::format_bits;
use seufsm::encoding::{min_distance, Corrector};
use seufsm::extract::{group_from_names, OutputSink};
use seufsm::seu::{output_corruption, SeuError, SeuReport};
use seufsm::stg::{IllegalLoop, LoopKind};
use seufsm::{
    build_register_graph, candidate_groups, check_reachable, classified_stg, emit_bench,
    emit_vectors, extract_abstract, extract_candidate, gen_encoding, inject_all, make_corrector,
    parse_bench, report_illegal_loops, synthesize_netlist, to_dot, to_graphml, to_json,
    AnalysisBundle, AnalysisOptions, BitVector, EncodingTable, FsmCandidate, GraphView, Netlist,
    ReachQuery, StateClass, Stg, StgCaps, SynthOptions, UnusedPolicy, Verdict,
};

use crate::error::CliError;
use crate::output::{read_text, write_atomic};
use crate::{
    AnalyzeArgs, CommonArgs, ExportArgs, Format, GraphArgs, ReachArgs, ReencodeArgs, SeuArgs,
    StgArgs,
};

/// Status for a run that found trap states under `--fail-on-trap`.
const EXIT_TRAP: u8 = 1;

struct Loaded {
    netlist: Netlist,
    stem: String,
}

fn load(common: &CommonArgs) -> Result<Loaded, CliError> {
    if !common.theta.is_finite() || common.theta < 0.0 {
        return Err(CliError::Usage(format!(
            "--theta must be a non-negative number, got {}",
            common.theta
        )));
    }
    let text = read_text(&common.input)?;
    let netlist = parse_bench(&text).map_err(|source| CliError::Parse {
        path: common.input.clone(),
        source,
    })?;
    let stem = common
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "netlist".to_string());
    Ok(Loaded { netlist, stem })
}

/// Candidate groups with their indices, after `--group-file`/`--candidate`.
fn groups(loaded: &Loaded, common: &CommonArgs) -> Result<Vec<(usize, Vec<usize>)>, CliError> {
    let netlist = &loaded.netlist;
    let all: Vec<Vec<usize>> = match &common.group_file {
        Some(path) => {
            let text = read_text(path)?;
            let names: Vec<&str> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect();
            vec![group_from_names(netlist, &names)?]
        }
        None => candidate_groups(&build_register_graph(netlist), common.theta),
    };
    if all.is_empty() {
        return Err(CliError::Invalid(
            "no register group with feedback found".to_string(),
        ));
    }
    match common.candidate {
        Some(k) if k >= all.len() => Err(CliError::Usage(format!(
            "--candidate {k} out of range ({} candidates)",
            all.len()
        ))),
        Some(k) => Ok(vec![(k, all[k].clone())]),
        None => Ok(all.into_iter().enumerate().collect()),
    }
}

fn first_group(loaded: &Loaded, common: &CommonArgs) -> Result<(usize, FsmCandidate), CliError> {
    let (idx, group) = groups(loaded, common)?.remove(0);
    Ok((idx, extract_candidate(&loaded.netlist, &group)?))
}

fn parse_state(text: &str, n: usize, flag: &str) -> Result<u32, CliError> {
    BitVector::parse_with_width(text, n)
        .map(|b| b.to_u64() as u32)
        .map_err(|e| CliError::Invalid(format!("{flag} {text:?}: {e}")))
}

fn options(
    graph: &GraphArgs,
    candidate: &FsmCandidate,
    seu_k: usize,
) -> Result<AnalysisOptions, CliError> {
    let n = candidate.n();
    let reset = if graph.reset.is_empty() {
        None
    } else {
        Some(
            graph
                .reset
                .iter()
                .map(|r| parse_state(r, n, "--reset"))
                .collect::<Result<_, _>>()?,
        )
    };
    let legal = match &graph.legal_file {
        Some(path) => {
            let text = read_text(path)?;
            let states = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| parse_state(l, n, "legal state"))
                .collect::<Result<Vec<_>, _>>()?;
            Some(states)
        }
        None => None,
    };
    Ok(AnalysisOptions {
        caps: StgCaps {
            max_state_bits: graph.max_state_bits,
            max_total_bits: graph.max_total_bits,
        },
        reset,
        legal,
        seu_k,
        ..AnalysisOptions::default()
    })
}

fn artifact(stem: &str, idx: usize, ext: &str) -> PathBuf {
    PathBuf::from(format!("{stem}.c{idx}.{ext}"))
}

fn names(list: &[String]) -> String {
    format!("[{}]", list.join(" "))
}

fn print_candidate(idx: usize, c: &FsmCandidate) {
    println!(
        "candidate {idx}: state {} control {}",
        names(&c.state_names),
        names(&c.control_names)
    );
}

fn print_classes(stg: &Stg) {
    let classification = stg.classification().expect("classified");
    let c = classification.counts();
    println!(
        "  states {}: LEGAL {}, RECOVERABLE {}, CONDITIONAL {}, IRRECOVERABLE {}, DEADLOCK {}",
        stg.state_count(),
        c.legal,
        c.recoverable,
        c.conditional,
        c.irrecoverable,
        c.deadlock
    );
    for class in [StateClass::Irrecoverable, StateClass::Deadlock] {
        let states: Vec<u32> = (0..stg.state_count() as u32)
            .filter(|&s| classification.classes[s as usize] == class)
            .collect();
        if states.is_empty() {
            continue;
        }
        let shown: Vec<String> = states
            .iter()
            .take(8)
            .map(|&s| format_bits(s as u64, stg.n()))
            .collect();
        let more = if states.len() > 8 { " ..." } else { "" };
        println!("  {} states: {}{more}", class.name(), shown.join(" "));
    }
    match classification.worst_recovery_depth() {
        Some(d) => println!("  worst recovery depth: {d}"),
        None => println!("  worst recovery depth: -"),
    }
}

fn print_loops(stg: &Stg, loops: &[IllegalLoop]) {
    let traps = loops.iter().filter(|l| l.kind == LoopKind::Trap).count();
    println!("  illegal loops: {} ({traps} trap)", loops.len());
    if let Some(l) = loops.iter().find(|l| l.states.len() > 1).or(loops.first()) {
        let path: Vec<String> = l
            .states
            .iter()
            .map(|&s| format_bits(s as u64, stg.n()))
            .collect();
        println!("    e.g. {} -> {}", path.join(" -> "), path[0]);
    }
}

fn print_seu(report: &SeuReport) {
    let c = &report.counts;
    println!(
        "  upsets k={}: {} events, legal jump {}, RECOVERABLE {}, CONDITIONAL {}, IRRECOVERABLE {}, DEADLOCK {}, corrected {}",
        report.k, c.events, c.legal_jump, c.recoverable, c.conditional, c.irrecoverable, c.deadlock, c.corrected
    );
    println!(
        "  illegal:legal ratio {:.3}, trap fraction {:.3}",
        report.illegal_to_legal_ratio,
        report.trap_fraction()
    );
}

fn print_exposure(candidate: &FsmCandidate, stg: &Stg) -> Result<(), CliError> {
    match output_corruption(candidate, stg) {
        Ok(r) => println!(
            "  output exposure: EXPOSED {}, HELD {}, MASKED {}",
            r.exposed_states, r.held_states, r.masked_states
        ),
        Err(SeuError::ExposureTooLarge { bits, .. }) => {
            println!("  output exposure: skipped ({bits} bits)")
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn has_traps(stg: &Stg) -> bool {
    let c = stg.classification().expect("classified").counts();
    c.irrecoverable + c.deadlock > 0
}

fn write_graphs(
    out_dir: &Path,
    stem: &str,
    idx: usize,
    stg: &Stg,
    full_graph: bool,
    format: Format,
) -> Result<Vec<PathBuf>, CliError> {
    let view = GraphView { full_graph };
    let name = format!("{stem}_c{idx}");
    let mut written = Vec::new();
    if matches!(format, Format::Dot | Format::All) {
        written.push(write_atomic(
            out_dir,
            &artifact(stem, idx, "dot"),
            &to_dot(stg, &name, view)?,
        )?);
    }
    if matches!(format, Format::Graphml | Format::All) {
        written.push(write_atomic(
            out_dir,
            &artifact(stem, idx, "graphml"),
            &to_graphml(stg, &name, view)?,
        )?);
    }
    Ok(written)
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("  wrote {}", p.display());
    }
}

fn header(loaded: &Loaded, candidates: usize) {
    let n = &loaded.netlist;
    println!(
        "{}: {} flip-flops, {} inputs, {} outputs, {} gates; {candidates} candidate(s)",
        loaded.stem,
        n.flip_flops().len(),
        n.primary_inputs().len(),
        n.primary_outputs().len(),
        n.gates().len()
    );
}

pub fn analyze(args: &AnalyzeArgs) -> Result<u8, CliError> {
    let loaded = load(&args.common)?;
    let groups = groups(&loaded, &args.common)?;
    let explicit = args.common.candidate.is_some() || args.common.group_file.is_some();
    header(&loaded, groups.len());
    let mut analyzed = 0;
    let mut skipped: Option<CliError> = None;
    let mut traps = false;
    for (idx, group) in &groups {
        let candidate = extract_candidate(&loaded.netlist, group)?;
        print_candidate(*idx, &candidate);
        let result = analyze_one(args, &loaded, *idx, &candidate);
        match result {
            Ok(found_traps) => {
                analyzed += 1;
                traps |= found_traps;
            }
            Err(e @ CliError::Capacity(_)) if !explicit => {
                log::warn!("candidate {idx} skipped: {e}");
                println!("  skipped: {e}");
                skipped = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    if analyzed == 0 {
        if let Some(e) = skipped {
            return Err(e);
        }
    }
    Ok(if traps && args.fail_on_trap {
        EXIT_TRAP
    } else {
        0
    })
}

fn analyze_one(
    args: &AnalyzeArgs,
    loaded: &Loaded,
    idx: usize,
    candidate: &FsmCandidate,
) -> Result<bool, CliError> {
    let opts = options(&args.graph, candidate, args.seu_k)?;
    let stg = classified_stg(candidate, &opts)?;
    let loops = report_illegal_loops(&stg)?;
    let seu = inject_all(&stg, opts.seu_k, opts.event_cap)?;
    print_classes(&stg);
    print_loops(&stg, &loops);
    print_seu(&seu);
    print_exposure(candidate, &stg)?;

    let bundle = AnalysisBundle {
        candidate,
        stg: &stg,
        seu: Some(&seu),
        loops: &loops,
    };
    let out = &args.common.out_dir;
    let mut written = vec![write_atomic(
        out,
        &artifact(&loaded.stem, idx, "json"),
        &to_json(&bundle),
    )?];
    written.extend(write_graphs(
        out,
        &loaded.stem,
        idx,
        &stg,
        args.full_graph,
        Format::All,
    )?);
    print_written(&written);
    Ok(has_traps(&stg))
}

#[derive(Serialize)]
struct ExtractedCandidate<'a> {
    index: usize,
    flip_flops: &'a [usize],
    state_nets: &'a [String],
    control_nets: &'a [String],
    output_only_nets: Vec<&'a str>,
    output_sinks: Vec<String>,
    init_state: String,
}

pub fn extract(common: &CommonArgs) -> Result<u8, CliError> {
    let loaded = load(common)?;
    let netlist = &loaded.netlist;
    let groups = groups(&loaded, common)?;
    header(&loaded, groups.len());
    let mut listing = Vec::new();
    let candidates: Vec<(usize, FsmCandidate)> = groups
        .iter()
        .map(|(idx, g)| Ok((*idx, extract_candidate(netlist, g)?)))
        .collect::<Result<_, CliError>>()?;
    for (idx, c) in &candidates {
        print_candidate(*idx, c);
        let sinks: Vec<String> = c
            .output_sinks
            .iter()
            .map(|s| match s {
                OutputSink::Primary { .. } => format!("output {}", s.name()),
                _ => format!("register {}", s.name()),
            })
            .collect();
        println!(
            "  n={} m={} output-only sources {} sinks {}",
            c.n(),
            c.m(),
            c.output_only_inputs.len(),
            sinks.len()
        );
        listing.push(ExtractedCandidate {
            index: *idx,
            flip_flops: &c.state_ffs,
            state_nets: &c.state_names,
            control_nets: &c.control_names,
            output_only_nets: c
                .output_only_inputs
                .iter()
                .map(|&net| netlist.net_name(net))
                .collect(),
            output_sinks: sinks,
            init_state: format_bits(c.init_state, c.n()),
        });
    }
    let mut json = serde_json::to_string_pretty(&listing).expect("serializable");
    json.push('\n');
    let path = write_atomic(
        &common.out_dir,
        Path::new(&format!("{}.candidates.json", loaded.stem)),
        &json,
    )?;
    print_written(&[path]);
    Ok(0)
}

fn classified_one(
    common: &CommonArgs,
    graph: &GraphArgs,
) -> Result<(Loaded, usize, FsmCandidate, Stg), CliError> {
    let loaded = load(common)?;
    let (idx, candidate) = first_group(&loaded, common)?;
    let opts = options(graph, &candidate, 1)?;
    let stg = classified_stg(&candidate, &opts)?;
    Ok((loaded, idx, candidate, stg))
}

pub fn stg(args: &StgArgs) -> Result<u8, CliError> {
    let (loaded, idx, candidate, stg) = classified_one(&args.common, &args.graph)?;
    print_candidate(idx, &candidate);
    print_classes(&stg);
    let loops = report_illegal_loops(&stg)?;
    print_loops(&stg, &loops);
    let bundle = AnalysisBundle {
        candidate: &candidate,
        stg: &stg,
        seu: None,
        loops: &loops,
    };
    let out = &args.common.out_dir;
    let mut written = vec![write_atomic(
        out,
        &artifact(&loaded.stem, idx, "json"),
        &to_json(&bundle),
    )?];
    written.extend(write_graphs(
        out,
        &loaded.stem,
        idx,
        &stg,
        args.full_graph,
        Format::All,
    )?);
    print_written(&written);
    Ok(if args.fail_on_trap && has_traps(&stg) {
        EXIT_TRAP
    } else {
        0
    })
}

pub fn seu(args: &SeuArgs) -> Result<u8, CliError> {
    let (loaded, idx, candidate, stg) = classified_one(&args.common, &args.graph)?;
    let opts = AnalysisOptions::default();
    let report = inject_all(&stg, args.seu_k, opts.event_cap)?;
    print_candidate(idx, &candidate);
    print_seu(&report);
    print_exposure(&candidate, &stg)?;
    let mut json = serde_json::to_string_pretty(&report).expect("serializable");
    json.push('\n');
    let path = write_atomic(
        &args.common.out_dir,
        &artifact(&loaded.stem, idx, "seu.json"),
        &json,
    )?;
    print_written(&[path]);
    Ok(0)
}

pub fn reach(args: &ReachArgs) -> Result<u8, CliError> {
    let (_, idx, candidate, stg) = classified_one(&args.common, &args.graph)?;
    let n = candidate.n();
    let targets = args
        .target
        .iter()
        .map(|t| parse_state(t, n, "--target"))
        .collect::<Result<Vec<_>, _>>()?;
    let sources = args
        .source
        .iter()
        .map(|s| parse_state(s, n, "--source"))
        .collect::<Result<Vec<_>, _>>()?;
    let mut query = ReachQuery::new(targets)
        .sources(sources)
        .budget(args.budget);
    if let Some(c) = args.max_cycles {
        query = query.max_cycles(c);
    }
    print_candidate(idx, &candidate);
    match check_reachable(&stg, &query)? {
        Verdict::Unreachable => {
            println!("UNREACHABLE");
            if args.vectors.is_some() {
                log::warn!("no witness, stimulus file not written");
            }
        }
        Verdict::Reachable(trace) => {
            println!(
                "REACHABLE in {} step(s) with {} upset(s)",
                trace.steps.len(),
                trace.upsets()
            );
            println!("  start {}", format_bits(trace.start as u64, n));
            for (k, (step, after)) in trace.steps.iter().zip(trace.states_after()).enumerate() {
                let flip = step
                    .seu_flip
                    .map(|b| format!(" flip bit {b}"))
                    .unwrap_or_default();
                println!(
                    "  {k}: input {} -> {}{flip}",
                    format_bits(step.input as u64, candidate.m()),
                    format_bits(after as u64, n)
                );
            }
            if let Some(path) = &args.vectors {
                let file = emit_vectors(&trace, &candidate)?;
                let written = write_atomic(&args.common.out_dir, path, &file.to_text())?;
                print_written(&[written]);
            }
        }
    }
    Ok(0)
}

pub fn reencode(args: &ReencodeArgs) -> Result<u8, CliError> {
    let (loaded, idx, candidate, stg) = classified_one(&args.common, &args.graph)?;
    let fsm = extract_abstract(&stg, &candidate)?;
    let table = match &args.table {
        Some(path) => EncodingTable::from_text(&read_text(path)?)?,
        None => gen_encoding(args.scheme, fsm.num_states)?,
    };
    let distance = min_distance(&table);
    let corrector: Option<Corrector> = if distance >= 3 {
        Some(make_corrector(&table, fsm.default_id)?)
    } else {
        None
    };
    let tables = seufsm::reencode(&fsm, &table, corrector.as_ref(), UnusedPolicy::DefaultState)?;
    let label = table.scheme.to_string();
    let name = format!("{}_{label}", loaded.stem);
    let netlist = synthesize_netlist(&tables, &name, &SynthOptions::default())?;
    let bench = emit_bench(&netlist)?;

    print_candidate(idx, &candidate);
    println!(
        "  {} legal states, {} input bit(s), {} output bit(s)",
        fsm.num_states, fsm.input_width, fsm.output_width
    );
    println!(
        "  {label}: width {}, minimum distance {distance}, corrector {}",
        table.width,
        if corrector.is_some() { "yes" } else { "no" }
    );
    println!(
        "  synthesized {} flip-flops, {} gates",
        netlist.flip_flops().len(),
        netlist.gates().len()
    );
    let out = &args.common.out_dir;
    let written = vec![
        write_atomic(
            out,
            Path::new(&format!("{}.{label}.enc", loaded.stem)),
            &table.to_text(),
        )?,
        write_atomic(
            out,
            Path::new(&format!("{}.{label}.bench", loaded.stem)),
            &bench,
        )?,
    ];
    print_written(&written);
    Ok(0)
}

pub fn export(args: &ExportArgs) -> Result<u8, CliError> {
    let (loaded, idx, candidate, stg) = classified_one(&args.common, &args.graph)?;
    let out = &args.common.out_dir;
    let mut written = write_graphs(out, &loaded.stem, idx, &stg, args.full_graph, args.format)?;
    if matches!(args.format, Format::Json | Format::All) {
        let loops = report_illegal_loops(&stg)?;
        let bundle = AnalysisBundle {
            candidate: &candidate,
            stg: &stg,
            seu: None,
            loops: &loops,
        };
        written.push(write_atomic(
            out,
            &artifact(&loaded.stem, idx, "json"),
            &to_json(&bundle),
        )?);
    }
    print_written(&written);
    Ok(0)
}
