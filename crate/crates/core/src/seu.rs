// SPDX-License-Identifier: Apache-2.0

//! Register upset injection and output exposure.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::extract::{FsmCandidate, SinkValue};
use crate::stg::{RecoveryDepth, StateClass, Stg};

pub const DEFAULT_EVENT_CAP: u64 = 10_000_000;
/// Largest `(state, input, output-only input)` space scanned for exposure.
pub const DEFAULT_EXPOSURE_BITS: usize = 22;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeuError {
    #[error("{events} upset events exceed the cap of {cap}")]
    CapacityExceeded { events: u64, cap: u64 },
    #[error("upset multiplicity {k} is outside 1..={n}")]
    BadMultiplicity { k: usize, n: usize },
    #[error("state graph is not classified")]
    NotClassified,
    #[error("output exposure scan needs {bits} bits, cap is {cap}")]
    ExposureTooLarge { bits: usize, cap: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeuEvent {
    pub origin: u32,
    pub flipped_bits: Vec<u32>,
    pub corrupted: u32,
}

impl SeuEvent {
    pub fn mask(&self) -> u32 {
        self.origin ^ self.corrupted
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeuOutcome {
    pub event: SeuEvent,
    pub landing_class: StateClass,
    /// Landed on a different legal state.
    pub legal_jump: bool,
    pub recovery: Option<RecoveryDepth>,
    /// Every input leads to the same next state as the undisturbed origin.
    pub corrected: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SeuCounts {
    pub events: usize,
    pub legal_jump: usize,
    pub recoverable: usize,
    pub conditional: usize,
    pub irrecoverable: usize,
    pub deadlock: usize,
    pub corrected: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeuReport {
    pub k: usize,
    pub outcomes: Vec<SeuOutcome>,
    pub counts: SeuCounts,
    pub worst_recovery_depth: Option<u32>,
    pub illegal_to_legal_ratio: f64,
}

impl SeuReport {
    fn fraction(&self, count: usize) -> f64 {
        if self.counts.events == 0 {
            0.0
        } else {
            count as f64 / self.counts.events as f64
        }
    }

    pub fn legal_jump_fraction(&self) -> f64 {
        self.fraction(self.counts.legal_jump)
    }

    /// Share of events landing IRRECOVERABLE or DEADLOCK.
    pub fn trap_fraction(&self) -> f64 {
        self.fraction(self.counts.irrecoverable + self.counts.deadlock)
    }

    pub fn corrected_fraction(&self) -> f64 {
        self.fraction(self.counts.corrected)
    }
}

/// `(2^n - |legal|) / |legal|`.
pub fn illegal_to_legal_ratio(stg: &Stg) -> f64 {
    let legal = stg.legal_count();
    if legal == 0 {
        return f64::INFINITY;
    }
    (stg.state_count() - legal) as f64 / legal as f64
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// All `n`-bit masks with `k` set bits, ascending.
pub fn masks_of_weight(n: usize, k: usize) -> Vec<u32> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let limit = 1u64 << n;
    let mut v: u64 = (1 << k) - 1;
    while v < limit {
        out.push(v as u32);
        // next integer with the same popcount
        let t = v | (v - 1);
        v = (t + 1) | (((!t & (t + 1)) - 1) >> (v.trailing_zeros() + 1));
    }
    out
}

/// Applies every `k`-bit upset to every legal state.
pub fn inject_all(stg: &Stg, k: usize, cap: u64) -> Result<SeuReport, SeuError> {
    let n = stg.n();
    if k == 0 || k > n {
        return Err(SeuError::BadMultiplicity { k, n });
    }
    let classification = stg.classification().ok_or(SeuError::NotClassified)?;
    let legal = stg.legal_states();
    let events = legal.len() as u64 * binomial(n, k);
    if events > cap {
        return Err(SeuError::CapacityExceeded { events, cap });
    }
    if k > 2 {
        log::warn!("injecting {k}-bit upsets: {events} events");
    }
    let masks = masks_of_weight(n, k);
    let outcomes: Vec<SeuOutcome> = legal
        .par_iter()
        .flat_map_iter(|&origin| {
            masks.iter().map(move |&mask| {
                let corrupted = origin ^ mask;
                let landing_class = classification.classes[corrupted as usize];
                let corrected = stg.successors(origin) == stg.successors(corrupted);
                SeuOutcome {
                    event: SeuEvent {
                        origin,
                        flipped_bits: (0..32).filter(|b| (mask >> b) & 1 == 1).collect(),
                        corrupted,
                    },
                    landing_class,
                    legal_jump: landing_class.is_legal(),
                    recovery: classification.depth[corrupted as usize],
                    corrected,
                }
            })
        })
        .collect();

    let mut counts = SeuCounts {
        events: outcomes.len(),
        ..SeuCounts::default()
    };
    let mut worst = None;
    for o in &outcomes {
        match o.landing_class {
            StateClass::Legal => counts.legal_jump += 1,
            StateClass::Recoverable => {
                counts.recoverable += 1;
                worst = worst.max(o.recovery.and_then(|d| d.max));
            }
            StateClass::Conditional => counts.conditional += 1,
            StateClass::Irrecoverable => counts.irrecoverable += 1,
            StateClass::Deadlock => counts.deadlock += 1,
        }
        counts.corrected += o.corrected as usize;
    }
    Ok(SeuReport {
        k,
        outcomes,
        counts,
        worst_recovery_depth: worst,
        illegal_to_legal_ratio: illegal_to_legal_ratio(stg),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Exposure {
    /// Output matches something the legal machine can produce.
    Masked,
    /// Every output register keeps its previous value.
    Held,
    /// Output never produced by any legal `(state, input)` pair.
    Exposed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateExposure {
    pub state: u32,
    pub verdict: Exposure,
    pub exposed: usize,
    pub held: usize,
    pub masked: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputCorruptionReport {
    pub states: Vec<StateExposure>,
    pub exposed_states: usize,
    pub held_states: usize,
    pub masked_states: usize,
}

/// Evaluates the output cone on every illegal state against the set of
/// output vectors the legal machine can produce.
///
/// Output-only sources (foreign registers read only by the output cone) are
/// enumerated as free inputs.
pub fn output_corruption(
    candidate: &FsmCandidate,
    stg: &Stg,
) -> Result<OutputCorruptionReport, SeuError> {
    let legal = stg.legal().ok_or(SeuError::NotClassified)?;
    let n = stg.n();
    let m = candidate.m();
    let extra = candidate.output_only_inputs.len();
    let bits = n + m + extra;
    if bits > DEFAULT_EXPOSURE_BITS {
        return Err(SeuError::ExposureTooLarge {
            bits,
            cap: DEFAULT_EXPOSURE_BITS,
        });
    }
    let points = 1u64 << (m + extra);
    let eval = |s: u32, p: u64| candidate.outputs(s as u64, p & ((1 << m) - 1), p >> m);

    let legal_states: Vec<u32> = (0..stg.state_count() as u32)
        .filter(|&s| legal[s as usize])
        .collect();
    let allowed: HashSet<Vec<SinkValue>> = legal_states
        .par_iter()
        .flat_map_iter(|&s| (0..points).map(move |p| eval(s, p)))
        .collect();

    let states: Vec<StateExposure> = (0..stg.state_count() as u32)
        .into_par_iter()
        .filter(|&s| !legal[s as usize])
        .map(|s| {
            let (mut exposed, mut held, mut masked) = (0, 0, 0);
            for p in 0..points {
                let out = eval(s, p);
                if !out.is_empty() && out.iter().all(|v| *v == SinkValue::Held) {
                    held += 1;
                } else if allowed.contains(&out) {
                    masked += 1;
                } else {
                    exposed += 1;
                }
            }
            let verdict = if exposed > 0 {
                Exposure::Exposed
            } else if held > 0 {
                Exposure::Held
            } else {
                Exposure::Masked
            };
            StateExposure {
                state: s,
                verdict,
                exposed,
                held,
                masked,
            }
        })
        .collect();
    let count = |e: Exposure| states.iter().filter(|s| s.verdict == e).count();
    Ok(OutputCorruptionReport {
        exposed_states: count(Exposure::Exposed),
        held_states: count(Exposure::Held),
        masked_states: count(Exposure::Masked),
        states,
    })
}
