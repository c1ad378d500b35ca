// SPDX-License-Identifier: Apache-2.0

//! One-call analysis of a register group: graph, classification, loops and
//! upsets.

use thiserror::Error;

use crate::extract::{extract_candidate, ExtractError, FsmCandidate};
use crate::netlist::Netlist;
use crate::seu::{inject_all, SeuError, SeuReport, DEFAULT_EVENT_CAP};
use crate::stg::{enumerate_stg, report_illegal_loops, IllegalLoop, Stg, StgCaps, StgError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Stg(#[from] StgError),
    #[error(transparent)]
    Seu(#[from] SeuError),
}

impl PipelineError {
    pub fn is_capacity(&self) -> bool {
        matches!(
            self,
            PipelineError::Stg(StgError::CapacityExceeded { .. })
                | PipelineError::Seu(SeuError::CapacityExceeded { .. })
                | PipelineError::Seu(SeuError::ExposureTooLarge { .. })
        )
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub caps: StgCaps,
    /// Reset states; `None` means the candidate's power-up value.
    pub reset: Option<Vec<u32>>,
    /// Explicit legal set replacing the forward closure.
    pub legal: Option<Vec<u32>>,
    pub seu_k: usize,
    pub event_cap: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            caps: StgCaps::default(),
            reset: None,
            legal: None,
            seu_k: 1,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub candidate: FsmCandidate,
    pub stg: Stg,
    pub loops: Vec<IllegalLoop>,
    pub seu: SeuReport,
}

/// Enumerates, installs the legal set and classifies.
pub fn classified_stg(
    candidate: &FsmCandidate,
    options: &AnalysisOptions,
) -> Result<Stg, StgError> {
    let mut stg = enumerate_stg(candidate, options.caps)?;
    let reset = options
        .reset
        .clone()
        .unwrap_or_else(|| vec![candidate.init_state as u32]);
    match &options.legal {
        Some(states) => {
            let mut legal = vec![false; stg.state_count()];
            for &s in states {
                if s as usize >= legal.len() {
                    return Err(StgError::StateOutOfRange {
                        state: s as u64,
                        n: stg.n(),
                    });
                }
                legal[s as usize] = true;
            }
            stg.set_legal(reset, legal)?;
            if !stg.legal_is_closed() {
                log::warn!("explicit legal set is not closed under transitions");
            }
        }
        None => stg.set_reset(reset)?,
    }
    stg.classify()?;
    Ok(stg)
}

pub fn analyze_group(
    netlist: &Netlist,
    group: &[usize],
    options: &AnalysisOptions,
) -> Result<Analysis, PipelineError> {
    let candidate = extract_candidate(netlist, group)?;
    let stg = classified_stg(&candidate, options)?;
    let loops = report_illegal_loops(&stg)?;
    let seu = inject_all(&stg, options.seu_k, options.event_cap)?;
    Ok(Analysis {
        candidate,
        stg,
        loops,
        seu,
    })
}
