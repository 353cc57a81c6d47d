use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Backend, BackendConfig, BackendError, CompletionResult};
use crate::batch::{build_batch, parse_itemized, BatchError, ParsedAnswers};
use crate::clique::GroupingPlan;
use crate::data::{Prompt, Workload};
use crate::text::TokenCount;

/// Result of one group: per-member answers plus every backend call made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOutcome {
    pub member_ids: Vec<String>,
    /// One per member; empty when the item was lost and not re-issued.
    pub answers: Vec<String>,
    /// The batched (or pass-through) call first, then any fallback calls.
    pub calls: Vec<CompletionResult>,
    pub batched: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parse: Option<ParsedAnswers>,
    /// Members answered by an individual fallback call.
    pub fallback_ids: Vec<String>,
}

impl GroupOutcome {
    pub fn input_tokens(&self) -> TokenCount {
        self.calls.iter().map(|c| c.input_tokens).sum()
    }

    pub fn output_tokens(&self) -> TokenCount {
        self.calls.iter().map(|c| c.output_tokens).sum()
    }

    pub fn latency_seconds(&self) -> f64 {
        self.calls.iter().map(|c| c.latency_seconds).sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Batch(#[from] BatchError),
    #[error("batched answer is missing items {missing:?}")]
    DispatchIncomplete { missing: Vec<usize>, outcome: Box<GroupOutcome> },
    #[error("prompt id {0:?} is not in the workload")]
    UnknownPromptId(String),
}

/// Batches, completes and dispatches one group. A group of one is sent
/// unmodified. Missing items are re-issued one by one when
/// `fallback_separate` is set, otherwise reported as `DispatchIncomplete`.
pub fn run_group(backend: &dyn Backend, group: &[Prompt], fallback_separate: bool) -> Result<GroupOutcome, RunError> {
    let member_ids: Vec<String> = group.iter().map(|p| p.id.clone()).collect();
    if group.len() == 1 {
        let call = backend.complete(&group[0].text)?;
        return Ok(GroupOutcome {
            member_ids,
            answers: vec![call.text.clone()],
            calls: vec![call],
            batched: false,
            parse: None,
            fallback_ids: Vec::new(),
        });
    }
    let batch = build_batch(group)?;
    let call = backend.complete(&batch.text)?;
    let parsed = match parse_itemized(&call.text, group.len()) {
        Ok(p) => Some(p),
        Err(BatchError::NoAnchorsFound) => None,
        Err(e) => return Err(e.into()),
    };
    let answers: Vec<String> = (1..=group.len())
        .map(|k| parsed.as_ref().and_then(|p| p.get(k)).unwrap_or("").to_string())
        .collect();
    let missing: Vec<usize> = (1..=group.len())
        .filter(|&k| parsed.as_ref().and_then(|p| p.get(k)).is_none())
        .collect();
    let mut outcome = GroupOutcome {
        member_ids,
        answers,
        calls: vec![call],
        batched: true,
        parse: parsed,
        fallback_ids: Vec::new(),
    };
    if missing.is_empty() {
        return Ok(outcome);
    }
    if !fallback_separate {
        return Err(RunError::DispatchIncomplete { missing, outcome: Box::new(outcome) });
    }
    for k in missing {
        let prompt = &group[k - 1];
        let call = backend.complete(&prompt.text)?;
        outcome.answers[k - 1] = call.text.clone();
        outcome.fallback_ids.push(prompt.id.clone());
        outcome.calls.push(call);
    }
    Ok(outcome)
}

/// Runs every group of `plan`, at most `config.max_in_flight` at a time.
/// Outcomes come back in plan order; on failure the error of the earliest
/// failing group is returned.
pub fn run_plan(
    backend: &dyn Backend,
    workload: &Workload,
    plan: &GroupingPlan,
    config: &BackendConfig,
) -> Result<Vec<GroupOutcome>, RunError> {
    run_plan_outcomes(backend, workload, plan, config)?.into_iter().collect()
}

/// Like [`run_plan`], but keeps each group's own result.
pub fn run_plan_outcomes(
    backend: &dyn Backend,
    workload: &Workload,
    plan: &GroupingPlan,
    config: &BackendConfig,
) -> Result<Vec<Result<GroupOutcome, RunError>>, RunError> {
    let groups: Vec<Vec<Prompt>> = plan
        .groups
        .iter()
        .map(|g| {
            g.member_ids
                .iter()
                .map(|id| workload.get(id).cloned().ok_or_else(|| RunError::UnknownPromptId(id.clone())))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let slots: Vec<Mutex<Option<Result<GroupOutcome, RunError>>>> = groups.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.max_in_flight.max(1).min(groups.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= groups.len() {
                    break;
                }
                let r = run_group(backend, &groups[i], config.fallback_separate);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    Ok(slots.into_iter().map(|s| s.into_inner().expect("slot lock").expect("every group ran")).collect())
}
