//! Faithfulness of batched answers against unbatched ones, relative cost and
//! weighted efficiency between methods, batching gain, and fitting the
//! linear latency model to timing samples.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::CostModelParams;
use crate::clique::{CliqueMethod, GroupingPlan};
use crate::data::{Prompt, Workload};
use crate::text::{bleu_score, cosine_similarity, embed_text, rouge_l_score, tokens};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("prompt {0:?} has no ground truth")]
    NoGroundTruth(String),
    #[error("no answer for prompt {0:?}")]
    MissingAnswer(String),
    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),
    #[error("cost-model design matrix is rank deficient (rank {rank} of 3)")]
    RankDeficient { rank: usize },
    #[error("need at least 3 samples, got {0}")]
    InsufficientSamples(usize),
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Casefold, drop punctuation, drop articles, single spaces.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let spaced: String = lowered.chars().map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' }).collect();
    spaced.split_whitespace().filter(|w| !ARTICLES.contains(w)).collect::<Vec<_>>().join(" ")
}

fn contains_phrase(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return haystack.is_empty();
    }
    format!(" {haystack} ").contains(&format!(" {needle} "))
}

/// First standalone capital letter naming one of `n` options, e.g. the `B`
/// in "B", "(B) 42" or "The answer is B.".
fn selected_letter(answer: &str, n: usize) -> Option<usize> {
    tokens(answer).into_iter().find_map(|t| {
        let mut cs = t.chars();
        match (cs.next(), cs.next()) {
            (Some(c), None) if c.is_ascii_uppercase() => {
                let idx = (c as u8 - b'A') as usize;
                (idx < n).then_some(idx)
            }
            _ => None,
        }
    })
}

/// Whether `answer` is correct for `prompt`. Free text: the normalized
/// ground truth occurs as a phrase in the normalized answer. Multiple
/// choice: the selected option letter, or the option's text, matches.
pub fn accuracy_match(answer: &str, prompt: &Prompt) -> Result<bool, EvalError> {
    let gt = prompt.ground_truth.as_deref().ok_or_else(|| EvalError::NoGroundTruth(prompt.id.clone()))?;
    let norm_answer = normalize_answer(answer);
    if let (Some(choices), Some(idx)) = (&prompt.choices, prompt.ground_truth_choice()) {
        if selected_letter(answer, choices.len()) == Some(idx) {
            return Ok(true);
        }
        return Ok(contains_phrase(&norm_answer, &normalize_answer(&choices[idx])));
    }
    Ok(contains_phrase(&norm_answer, &normalize_answer(gt)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemFaithfulness {
    pub prompt_id: String,
    pub cosine: f64,
    pub bleu: f64,
    pub rouge: f64,
    pub accurate: bool,
    /// False when the prompt has no ground truth; `accurate` is then true.
    pub labeled: bool,
    pub contribution: f64,
}

/// Per-item term: `cos * (bleu + rouge) * 1[accurate]`. Unlabeled prompts
/// count as accurate.
pub fn item_faithfulness(batched_answer: &str, separate_answer: &str, prompt: &Prompt, embedding_dim: usize) -> ItemFaithfulness {
    let cosine = cosine_similarity(&embed_text(batched_answer, embedding_dim), &embed_text(separate_answer, embedding_dim))
        .expect("same embedding dimension")
        .clamp(0.0, 1.0);
    let bleu = bleu_score(batched_answer, separate_answer);
    let rouge = rouge_l_score(batched_answer, separate_answer);
    let (accurate, labeled) = match accuracy_match(batched_answer, prompt) {
        Ok(a) => (a, true),
        Err(_) => (true, false),
    };
    let contribution = if accurate { cosine * (bleu + rouge) } else { 0.0 };
    ItemFaithfulness { prompt_id: prompt.id.clone(), cosine, bleu, rouge, accurate, labeled, contribution }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessScore {
    pub per_item: Vec<ItemFaithfulness>,
    pub per_group_d: Vec<f64>,
    /// `(1/c) * sum_k d_k` over the `c` groups.
    pub overall_dh: f64,
    /// Mean contribution per prompt, in [0, 2].
    pub per_item_mean: f64,
    /// Share of labeled prompts answered accurately; `None` without labels.
    pub accuracy: Option<f64>,
    pub unlabeled_ids: Vec<String>,
}

pub fn method_faithfulness(
    plan: &GroupingPlan,
    batched_answers: &HashMap<String, String>,
    baseline_answers: &HashMap<String, String>,
    workload: &Workload,
    embedding_dim: usize,
) -> Result<FaithfulnessScore, EvalError> {
    let mut per_item = Vec::new();
    let mut per_group_d = Vec::with_capacity(plan.groups.len());
    for group in &plan.groups {
        let mut d = 0.0;
        for id in &group.member_ids {
            let prompt = workload.get(id).ok_or_else(|| EvalError::MissingAnswer(id.clone()))?;
            let a = batched_answers.get(id).ok_or_else(|| EvalError::MissingAnswer(id.clone()))?;
            let b = baseline_answers.get(id).ok_or_else(|| EvalError::MissingAnswer(id.clone()))?;
            let item = item_faithfulness(a, b, prompt, embedding_dim);
            d += item.contribution;
            per_item.push(item);
        }
        per_group_d.push(d);
    }
    let c = per_group_d.len();
    let overall_dh = if c == 0 { 0.0 } else { per_group_d.iter().sum::<f64>() / c as f64 };
    let per_item_mean =
        if per_item.is_empty() { 0.0 } else { per_item.iter().map(|i| i.contribution).sum::<f64>() / per_item.len() as f64 };
    let labeled: Vec<&ItemFaithfulness> = per_item.iter().filter(|i| i.labeled).collect();
    let accuracy =
        (!labeled.is_empty()).then(|| labeled.iter().filter(|i| i.accurate).count() as f64 / labeled.len() as f64);
    let unlabeled_ids = per_item.iter().filter(|i| !i.labeled).map(|i| i.prompt_id.clone()).collect();
    Ok(FaithfulnessScore { per_item, per_group_d, overall_dh, per_item_mean, accuracy, unlabeled_ids })
}

/// `w * in_a/in_b + out_a/out_b`.
pub fn relative_cost(in_a: u64, in_b: u64, out_a: u64, out_b: u64, w: f64) -> Result<f64, EvalError> {
    if in_b == 0 {
        return Err(EvalError::DivisionByZero("baseline input tokens"));
    }
    if out_b == 0 {
        return Err(EvalError::DivisionByZero("baseline output tokens"));
    }
    Ok(w * (in_a as f64 / in_b as f64) + out_a as f64 / out_b as f64)
}

/// `(t_b / t_a) * c`.
pub fn weighted_efficiency(t_a: f64, t_b: f64, c: f64) -> Result<f64, EvalError> {
    if t_a <= 0.0 {
        return Err(EvalError::DivisionByZero("method time"));
    }
    Ok(t_b / t_a * c)
}

/// Predicted ratio of separate to batched running time for `m` prompts:
/// `(m - 1) * b / t_batch + 1`.
pub fn batching_gain(m: usize, base_seconds: f64, t_batch: f64) -> f64 {
    (m.saturating_sub(1)) as f64 * base_seconds / t_batch + 1.0
}

/// Workload-level totals for one method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodTotals {
    pub time_s: f64,
    pub in_tokens: u64,
    pub out_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub method: CliqueMethod,
    pub total_time_s: f64,
    pub total_in_tokens: u64,
    pub total_out_tokens: u64,
    pub relative_cost_c: f64,
    pub weighted_efficiency_e: f64,
    pub baseline: CliqueMethod,
    pub baseline_time_s: f64,
    pub weight_w: f64,
}

impl EfficiencyReport {
    pub fn compute(
        method: CliqueMethod,
        totals: MethodTotals,
        baseline: CliqueMethod,
        baseline_totals: MethodTotals,
        w: f64,
    ) -> Result<Self, EvalError> {
        let c = relative_cost(totals.in_tokens, baseline_totals.in_tokens, totals.out_tokens, baseline_totals.out_tokens, w)?;
        let e = weighted_efficiency(totals.time_s, baseline_totals.time_s, c)?;
        Ok(Self {
            method,
            total_time_s: totals.time_s,
            total_in_tokens: totals.in_tokens,
            total_out_tokens: totals.out_tokens,
            relative_cost_c: c,
            weighted_efficiency_e: e,
            baseline,
            baseline_time_s: baseline_totals.time_s,
            weight_w: w,
        })
    }

    /// Residual of `e = (t_b / t_a) * c`.
    pub fn identity_error(&self) -> f64 {
        (self.weighted_efficiency_e - self.baseline_time_s / self.total_time_s * self.relative_cost_c).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSample {
    pub in_tokens: f64,
    pub out_tokens: f64,
    pub seconds: f64,
}

impl CostSample {
    pub fn new(in_tokens: f64, out_tokens: f64, seconds: f64) -> Self {
        Self { in_tokens, out_tokens, seconds }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFit {
    pub params: CostModelParams,
    pub rms_residual: f64,
    pub samples: usize,
}

impl CostFit {
    pub fn out_in_ratio(&self) -> f64 {
        self.params.out_coeff / self.params.in_coeff
    }
}

/// Relative singular-value cutoff for the column-scaled design matrix.
const RANK_TOLERANCE: f64 = 1e-9;

/// Least-squares fit of `seconds = b + w1 * in + w2 * out`.
pub fn fit_cost_model(samples: &[CostSample]) -> Result<CostFit, EvalError> {
    let n = samples.len();
    if n < 3 {
        return Err(EvalError::InsufficientSamples(n));
    }
    let mut x = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => samples[i].in_tokens,
        _ => samples[i].out_tokens,
    });
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.seconds));
    let scales: Vec<f64> = (0..3).map(|j| x.column(j).norm()).collect();
    if scales.iter().any(|&s| s == 0.0) {
        return Err(EvalError::RankDeficient { rank: scales.iter().filter(|&&s| s > 0.0).count() });
    }
    for (j, s) in scales.iter().enumerate() {
        x.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > RANK_TOLERANCE * max_sv).count();
    if rank < 3 {
        return Err(EvalError::RankDeficient { rank });
    }
    let beta = svd.solve(&y, 0.0).expect("u and v were computed");
    let residual = &y - &x * &beta;
    let rms_residual = (residual.norm_squared() / n as f64).sqrt();
    let coef: Vec<f64> = (0..3).map(|j| beta[j] / scales[j]).collect();
    Ok(CostFit { params: CostModelParams::new(coef[0], coef[1], coef[2]), rms_residual, samples: n })
}
