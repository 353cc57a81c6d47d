use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionResult, CostModelParams, SimClock};
use crate::batch::{render_itemized, BATCH_INSTRUCTION};
use crate::data::{Prompt, Workload};
use crate::text::{tokenize_count, tokens, truncate_tokens, TokenCount};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationOptions {
    /// Fraction `s` of each answer's tokens kept in batched completions.
    pub discount: f64,
    /// Count instruction and itemization tokens into batched lengths.
    pub count_overhead: bool,
    /// Target word count for answers scripted from a workload.
    pub answer_words: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self { discount: 1.0, count_overhead: true, answer_words: 40 }
    }
}

impl SimulationOptions {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(BackendError::Config(format!("discount must be in (0, 1], got {}", self.discount)));
        }
        Ok(())
    }
}

/// Answer per exact prompt text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScriptedAnswers {
    answers: HashMap<String, String>,
}

impl ScriptedAnswers {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, prompt: impl Into<String>, answer: impl Into<String>) {
        self.answers.insert(prompt.into(), answer.into());
    }

    pub fn get(&self, prompt: &str) -> Option<&str> {
        self.answers.get(prompt).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn from_workload(workload: &Workload, answer_words: usize) -> Self {
        let mut s = Self::new();
        for p in &workload.prompts {
            s.insert(p.text.clone(), synthetic_answer(p, answer_words));
        }
        s
    }

    /// Splits a batched prompt into member prompt texts when every member
    /// is known. Backtracks over candidate item boundaries, since member
    /// texts may themselves contain ` k. `.
    fn decompose<'a>(&self, text: &'a str) -> Option<Vec<&'a str>> {
        let rest = text.strip_prefix(BATCH_INSTRUCTION)?;
        let mut out = Vec::new();
        self.decompose_from(rest, 1, &mut out).then_some(out)
    }

    fn decompose_from<'a>(&self, rest: &'a str, k: usize, out: &mut Vec<&'a str>) -> bool {
        let Some(body) = rest.strip_prefix(&format!(" {k}. ")) else {
            return false;
        };
        let next = format!(" {}. ", k + 1);
        let mut ends: Vec<usize> = body.match_indices(&next).map(|(i, _)| i).collect();
        ends.push(body.len());
        for end in ends {
            let member = &body[..end];
            if !self.answers.contains_key(member) {
                continue;
            }
            out.push(member);
            if end == body.len() || self.decompose_from(&body[end..], k + 1, out) {
                return true;
            }
            out.pop();
        }
        false
    }
}

/// Deterministic stand-in answer: the ground truth (if any) followed by the
/// question's words, cycled until `words` words.
pub fn synthetic_answer(prompt: &Prompt, words: usize) -> String {
    let mut out: Vec<String> = Vec::new();
    if let Some(gt) = &prompt.ground_truth {
        out.extend(word_tokens(gt));
    }
    let question: Vec<String> = word_tokens(prompt.question());
    if !question.is_empty() {
        let mut i = 0;
        while out.len() < words.max(1) {
            out.push(question[i % question.len()].clone());
            i += 1;
        }
    }
    if out.is_empty() {
        out.push("unknown".into());
    }
    out.join(" ")
}

fn word_tokens(text: &str) -> Vec<String> {
    tokens(text)
        .into_iter()
        .filter(|t| t.chars().next().is_some_and(char::is_alphanumeric))
        .map(str::to_string)
        .collect()
}

/// Keeps `ceil(s * n)` of an answer's `n` tokens.
fn discounted(answer: &str, s: f64) -> &str {
    if s >= 1.0 {
        return answer;
    }
    let n = tokenize_count(answer).get() as f64;
    truncate_tokens(answer, (s * n).ceil() as usize)
}

/// Single simulated call: latency from the linear cost model, advanced on
/// `clock`. A batched prompt is answered item by item, with each member
/// answer shortened by the discount factor.
pub fn simulate_complete(
    params: &CostModelParams,
    prompt_text: &str,
    answers: &ScriptedAnswers,
    options: &SimulationOptions,
    clock: &SimClock,
) -> Result<CompletionResult, BackendError> {
    let (text, input_tokens, output_tokens) = if let Some(answer) = answers.get(prompt_text) {
        (answer.to_string(), tokenize_count(prompt_text), tokenize_count(answer))
    } else if let Some(members) = answers.decompose(prompt_text) {
        let member_answers: Vec<&str> = members
            .iter()
            .map(|m| discounted(answers.get(m).expect("decomposed members are known"), options.discount))
            .collect();
        let text = render_itemized(&member_answers);
        if options.count_overhead {
            let (i, o) = (tokenize_count(prompt_text), tokenize_count(&text));
            (text, i, o)
        } else {
            let i: TokenCount = members.iter().map(|m| tokenize_count(m)).sum();
            let o: TokenCount = member_answers.iter().map(|a| tokenize_count(a)).sum();
            (text, i, o)
        }
    } else {
        let preview: String = prompt_text.chars().take(60).collect();
        return Err(BackendError::UnknownPrompt(preview));
    };
    let latency_seconds = params.latency(input_tokens.get(), output_tokens.get());
    clock.advance(latency_seconds);
    Ok(CompletionResult { text, input_tokens, output_tokens, latency_seconds, backend_id: "simulated".into() })
}

#[derive(Debug, Clone)]
pub struct SimulatedBackend {
    pub params: CostModelParams,
    pub answers: Arc<ScriptedAnswers>,
    pub options: SimulationOptions,
    pub clock: Arc<SimClock>,
}

impl SimulatedBackend {
    pub fn new(params: CostModelParams, answers: ScriptedAnswers, options: SimulationOptions) -> Self {
        Self { params, answers: Arc::new(answers), options, clock: Arc::new(SimClock::new()) }
    }
}

impl Backend for SimulatedBackend {
    fn id(&self) -> String {
        "simulated".into()
    }

    fn complete(&self, prompt: &str) -> Result<CompletionResult, BackendError> {
        simulate_complete(&self.params, prompt, &self.answers, &self.options, &self.clock)
    }
}
