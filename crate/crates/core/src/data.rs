//! Prompt workloads loaded from JSONL and their length-dispersion statistics.
//!
//! One JSON object per line:
//!
//! ```text
//! {"id": str, "user": str?, "context": str?, "question": str,
//!  "answer": str?, "concept": str?, "choices": [str]?}
//! ```
//!
//! Unknown keys are ignored. A prompt's text is the context followed by a
//! newline and the question when a context is present.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::text::tokenize_count;

pub const DEFAULT_USER: &str = "u0";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed JSON: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("workload has no prompts")]
    EmptyWorkload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub id: String,
    pub user_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<String>>,
}

impl Prompt {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            user_id: DEFAULT_USER.to_string(),
            text: text.into(),
            concept: None,
            ground_truth: None,
            choices: None,
        }
    }

    pub fn with_concept(mut self, concept: impl Into<String>) -> Self {
        self.concept = Some(concept.into());
        self
    }

    pub fn with_ground_truth(mut self, gt: impl Into<String>) -> Self {
        self.ground_truth = Some(gt.into());
        self
    }

    pub fn with_choices(mut self, choices: Vec<String>) -> Self {
        self.choices = Some(choices);
        self
    }

    /// The question part of the text: the last non-empty line.
    pub fn question(&self) -> &str {
        self.text.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or(&self.text)
    }

    /// Index of the ground-truth option when this is a multiple-choice prompt.
    pub fn ground_truth_choice(&self) -> Option<usize> {
        let choices = self.choices.as_ref()?;
        let gt = self.ground_truth.as_ref()?;
        resolve_choice(gt, choices)
    }
}

/// Maps a ground truth to a choice index, either by letter (`A`, `b`, `(C)`)
/// or by exact option text.
pub fn resolve_choice(gt: &str, choices: &[String]) -> Option<usize> {
    let trimmed = gt.trim();
    if let Some(i) = choices.iter().position(|c| c.trim() == trimmed) {
        return Some(i);
    }
    let letter = trimmed.trim_matches(|c| c == '(' || c == ')' || c == '.');
    let mut chars = letter.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_alphabetic() => {
            let idx = (c.to_ascii_uppercase() as u8 - b'A') as usize;
            (idx < choices.len()).then_some(idx)
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub name: String,
    pub prompts: Vec<Prompt>,
}

impl Workload {
    pub fn new(name: impl Into<String>, prompts: Vec<Prompt>) -> Result<Self, DataError> {
        if prompts.is_empty() {
            return Err(DataError::EmptyWorkload);
        }
        let mut seen = HashSet::new();
        for (i, p) in prompts.iter().enumerate() {
            if !seen.insert(p.id.as_str()) {
                return Err(DataError::Schema { line: i + 1, message: format!("duplicate id {:?}", p.id) });
            }
            if p.text.is_empty() {
                return Err(DataError::Schema { line: i + 1, message: format!("prompt {:?} has empty text", p.id) });
            }
        }
        Ok(Self { name: name.into(), prompts })
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Prompt> {
        self.prompts.iter().find(|p| p.id == id)
    }

    /// Spreads prompts over `users` synthetic users `u0..u{n-1}` in order.
    pub fn assign_users_round_robin(&mut self, users: usize) {
        let users = users.max(1);
        for (i, p) in self.prompts.iter_mut().enumerate() {
            p.user_id = format!("u{}", i % users);
        }
    }

    /// Serializes back to the JSONL record shape (text goes into `question`).
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.prompts {
            let mut obj = serde_json::Map::new();
            obj.insert("id".into(), Value::String(p.id.clone()));
            obj.insert("user".into(), Value::String(p.user_id.clone()));
            obj.insert("question".into(), Value::String(p.text.clone()));
            if let Some(gt) = &p.ground_truth {
                obj.insert("answer".into(), Value::String(gt.clone()));
            }
            if let Some(c) = &p.concept {
                obj.insert("concept".into(), Value::String(c.clone()));
            }
            if let Some(ch) = &p.choices {
                obj.insert("choices".into(), Value::from(ch.clone()));
            }
            out.push_str(&Value::Object(obj).to_string());
            out.push('\n');
        }
        out
    }
}

fn string_field(obj: &serde_json::Map<String, Value>, key: &str, line: usize) -> Result<Option<String>, DataError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(Value::Bool(b)) => Ok(Some(b.to_string())),
        Some(other) => Err(DataError::Schema {
            line,
            message: format!("field {key:?} must be a string, got {other}"),
        }),
    }
}

fn parse_record(raw: &str, line: usize) -> Result<Prompt, DataError> {
    let value: Value = serde_json::from_str(raw).map_err(|e| DataError::Parse { line, message: e.to_string() })?;
    let obj = value.as_object().ok_or_else(|| DataError::Parse { line, message: "expected a JSON object".into() })?;
    let question = string_field(obj, "question", line)?
        .ok_or_else(|| DataError::Schema { line, message: "missing \"question\" field".into() })?;
    let id = string_field(obj, "id", line)?.unwrap_or_else(|| format!("line{line}"));
    let text = match string_field(obj, "context", line)? {
        Some(ctx) if !ctx.is_empty() => format!("{ctx}\n{question}"),
        _ => question,
    };
    if text.trim().is_empty() {
        return Err(DataError::Schema { line, message: "empty prompt text".into() });
    }
    let concept = match string_field(obj, "concept", line)? {
        Some(c) => Some(c),
        None => string_field(obj, "type", line)?,
    };
    let choices = match obj.get("choices") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => Some(
            items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    other => Ok(other.to_string()),
                })
                .collect::<Result<Vec<_>, DataError>>()?,
        ),
        Some(_) => return Err(DataError::Schema { line, message: "\"choices\" must be an array".into() }),
    };
    let prompt = Prompt {
        id,
        user_id: string_field(obj, "user", line)?.unwrap_or_else(|| DEFAULT_USER.to_string()),
        text,
        concept,
        ground_truth: string_field(obj, "answer", line)?,
        choices,
    };
    if let (Some(choices), Some(gt)) = (&prompt.choices, &prompt.ground_truth) {
        if resolve_choice(gt, choices).is_none() {
            return Err(DataError::Schema {
                line,
                message: format!("answer {gt:?} does not identify one of the choices"),
            });
        }
    }
    Ok(prompt)
}

/// Parses JSONL content. Blank lines are skipped.
pub fn parse_dataset(name: &str, content: &str) -> Result<Workload, DataError> {
    let mut prompts = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in content.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let prompt = parse_record(raw, line)?;
        if !seen.insert(prompt.id.clone()) {
            return Err(DataError::Schema { line, message: format!("duplicate id {:?}", prompt.id) });
        }
        prompts.push(prompt);
    }
    if prompts.is_empty() {
        return Err(DataError::EmptyWorkload);
    }
    Ok(Workload { name: name.to_string(), prompts })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Workload, DataError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_dataset(&name, &content)
}

/// Question type from the first interrogative word, one of
/// `what, when, where, who, why, how, other`.
pub fn classify_question(question: &str) -> &'static str {
    for word in question.split(|c: char| !c.is_alphanumeric()) {
        match word.to_lowercase().as_str() {
            "what" | "which" => return "what",
            "when" => return "when",
            "where" => return "where",
            "who" | "whom" | "whose" => return "who",
            "why" => return "why",
            "how" => return "how",
            _ => {}
        }
    }
    "other"
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub mean_tokens: f64,
    /// Population standard deviation.
    pub stdev_tokens: f64,
    pub rsd_percent: f64,
    pub z_scores: Vec<f64>,
}

pub fn length_dispersion_stats(workload: &Workload) -> LengthStats {
    let lengths: Vec<f64> = workload.prompts.iter().map(|p| tokenize_count(&p.text).get() as f64).collect();
    dispersion_of(&lengths)
}

pub fn dispersion_of(lengths: &[f64]) -> LengthStats {
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let var = lengths.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let stdev = var.sqrt();
    if stdev == 0.0 {
        return LengthStats { mean_tokens: mean, stdev_tokens: 0.0, rsd_percent: 0.0, z_scores: vec![0.0; lengths.len()] };
    }
    LengthStats {
        mean_tokens: mean,
        stdev_tokens: stdev,
        rsd_percent: if mean > 0.0 { 100.0 * stdev / mean } else { 0.0 },
        z_scores: lengths.iter().map(|x| (x - mean) / stdev).collect(),
    }
}

/// Fixed-width histogram of z-scores: `(lo, hi, count)` rows with bins of
/// `width` aligned on multiples of `width`.
pub fn z_histogram(z_scores: &[f64], width: f64) -> Vec<(f64, f64, usize)> {
    if z_scores.is_empty() {
        return Vec::new();
    }
    let lo_bin = z_scores.iter().map(|z| (z / width).floor() as i64).min().unwrap_or(0);
    let hi_bin = z_scores.iter().map(|z| (z / width).floor() as i64).max().unwrap_or(0);
    let mut counts = vec![0usize; (hi_bin - lo_bin + 1) as usize];
    for z in z_scores {
        counts[((z / width).floor() as i64 - lo_bin) as usize] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let b = lo_bin + i as i64;
            (b as f64 * width, (b + 1) as f64 * width, c)
        })
        .collect()
}
