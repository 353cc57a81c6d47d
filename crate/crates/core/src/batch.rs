//! Merging a group into one itemized prompt, and splitting the itemized
//! completion back into per-prompt answers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Prompt;

pub const TEMPLATE_VERSION: &str = "cliqueparcel-v1";

pub const BATCH_INSTRUCTION: &str =
    "Return the answer for each question with their corresponding numerical itemization.";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BatchError {
    #[error("cannot batch an empty group")]
    EmptyGroup,
    #[error("prompt {0:?} has empty text")]
    EmptyPrompt(String),
    #[error("completion contains no itemization anchors")]
    NoAnchorsFound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchedPrompt {
    pub text: String,
    pub member_ids: Vec<String>,
    pub template_version: String,
    /// Members whose own text has a line that parses as an item anchor.
    /// Such prompts are batched as-is but their answers may mis-split.
    pub anchor_like_members: Vec<String>,
}

pub fn build_batch(group: &[Prompt]) -> Result<BatchedPrompt, BatchError> {
    if group.is_empty() {
        return Err(BatchError::EmptyGroup);
    }
    let mut text = String::from(BATCH_INSTRUCTION);
    let mut anchor_like_members = Vec::new();
    for (i, p) in group.iter().enumerate() {
        if p.text.is_empty() {
            return Err(BatchError::EmptyPrompt(p.id.clone()));
        }
        if contains_anchor_line(&p.text) {
            anchor_like_members.push(p.id.clone());
        }
        text.push(' ');
        text.push_str(&(i + 1).to_string());
        text.push_str(". ");
        text.push_str(&p.text);
    }
    Ok(BatchedPrompt {
        text,
        member_ids: group.iter().map(|p| p.id.clone()).collect(),
        template_version: TEMPLATE_VERSION.to_string(),
        anchor_like_members,
    })
}

/// Renders answers the way a cooperative model would: `k. answer` per line.
pub fn render_itemized<S: AsRef<str>>(answers: &[S]) -> String {
    answers
        .iter()
        .enumerate()
        .map(|(i, a)| format!("{}. {}", i + 1, a.as_ref()))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedItem {
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index")]
pub enum ParseDiagnostic {
    MissingItem(usize),
    DuplicateItem(usize),
    OutOfOrder(usize),
    /// Index beyond the expected count; kept in `items`.
    UnexpectedItem(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswers {
    pub items: Vec<ParsedItem>,
    pub complete: bool,
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl ParsedAnswers {
    pub fn get(&self, index: usize) -> Option<&str> {
        self.items.iter().find(|i| i.index == index).map(|i| i.text.as_str())
    }

    pub fn missing(&self) -> Vec<usize> {
        self.diagnostics
            .iter()
            .filter_map(|d| match d {
                ParseDiagnostic::MissingItem(k) => Some(*k),
                _ => None,
            })
            .collect()
    }
}

/// If `line` starts (after whitespace) with `k.` or `k)` followed by
/// whitespace or end of line, returns `k` and the byte offset just past the
/// delimiter.
fn anchor_of(line: &str) -> Option<(usize, usize)> {
    let lead = line.len() - line.trim_start().len();
    let rest = &line[lead..];
    let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 || digits > 9 {
        return None;
    }
    let after = &rest[digits..];
    let mut chars = after.chars();
    match chars.next() {
        Some('.') | Some(')') => {}
        _ => return None,
    }
    match chars.next() {
        None => {}
        Some(c) if c.is_whitespace() => {}
        _ => return None,
    }
    let k: usize = rest[..digits].parse().ok()?;
    (k >= 1).then_some((k, lead + digits + 1))
}

pub fn contains_anchor_line(text: &str) -> bool {
    text.lines().any(|l| anchor_of(l).is_some())
}

/// Splits an itemized completion. An anchor is a line beginning with an
/// integer followed by `.` or `)` and a space or end of line; each item runs
/// to the next anchor, the last to the end of text. Anchors that do not
/// increase the index are reported and their spans dropped. Text before the
/// first anchor belongs to no item.
pub fn parse_itemized(completion: &str, expected_count: usize) -> Result<ParsedAnswers, BatchError> {
    // (index, start of anchor line, start of item text)
    let mut anchors: Vec<(usize, usize, usize)> = Vec::new();
    let mut offset = 0;
    for line in completion.split_inclusive('\n') {
        if let Some((k, content)) = anchor_of(line.trim_end_matches(['\n', '\r'])) {
            anchors.push((k, offset, offset + content));
        }
        offset += line.len();
    }
    if anchors.is_empty() {
        return Err(BatchError::NoAnchorsFound);
    }
    let mut items: Vec<ParsedItem> = Vec::new();
    let mut diagnostics = Vec::new();
    for (n, &(k, _, content_start)) in anchors.iter().enumerate() {
        let end = anchors.get(n + 1).map_or(completion.len(), |a| a.1);
        let last = items.last().map_or(0, |i| i.index);
        if k <= last {
            if items.iter().any(|i| i.index == k) {
                diagnostics.push(ParseDiagnostic::DuplicateItem(k));
            } else {
                diagnostics.push(ParseDiagnostic::OutOfOrder(k));
            }
            continue;
        }
        if k > expected_count {
            diagnostics.push(ParseDiagnostic::UnexpectedItem(k));
        }
        items.push(ParsedItem { index: k, text: completion[content_start..end].trim().to_string() });
    }
    for k in 1..=expected_count {
        if !items.iter().any(|i| i.index == k) {
            diagnostics.push(ParseDiagnostic::MissingItem(k));
        }
    }
    let complete = items.len() == expected_count && items.iter().enumerate().all(|(i, it)| it.index == i + 1);
    Ok(ParsedAnswers { items, complete, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompts(texts: &[&str]) -> Vec<Prompt> {
        texts.iter().enumerate().map(|(i, t)| Prompt::new(format!("p{i}"), *t)).collect()
    }

    #[test]
    fn single_prompt_template() {
        let b = build_batch(&prompts(&["What is 2+2?"])).unwrap();
        assert_eq!(
            b.text,
            "Return the answer for each question with their corresponding numerical itemization. 1. What is 2+2?"
        );
        assert_eq!(b.template_version, "cliqueparcel-v1");
        assert!(b.anchor_like_members.is_empty());
    }

    #[test]
    fn anchors_in_order() {
        let b = build_batch(&prompts(&["Q one?", "Q two?", "Q three?"])).unwrap();
        let i1 = b.text.find(" 1. Q one?").unwrap();
        let i2 = b.text.find(" 2. Q two?").unwrap();
        let i3 = b.text.find(" 3. Q three?").unwrap();
        assert!(i1 < i2 && i2 < i3);
        assert_eq!(b.member_ids, vec!["p0", "p1", "p2"]);
    }

    #[test]
    fn multiline_kept_and_flagged() {
        let b = build_batch(&prompts(&["Context line\nWhat?", "List:\n1. first"])).unwrap();
        assert!(b.text.contains("1. Context line\nWhat? 2. List:\n1. first"));
        assert_eq!(b.anchor_like_members, vec!["p1"]);
    }

    #[test]
    fn empty_group() {
        assert_eq!(build_batch(&[]), Err(BatchError::EmptyGroup));
    }

    #[test]
    fn parses_simple() {
        let p = parse_itemized("1. Paris\n2. Blue", 2).unwrap();
        assert!(p.complete);
        assert_eq!(p.get(1), Some("Paris"));
        assert_eq!(p.get(2), Some("Blue"));
        assert!(p.diagnostics.is_empty());
    }

    #[test]
    fn continuation_lines() {
        let p = parse_itemized("1. First line\ncontinued\n2. B", 2).unwrap();
        assert_eq!(p.get(1), Some("First line\ncontinued"));
        assert!(p.complete);
    }

    #[test]
    fn missing_item() {
        let p = parse_itemized("1. A\n3. C", 3).unwrap();
        assert_eq!(p.items.iter().map(|i| i.index).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(p.missing(), vec![2]);
        assert!(!p.complete);
    }

    #[test]
    fn duplicates_and_disorder() {
        let p = parse_itemized("1. A\n2. B\n2. B again\n1. back", 2).unwrap();
        assert_eq!(p.get(2), Some("B"));
        assert!(p.diagnostics.contains(&ParseDiagnostic::DuplicateItem(2)));
        assert!(p.diagnostics.contains(&ParseDiagnostic::DuplicateItem(1)));
        assert!(p.complete);
        let p = parse_itemized("1. A\n3. C\n2. B", 3).unwrap();
        assert!(p.diagnostics.contains(&ParseDiagnostic::OutOfOrder(2)));
        assert!(!p.complete);
    }

    #[test]
    fn anchor_grammar() {
        let p = parse_itemized("Sure! Here you go:\n  1) alpha\n2.\nbeta\n3.5 is not an anchor\n10.x neither", 2).unwrap();
        assert_eq!(p.get(1), Some("alpha"));
        assert_eq!(p.get(2), Some("beta\n3.5 is not an anchor\n10.x neither"));
        assert!(p.complete);
        assert_eq!(parse_itemized("no numbers here", 1), Err(BatchError::NoAnchorsFound));
        assert_eq!(parse_itemized("see item 1. inline", 1), Err(BatchError::NoAnchorsFound));
    }

    #[test]
    fn extra_items_are_reported() {
        let p = parse_itemized("1. a\n2. b\n3. c", 2).unwrap();
        assert!(!p.complete);
        assert_eq!(p.diagnostics, vec![ParseDiagnostic::UnexpectedItem(3)]);
    }

    #[test]
    fn crlf_lines() {
        let p = parse_itemized("1. a\r\n2. b\r\n", 2).unwrap();
        assert_eq!(p.get(1), Some("a"));
        assert_eq!(p.get(2), Some("b"));
    }

    #[test]
    fn render_round_trip() {
        let text = render_itemized(&["x", "y\nz"]);
        assert_eq!(text, "1. x\n2. y\nz");
        let p = parse_itemized(&text, 2).unwrap();
        assert_eq!(p.get(2), Some("y\nz"));
    }
}
