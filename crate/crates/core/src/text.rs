//! Deterministic text primitives: token counting, hashed character 3-gram
//! embeddings, cosine similarity, BLEU and ROUGE-L.
//!
//! Everything here is pure. Tokens are maximal runs of word characters
//! (alphanumeric or `_`) plus every other non-whitespace character on its
//! own, which approximates a sub-word tokenizer closely enough for ratios of
//! counts produced by the same tokenizer.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default embedding dimension.
pub const DEFAULT_EMBEDDING_DIM: usize = 256;

/// Smallest accepted embedding dimension.
pub const MIN_EMBEDDING_DIM: usize = 8;

/// Substitute for a zero modified n-gram precision in BLEU.
pub const BLEU_SMOOTHING: f64 = 1e-9;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Number of tokens in a piece of text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenCount(pub u64);

impl TokenCount {
    pub fn get(self) -> u64 {
        self.0
    }
}

impl std::ops::Add for TokenCount {
    type Output = TokenCount;
    fn add(self, rhs: Self) -> Self {
        TokenCount(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for TokenCount {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for TokenCount {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        TokenCount(iter.map(|t| t.0).sum())
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte ranges of the tokens in `text`, in order.
pub fn token_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut word_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if is_word_char(c) {
            if word_start.is_none() {
                word_start = Some(i);
            }
            continue;
        }
        if let Some(start) = word_start.take() {
            spans.push(start..i);
        }
        if !c.is_whitespace() {
            spans.push(i..i + c.len_utf8());
        }
    }
    if let Some(start) = word_start {
        spans.push(start..text.len());
    }
    spans
}

/// Tokens of `text` as borrowed slices, case preserved.
pub fn tokens(text: &str) -> Vec<&str> {
    token_spans(text).into_iter().map(|r| &text[r]).collect()
}

/// Casefolded tokens, the unit compared by BLEU and ROUGE-L.
pub fn folded_tokens(text: &str) -> Vec<String> {
    tokens(text).into_iter().map(str::to_lowercase).collect()
}

pub fn tokenize_count(text: &str) -> TokenCount {
    TokenCount(token_spans(text).len() as u64)
}

/// Longest prefix of `text` holding at most `max_tokens` tokens, cut at the
/// end of the last kept token.
pub fn truncate_tokens(text: &str, max_tokens: usize) -> &str {
    if max_tokens == 0 {
        return "";
    }
    let spans = token_spans(text);
    match spans.get(max_tokens - 1) {
        Some(last) if spans.len() > max_tokens => &text[..last.end],
        _ => text,
    }
}

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// A hashed, L2-normalized bag of character 3-grams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    /// Number of 3-grams that were hashed into `values`.
    pub source_len: usize,
}

impl EmbeddingVector {
    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![0.0; dim], source_len: 0 }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// Maps text to a fixed-dimension vector. [`HashingEmbedder`] is the
/// built-in implementation; remote providers can sit behind the same trait.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> EmbeddingVector;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    /// # Panics
    ///
    /// Panics when `dim` is below [`MIN_EMBEDDING_DIM`].
    pub fn new(dim: usize) -> Self {
        assert!(dim >= MIN_EMBEDDING_DIM, "embedding dimension must be >= {MIN_EMBEDDING_DIM}");
        Self { dim }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_EMBEDDING_DIM)
    }
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        embed_text(text, self.dim)
    }
}

/// Character 3-gram feature hashing over the casefolded text.
///
/// Each 3-gram's UTF-8 bytes are hashed with FNV-1a and reduced modulo
/// `dim`; the count vector is then L2-normalized. Texts with fewer than three
/// characters have no features and map to the zero vector.
pub fn embed_text(text: &str, dim: usize) -> EmbeddingVector {
    assert!(dim >= MIN_EMBEDDING_DIM, "embedding dimension must be >= {MIN_EMBEDDING_DIM}");
    let folded = text.to_lowercase();
    let chars: Vec<char> = folded.chars().collect();
    let mut out = EmbeddingVector::zeros(dim);
    if chars.len() < 3 {
        return out;
    }
    let mut buf = String::with_capacity(12);
    for window in chars.windows(3) {
        buf.clear();
        buf.extend(window.iter());
        let bucket = (fnv1a64(buf.as_bytes()) % dim as u64) as usize;
        out.values[bucket] += 1.0;
        out.source_len += 1;
    }
    let norm = out.norm();
    for v in &mut out.values {
        *v /= norm;
    }
    out
}

/// Dot product of two unit (or zero) vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, TextError> {
    if a.dim() != b.dim() {
        return Err(TextError::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Single-reference BLEU with N = min(4, candidate length), uniform weights,
/// epsilon smoothing of zero precisions and the usual brevity penalty.
pub fn bleu_score(candidate: &str, reference: &str) -> f64 {
    let cand = folded_tokens(candidate);
    let refr = folded_tokens(reference);
    if cand.is_empty() {
        return 0.0;
    }
    let max_n = cand.len().min(4);
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cand_counts = ngram_counts(&cand, n);
        let ref_counts = ngram_counts(&refr, n);
        let total: usize = cand_counts.values().sum();
        let clipped: usize = cand_counts
            .iter()
            .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        let precision = if clipped == 0 { BLEU_SMOOTHING } else { clipped as f64 / total as f64 };
        log_sum += precision.ln();
    }
    let geo_mean = (log_sum / max_n as f64).exp();
    let bp = (1.0 - refr.len() as f64 / cand.len() as f64).exp().min(1.0);
    (bp * geo_mean).clamp(0.0, 1.0)
}

/// Length of the longest common subsequence, two-row DP.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 over casefolded tokens.
pub fn rouge_l_score(candidate: &str, reference: &str) -> f64 {
    let cand = folded_tokens(candidate);
    let refr = folded_tokens(reference);
    let lcs = lcs_len(&cand, &refr);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / cand.len() as f64;
    let r = lcs as f64 / refr.len() as f64;
    2.0 * p * r / (p + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn token_count_cases() {
        assert_eq!(tokenize_count(""), TokenCount(0));
        assert_eq!(tokenize_count("Hello, world!"), TokenCount(4));
        assert_eq!(tokens("What is 2+2?"), vec!["What", "is", "2", "+", "2", "?"]);
        assert_eq!(tokenize_count("  \n\t "), TokenCount(0));
        assert_eq!(tokens("naïve café_bar"), vec!["naïve", "café_bar"]);
    }

    #[test]
    fn truncation_keeps_whole_tokens() {
        assert_eq!(truncate_tokens("one two, three", 2), "one two");
        assert_eq!(truncate_tokens("one two, three", 3), "one two,");
        assert_eq!(truncate_tokens("one two", 5), "one two");
        assert_eq!(truncate_tokens("one two", 0), "");
    }

    #[test]
    fn empty_and_short_text_embed_to_zero() {
        let e = embed_text("", 256);
        assert_eq!(e.values.len(), 256);
        assert!(e.is_zero());
        assert_eq!(e.source_len, 0);
        assert!(embed_text("ab", 64).is_zero());
        let any = embed_text("some text", 256);
        assert_eq!(cosine_similarity(&e, &any).unwrap(), 0.0);
    }

    #[test]
    fn embedding_is_unit_norm_and_deterministic() {
        let a = embed_text("The quick brown fox", 256);
        let b = embed_text("The quick brown fox", 256);
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert!((cosine_similarity(&a, &b).unwrap() - 1.0).abs() < 1e-9);
        // casefolded
        assert_eq!(a, embed_text("THE QUICK BROWN FOX", 256));
    }

    // Independent bucket computation for the abcd/bcde case.
    fn oracle_bucket(s: &str, dim: u64) -> u64 {
        let mut h: u64 = 14695981039346656037;
        for b in s.bytes() {
            h = (h ^ b as u64).wrapping_mul(1099511628211);
        }
        h % dim
    }

    #[test]
    fn one_shared_trigram_gives_half_cosine() {
        let buckets: Vec<u64> = ["abc", "bcd", "cde"].iter().map(|g| oracle_bucket(g, 256)).collect();
        assert_ne!(buckets[0], buckets[1]);
        assert_ne!(buckets[0], buckets[2]);
        assert_ne!(buckets[1], buckets[2]);
        // a = (abc + bcd)/sqrt2, b = (bcd + cde)/sqrt2, dot = 1/2
        let cos = cosine_similarity(&embed_text("abcd", 256), &embed_text("bcde", 256)).unwrap();
        assert!((cos - 0.5).abs() < 1e-12, "{cos}");
    }

    #[test]
    fn disjoint_trigrams_are_orthogonal_without_collisions() {
        let dim = 1024;
        let grams_a = ["xyz"];
        let grams_b = ["pqr"];
        assert_ne!(oracle_bucket(grams_a[0], dim), oracle_bucket(grams_b[0], dim));
        let cos = cosine_similarity(&embed_text("xyz", dim as usize), &embed_text("pqr", dim as usize)).unwrap();
        assert_eq!(cos, 0.0);
    }

    #[test]
    fn cosine_rejects_mismatched_dims() {
        let err = cosine_similarity(&embed_text("abc", 16), &embed_text("abc", 32)).unwrap_err();
        assert_eq!(err, TextError::DimensionMismatch { left: 16, right: 32 });
    }

    #[test]
    #[should_panic]
    fn tiny_dimension_panics() {
        embed_text("abc", 4);
    }

    #[test]
    fn bleu_hand_cases() {
        assert_eq!(bleu_score("", "anything"), 0.0);
        assert!((bleu_score("the cat sat on the mat", "the cat sat on the mat") - 1.0).abs() < 1e-12);
        let expected = (-1.0f64).exp();
        assert!((bleu_score("the cat sat", "the cat sat on the mat") - expected).abs() < 1e-9);
        assert!((expected - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn bleu_clips_repeated_ngrams() {
        // p1 = 2/7 clipped ("the" appears twice in the reference)
        let s = bleu_score("the the the the the the the", "the cat is on the mat");
        assert!(s > 0.0 && s < 1e-3);
    }

    #[test]
    fn rouge_hand_cases() {
        assert!((rouge_l_score("the cat", "the cat sat") - 0.8).abs() < 1e-12);
        assert_eq!(rouge_l_score("alpha beta", "gamma delta"), 0.0);
        assert_eq!(rouge_l_score("", "x"), 0.0);
        assert!((rouge_l_score("A b C", "a B c") - 1.0).abs() < 1e-12);
    }

    fn word_text() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(vec!["the", "cat", "sat", "on", "mat", "a", "dog", ",", "."]), 0..12)
            .prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn count_is_additive(t in ".{0,40}") {
            let doubled = format!("{t} {t}");
            prop_assert_eq!(tokenize_count(&doubled).0, 2 * tokenize_count(&t).0);
        }

        #[test]
        fn appending_a_word_adds_one(t in ".{0,40}", w in "[a-z]{1,8}") {
            prop_assert_eq!(tokenize_count(&format!("{t} {w}")).0, tokenize_count(&t).0 + 1);
        }

        #[test]
        fn cosine_symmetric(a in ".{0,30}", b in ".{0,30}") {
            let ea = embed_text(&a, 64);
            let eb = embed_text(&b, 64);
            prop_assert_eq!(cosine_similarity(&ea, &eb).unwrap(), cosine_similarity(&eb, &ea).unwrap());
            let n = ea.norm();
            prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-9);
        }

        #[test]
        fn metrics_bounded(a in word_text(), b in word_text()) {
            let bl = bleu_score(&a, &b);
            let rl = rouge_l_score(&a, &b);
            prop_assert!((0.0..=1.0).contains(&bl));
            prop_assert!((0.0..=1.0).contains(&rl));
            prop_assert_eq!(rl, rouge_l_score(&b, &a));
            if !folded_tokens(&a).is_empty() && folded_tokens(&a) == folded_tokens(&b) {
                prop_assert!((bl - 1.0).abs() < 1e-12);
                prop_assert!((rl - 1.0).abs() < 1e-12);
            }
            if folded_tokens(&a) != folded_tokens(&b) {
                prop_assert!(rl < 1.0);
            }
        }
    }
}
