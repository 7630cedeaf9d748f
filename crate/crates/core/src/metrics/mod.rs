//! Translation quality metrics.
//!
//! All percentages are on a 0–100 scale and count word tokens as produced
//! by [`crate::text::tokenize`].

pub mod embedding;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::Dictionary;
use crate::providers::{GrammarProvider, ProviderError};
use crate::text::{tokenize, violates, words, ConstraintSet, TokenKind};

use embedding::{cosine_similarity, Embedder};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("readability is undefined for text without words")]
    NoWords,
    #[error(
        "paragraph count mismatch: source has {source_count}, candidate has {candidate_count}"
    )]
    ParagraphMismatch {
        source_count: usize,
        candidate_count: usize,
    },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64 * 100.0
    }
}

/// Percentage of word tokens containing a forbidden letter.
pub fn e_score(text: &str, c: &ConstraintSet) -> f64 {
    let (mut total, mut bad) = (0, 0);
    for w in words(text) {
        total += 1;
        if violates(w, c) {
            bad += 1;
        }
    }
    percent(bad, total)
}

/// Percentage of word tokens missing from the dictionary.
pub fn oov_score(text: &str, dictionary: &Dictionary) -> f64 {
    let (mut total, mut missing) = (0, 0);
    for w in words(text) {
        total += 1;
        if !dictionary.contains(w) {
            missing += 1;
        }
    }
    percent(missing, total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrammarCount {
    pub count: usize,
    pub percent_of_words: f64,
}

pub fn grammar_mistakes(
    text: &str,
    provider: &dyn GrammarProvider,
) -> Result<GrammarCount, ProviderError> {
    let n_words = words(text).count();
    if text.trim().is_empty() {
        return Ok(GrammarCount {
            count: 0,
            percent_of_words: 0.0,
        });
    }
    let count = provider.check(text)?.len();
    Ok(GrammarCount {
        count,
        percent_of_words: percent(count, n_words),
    })
}

/// Vowel groups (with `y` as a vowel), at least one per word.
pub fn syllables(word: &str) -> usize {
    let mut groups = 0;
    let mut in_vowel = false;
    for ch in word.chars().map(|c| c.to_ascii_lowercase()) {
        let vowel = matches!(ch, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
        if vowel && !in_vowel {
            groups += 1;
        }
        in_vowel = vowel;
    }
    groups.max(1)
}

/// Sentences are word-bearing stretches between runs of `.`, `!` or `?`;
/// a text with words always has at least one.
fn sentence_count(text: &str) -> usize {
    let mut sentences = 0;
    let mut pending = false;
    for tok in tokenize(text) {
        match tok.kind {
            TokenKind::Word => pending = true,
            TokenKind::Punct if tok.text.contains(['.', '!', '?']) => {
                if pending {
                    sentences += 1;
                }
                pending = false;
            }
            _ => {}
        }
    }
    if pending {
        sentences += 1;
    }
    sentences.max(1)
}

/// Flesch Reading Ease. Higher means easier.
pub fn readability(text: &str) -> Result<f64, MetricsError> {
    let ws: Vec<&str> = words(text).collect();
    if ws.is_empty() {
        return Err(MetricsError::NoWords);
    }
    let n_words = ws.len() as f64;
    let n_syllables: usize = ws.iter().map(|w| syllables(w)).sum();
    let n_sentences = sentence_count(text) as f64;
    Ok(206.835 - 1.015 * (n_words / n_sentences) - 84.6 * (n_syllables as f64 / n_words))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphMetrics {
    pub index: usize,
    pub similarity: f64,
    pub e_score: f64,
    pub oov: f64,
    pub grammar_count: usize,
    pub grammar_pct: f64,
    /// Flesch Reading Ease; absent for paragraphs without words.
    pub readability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub similarity: f64,
    pub e_score: f64,
    pub oov: f64,
    pub grammar_count: f64,
    pub grammar_pct: f64,
    /// Mean over the paragraphs that have a readability score.
    pub readability: Option<f64>,
    pub readability_metric: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub paragraphs: Vec<ParagraphMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregates: Option<Aggregates>,
    #[serde(default)]
    pub config_echo: serde_json::Value,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl EvaluationReport {
    pub fn from_paragraphs(paragraphs: Vec<ParagraphMetrics>) -> Self {
        let aggregates = if paragraphs.is_empty() {
            None
        } else {
            let p = &paragraphs;
            Some(Aggregates {
                similarity: mean(p.iter().map(|m| m.similarity)).unwrap_or(0.0),
                e_score: mean(p.iter().map(|m| m.e_score)).unwrap_or(0.0),
                oov: mean(p.iter().map(|m| m.oov)).unwrap_or(0.0),
                grammar_count: mean(p.iter().map(|m| m.grammar_count as f64)).unwrap_or(0.0),
                grammar_pct: mean(p.iter().map(|m| m.grammar_pct)).unwrap_or(0.0),
                readability: mean(p.iter().filter_map(|m| m.readability)),
                readability_metric: "flesch_reading_ease".to_string(),
            })
        };
        EvaluationReport {
            paragraphs,
            aggregates,
            config_echo: serde_json::Value::Null,
        }
    }
}

/// Scores each translated paragraph against its source paragraph.
pub fn evaluate_document<S: AsRef<str>, T: AsRef<str>>(
    source: &[S],
    translated: &[T],
    c: &ConstraintSet,
    dictionary: &Dictionary,
    grammar: &dyn GrammarProvider,
    embedder: &dyn Embedder,
) -> Result<EvaluationReport, MetricsError> {
    if source.len() != translated.len() {
        return Err(MetricsError::ParagraphMismatch {
            source_count: source.len(),
            candidate_count: translated.len(),
        });
    }
    let mut records = Vec::with_capacity(source.len());
    for (index, (src, out)) in source.iter().zip(translated).enumerate() {
        let (src, out) = (src.as_ref(), out.as_ref());
        let vecs = embedder.embed_batch(&[src, out])?;
        let grammar = grammar_mistakes(out, grammar)?;
        records.push(ParagraphMetrics {
            index,
            similarity: cosine_similarity(&vecs[0], &vecs[1]),
            e_score: e_score(out, c),
            oov: oov_score(out, dictionary),
            grammar_count: grammar.count,
            grammar_pct: grammar.percent_of_words,
            readability: readability(out).ok(),
        });
    }
    Ok(EvaluationReport::from_paragraphs(records))
}
