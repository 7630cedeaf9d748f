//! End-to-end document translation.
//!
//! The beam method runs, per document: entity table, then for each
//! paragraph alias substitution on the source, candidate generation,
//! multiselection, rendering, alias application, pronoun resolution,
//! punctuation cleanup, suffix trimming and grammar correction.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::{generate_candidates, multiselect, DecodeError, DecoderConfig};
use crate::lexicon::{translate_edelete, translate_synonym, Lexicon};
use crate::lm::NGramModel;
use crate::metrics::embedding::{Embedder, TfIdfEmbedder};
use crate::passes::{
    apply_entity_map, build_entity_table, drop_long_lists, grammar_correct, normalize_punctuation,
    resolve_pronouns, trim_suffix, CasingTable, EntityMap,
};
use crate::providers::{GrammarProvider, ProviderError};
use crate::text::{capitalize, normalize_word, strip_letters, tokenize, ConstraintSet, TokenKind};

/// Written in place of a paragraph that produced no output, so paragraph
/// counts survive a round trip through a text file.
pub const EMPTY_PARAGRAPH_MARK: &str = "\u{2026}";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Edelete,
    Synonym,
    Beam,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "edelete" => Ok(Method::Edelete),
            "synonym" => Ok(Method::Synonym),
            "beam" => Ok(Method::Beam),
            other => Err(format!(
                "unknown method {other:?}; expected edelete, synonym or beam"
            )),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Edelete => "edelete",
            Method::Synonym => "synonym",
            Method::Beam => "beam",
        })
    }
}

/// Shared, read-only inputs of a translation run.
#[derive(Clone, Copy)]
pub struct Resources<'a> {
    pub model: &'a NGramModel,
    pub lexicon: &'a Lexicon,
    /// Drives the decoder's in-search similarity term.
    pub tfidf: &'a TfIdfEmbedder,
    /// Used for multiselection and suffix trimming.
    pub similarity: &'a dyn Embedder,
    pub grammar: &'a dyn GrammarProvider,
    pub casing: &'a CasingTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    EmptyVocabulary,
    DecodeFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphWarning {
    pub index: usize,
    pub kind: WarningKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    /// One entry per source paragraph; empty when nothing was produced.
    pub paragraphs: Vec<String>,
    pub warnings: Vec<ParagraphWarning>,
    pub entities: Option<EntityMap>,
}

impl Translation {
    pub fn has_decode_failure(&self) -> bool {
        self.warnings
            .iter()
            .any(|w| w.kind == WarningKind::DecodeFailure)
    }

    /// The document as text, paragraphs separated by blank lines.
    pub fn to_document(&self) -> String {
        let shown: Vec<&str> = self
            .paragraphs
            .iter()
            .map(|p| {
                if p.trim().is_empty() {
                    EMPTY_PARAGRAPH_MARK
                } else {
                    p.as_str()
                }
            })
            .collect();
        crate::text::join_paragraphs(&shown)
    }
}

/// Joins decoded words into a sentence, restoring case from the source
/// paragraph and then from the corpus.
pub fn render(tokens: &[String], source: &str, casing: &CasingTable) -> String {
    let mut source_forms = std::collections::HashMap::new();
    let mut sentence_start = true;
    for tok in tokenize(source) {
        match tok.kind {
            TokenKind::Word => {
                let key = normalize_word(tok.text);
                if !sentence_start && tok.text != key {
                    source_forms
                        .entry(key)
                        .or_insert_with(|| tok.text.replace('\u{2019}', "'"));
                }
                sentence_start = false;
            }
            TokenKind::Punct if tok.text.contains(['.', '!', '?', '"']) => sentence_start = true,
            _ => {}
        }
    }
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        let form = casing
            .get(t)
            .or_else(|| source_forms.get(t).map(String::as_str))
            .unwrap_or(t);
        if i == 0 {
            out.push_str(&capitalize(form));
        } else {
            out.push(' ');
            out.push_str(form);
        }
    }
    if !out.is_empty() {
        out.push('.');
    }
    out
}

fn ends_with_stop(text: &str) -> bool {
    text.trim_end().ends_with(['.', '!', '?', '"'])
}

fn translate_beam_paragraph(
    paragraph: &str,
    c: &ConstraintSet,
    cfg: &DecoderConfig,
    res: &Resources,
    entities: &EntityMap,
) -> Result<String, DecodeError> {
    let aliased = apply_entity_map(paragraph, entities);
    let candidates = generate_candidates(&aliased, c, cfg, res.model, res.lexicon, res.tfidf)?;
    let best = multiselect(&candidates, paragraph, res.similarity)?;
    let text = render(&best.tokens, &aliased, res.casing);
    let text = apply_entity_map(&text, entities);
    let text = resolve_pronouns(&text, entities, entities.window_size);
    let text = normalize_punctuation(&drop_long_lists(&text));
    let mut trimmed = trim_suffix(&text, paragraph, res.similarity)?;
    if trimmed.len() < text.len() && !ends_with_stop(&trimmed) {
        trimmed.push('.');
    }
    Ok(grammar_correct(&trimmed, c, res.grammar))
}

pub fn translate_paragraph(
    paragraph: &str,
    c: &ConstraintSet,
    method: Method,
    cfg: &DecoderConfig,
    res: &Resources,
    entities: &EntityMap,
) -> Result<String, DecodeError> {
    match method {
        Method::Edelete => Ok(translate_edelete(paragraph, c)),
        Method::Synonym => Ok(translate_synonym(paragraph, c, res.lexicon)),
        Method::Beam => {
            if !tokenize(paragraph).iter().any(|t| t.is_word()) {
                return Ok(strip_letters(paragraph, c));
            }
            translate_beam_paragraph(paragraph, c, cfg, res, entities)
        }
    }
}

/// Translates every paragraph. Paragraphs that cannot be decoded become
/// empty and are reported as warnings; other failures abort the run.
pub fn translate_document<S: AsRef<str>>(
    paragraphs: &[S],
    c: &ConstraintSet,
    method: Method,
    cfg: &DecoderConfig,
    res: &Resources,
) -> Result<Translation, PipelineError> {
    cfg.validate()?;
    let entities = match method {
        Method::Beam => build_entity_table(paragraphs, c),
        _ => EntityMap::new(*c),
    };
    let mut out = Vec::with_capacity(paragraphs.len());
    let mut warnings = Vec::new();
    for (index, p) in paragraphs.iter().enumerate() {
        match translate_paragraph(p.as_ref(), c, method, cfg, res, &entities) {
            Ok(text) => out.push(text),
            Err(e @ (DecodeError::EmptyVocabulary | DecodeError::DecodeFailure(_))) => {
                let kind = match e {
                    DecodeError::EmptyVocabulary => WarningKind::EmptyVocabulary,
                    _ => WarningKind::DecodeFailure,
                };
                warn!("paragraph {index}: {e}");
                warnings.push(ParagraphWarning {
                    index,
                    kind,
                    message: e.to_string(),
                });
                out.push(String::new());
            }
            Err(DecodeError::Provider(e)) => return Err(e.into()),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Translation {
        paragraphs: out,
        warnings,
        entities: (method == Method::Beam).then_some(entities),
    })
}
