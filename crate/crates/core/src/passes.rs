//! Document-level consistency and post-processing passes.
//!
//! Named entities are found heuristically (capitalized word runs away from
//! sentence starts, plus honorific-led names) and each receives one fixed
//! constraint-free alias for the whole document. The remaining passes clean
//! up decoder output: pronoun substitution, punctuation normalization,
//! list removal, similarity-driven suffix trimming and grammar fixes.

use std::collections::{HashMap, HashSet};
use std::sync::LazyLock;

use log::{debug, warn};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::metrics::embedding::{cosine_similarity, Embedder};
use crate::providers::{GrammarProvider, ProviderError};
use crate::text::{
    normalize_word, split_paragraphs, strip_letters, tokenize, violates, ConstraintSet, Token,
    TokenKind,
};

pub const DEFAULT_WINDOW: usize = 25;
/// Comma-separated runs of this many single words are dropped.
pub const LONG_LIST_ITEMS: usize = 8;

const HONORIFICS: &[&str] = &["Mr", "Mrs", "Miss", "Dr"];
const PRONOUNS: &[&str] = &[
    "he", "she", "him", "her", "his", "hers", "they", "them", "their",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityAlias {
    pub entity: String,
    pub alias: String,
}

/// Entity surface forms and their aliases, in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMap {
    pub entries: Vec<EntityAlias>,
    pub window_size: usize,
    pub constraint: ConstraintSet,
}

impl EntityMap {
    pub fn new(constraint: ConstraintSet) -> Self {
        EntityMap {
            entries: Vec::new(),
            window_size: DEFAULT_WINDOW,
            constraint,
        }
    }

    pub fn alias(&self, entity: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.entity == entity)
            .map(|e| e.alias.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn letter_run(word: &str) -> &str {
    let end = word
        .find(|c: char| !c.is_ascii_alphabetic())
        .unwrap_or(word.len());
    &word[..end]
}

fn is_capitalized(word: &str) -> bool {
    word.starts_with(|c: char| c.is_ascii_uppercase())
}

fn is_first_person(word: &str) -> bool {
    letter_run(word) == "I"
}

fn is_honorific(word: &str) -> bool {
    HONORIFICS.contains(&word)
}

fn ends_sentence(punct: &str) -> bool {
    punct.contains([
        '.', '!', '?', ':', ';', '"', '\u{201c}', '\u{201d}', '\u{2018}',
    ])
}

/// Byte spans of entity mentions in one paragraph.
fn entity_spans(paragraph: &str) -> Vec<(usize, usize)> {
    let toks = tokenize(paragraph);
    let name_word = |t: &Token| t.is_word() && is_capitalized(t.text) && !is_first_person(t.text);
    let mut spans = Vec::new();
    let mut at_start = true;
    let mut i = 0;
    while i < toks.len() {
        let tok = &toks[i];
        match tok.kind {
            TokenKind::Space => {
                i += 1;
                continue;
            }
            TokenKind::Punct => {
                if ends_sentence(tok.text) {
                    at_start = true;
                }
                i += 1;
                continue;
            }
            TokenKind::Word if !name_word(tok) => {
                at_start = false;
                i += 1;
                continue;
            }
            TokenKind::Word => {}
        }
        // collect a maximal run of capitalized words
        let mut run = vec![i];
        let mut j = i;
        loop {
            let mut k = j + 1;
            if is_honorific(toks[j].text) && toks.get(k).is_some_and(|t| t.text == ".") {
                k += 1;
            }
            let spaced = toks.get(k).is_some_and(|t| t.text == " ");
            match toks.get(k + 1) {
                Some(next) if spaced && name_word(next) => {
                    j = k + 1;
                    run.push(j);
                }
                _ => break,
            }
        }
        let mut first = 0;
        if at_start && !is_honorific(toks[run[0]].text) {
            first = 1;
        }
        let words = &run[first..];
        let lone_honorific = words.len() == 1 && is_honorific(toks[words[0]].text);
        if !words.is_empty() && !lone_honorific {
            let s = toks[words[0]].offset;
            let last = &toks[*words.last().unwrap()];
            spans.push((s, last.offset + last.text.len()));
        }
        at_start = false;
        i = j + 1;
        // a trailing honorific's period does not end the sentence
        if is_honorific(toks[j].text) && toks.get(i).is_some_and(|t| t.text == ".") {
            i += 1;
        }
    }
    spans
}

fn make_alias(entity: &str, c: &ConstraintSet) -> String {
    strip_letters(entity, c)
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn build_entity_table<S: AsRef<str>>(document: &[S], c: &ConstraintSet) -> EntityMap {
    let mut map = EntityMap::new(*c);
    let mut known: HashSet<String> = HashSet::new();
    let mut taken: HashSet<String> = HashSet::new();
    for paragraph in document {
        let p = paragraph.as_ref();
        for (s, e) in entity_spans(p) {
            let entity = &p[s..e];
            if !known.insert(entity.to_string()) {
                continue;
            }
            let base = make_alias(entity, c);
            let mut alias = base.clone();
            let mut n = 2;
            while alias.is_empty() || taken.contains(&alias) {
                alias = format!("{base}{n}");
                n += 1;
            }
            taken.insert(alias.clone());
            map.entries.push(EntityAlias {
                entity: entity.to_string(),
                alias,
            });
        }
    }
    map
}

/// Surface forms indexed by their leading letter run, longest first.
struct SurfaceIndex<'m> {
    by_head: HashMap<&'m str, Vec<(&'m str, usize)>>,
}

impl<'m> SurfaceIndex<'m> {
    fn new(forms: impl Iterator<Item = (&'m str, usize)>) -> Self {
        let mut by_head: HashMap<&str, Vec<(&str, usize)>> = HashMap::new();
        for (form, id) in forms {
            let head = letter_run(form);
            if !head.is_empty() {
                by_head.entry(head).or_default().push((form, id));
            }
        }
        for v in by_head.values_mut() {
            v.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)));
            v.dedup_by(|a, b| a.0 == b.0);
        }
        SurfaceIndex { by_head }
    }

    /// Longest form matching at `offset`, ending at a word boundary.
    fn match_at(&self, text: &str, offset: usize, word: &str) -> Option<(&'m str, usize)> {
        let cands = self.by_head.get(letter_run(word))?;
        let rest = &text[offset..];
        cands.iter().copied().find(|(form, _)| {
            rest.starts_with(form)
                && !rest[form.len()..].starts_with(|c: char| c.is_ascii_alphabetic())
        })
    }
}

/// Replaces every entity mention by its alias, longest match first.
pub fn apply_entity_map(text: &str, map: &EntityMap) -> String {
    let index = SurfaceIndex::new(
        map.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.entity != e.alias)
            .map(|(i, e)| (e.entity.as_str(), i)),
    );
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    for tok in tokenize(text) {
        if tok.offset < pos || !tok.is_word() {
            continue;
        }
        if let Some((form, id)) = index.match_at(text, tok.offset, tok.text) {
            out.push_str(&text[pos..tok.offset]);
            out.push_str(&map.entries[id].alias);
            pos = tok.offset + form.len();
        }
    }
    out.push_str(&text[pos..]);
    out
}

const OBJECT_FOLLOWERS: &[&str] = &[
    "a", "about", "again", "and", "as", "at", "away", "back", "but", "by", "down", "for", "from",
    "if", "in", "into", "is", "of", "off", "on", "or", "out", "over", "so", "than", "that", "the",
    "then", "to", "up", "was", "when", "with",
];

fn is_possessive(pronoun: &str, next_word: Option<&str>) -> bool {
    match pronoun {
        "his" | "hers" | "their" => true,
        "her" => next_word.is_some_and(|w| !OBJECT_FOLLOWERS.contains(&normalize_word(w).as_str())),
        _ => false,
    }
}

/// Replaces third-person pronouns by an alias when exactly one entity is
/// mentioned in the preceding `window_size` words.
pub fn resolve_pronouns(text: &str, map: &EntityMap, window_size: usize) -> String {
    let index = SurfaceIndex::new(
        map.entries
            .iter()
            .enumerate()
            .flat_map(|(i, e)| [(e.entity.as_str(), i), (e.alias.as_str(), i)]),
    );
    let toks = tokenize(text);
    // (word index, entity id) of each mention
    let mut mentions: Vec<(usize, usize)> = Vec::new();
    let mut word_index = 0;
    let mut skip_until = 0;
    let mut word_starts: Vec<usize> = Vec::new();
    for (t, tok) in toks.iter().enumerate() {
        if !tok.is_word() {
            continue;
        }
        word_starts.push(t);
        if tok.offset >= skip_until {
            if let Some((form, id)) = index.match_at(text, tok.offset, tok.text) {
                mentions.push((word_index, id));
                skip_until = tok.offset + form.len();
            }
        }
        word_index += 1;
    }
    let s_forbidden = map.constraint.contains('s');
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    for (wi, &t) in word_starts.iter().enumerate() {
        let tok = &toks[t];
        let lower = normalize_word(tok.text);
        if !PRONOUNS.contains(&lower.as_str()) {
            continue;
        }
        let lo = wi.saturating_sub(window_size);
        let mut ids: Vec<usize> = mentions
            .iter()
            .filter(|(w, _)| *w >= lo && *w < wi)
            .map(|&(_, id)| id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != 1 {
            continue;
        }
        let alias = &map.entries[ids[0]].alias;
        let next = word_starts.get(wi + 1).map(|&n| toks[n].text);
        let replacement = if is_possessive(&lower, next) {
            if s_forbidden {
                continue;
            }
            format!("{alias}'s")
        } else {
            alias.clone()
        };
        out.push_str(&text[pos..tok.offset]);
        out.push_str(&replacement);
        pos = tok.offset + tok.text.len();
    }
    out.push_str(&text[pos..]);
    out
}

static MULTI_SINGLE_QUOTES: LazyLock<Regex> =
    LazyLock::new(|| Regex::new("['\u{2019}]{2,}").unwrap());
static SPACE_BEFORE_STOP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[ \t]+([,.!?])").unwrap());
static COMMA_BEFORE_WORD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r",[ \t]*([A-Za-z])").unwrap());
static SPACE_RUN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[ \t]{2,}").unwrap());

/// Removes spaces just inside paired double quotes.
fn tighten_quotes(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut open = false;
    for ch in text.chars() {
        if ch == '"' {
            if !open {
                out.push(ch);
            } else {
                let trimmed = out.trim_end_matches([' ', '\t']).len();
                out.truncate(trimmed);
                out.push(ch);
            }
            open = !open;
        } else if open && (ch == ' ' || ch == '\t') && out.ends_with('"') {
            continue;
        } else {
            out.push(ch);
        }
    }
    out
}

fn normalize_once(paragraph: &str) -> String {
    let s = paragraph.replace("``", "\"");
    let s = MULTI_SINGLE_QUOTES.replace_all(&s, "\"");
    let s = SPACE_BEFORE_STOP.replace_all(&s, "$1");
    let s = COMMA_BEFORE_WORD.replace_all(&s, ", $1");
    tighten_quotes(&s).trim().to_string()
}

/// Quote and spacing cleanup. Paragraphs (blank-line separated) are
/// normalized independently and empty ones are dropped.
pub fn normalize_punctuation(text: &str) -> String {
    let mut paragraphs = Vec::new();
    for p in split_paragraphs(text) {
        let mut cur = p;
        // the rules can expose one another's patterns; iterate to a fixpoint
        for _ in 0..8 {
            let next = normalize_once(&cur);
            if next == cur {
                break;
            }
            cur = next;
        }
        if !cur.is_empty() {
            paragraphs.push(cur);
        }
    }
    paragraphs.join("\n\n")
}

/// Drops runs of [`LONG_LIST_ITEMS`] or more comma-separated single words.
pub fn drop_long_lists(text: &str) -> String {
    let toks = tokenize(text);
    let mut cuts: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if !toks[i].is_word() {
            i += 1;
            continue;
        }
        let mut items = 1;
        let mut j = i;
        loop {
            let mut k = j + 1;
            if toks.get(k).is_none_or(|t| t.text != ",") {
                break;
            }
            k += 1;
            if toks
                .get(k)
                .is_some_and(|t| t.kind == TokenKind::Space && !t.text.contains('\n'))
            {
                k += 1;
            }
            match toks.get(k) {
                Some(t) if t.is_word() => {
                    items += 1;
                    j = k;
                }
                _ => break,
            }
        }
        if items >= LONG_LIST_ITEMS {
            cuts.push((toks[i].offset, toks[j].offset + toks[j].text.len()));
        }
        i = j + 1;
    }
    if cuts.is_empty() {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    for (s, e) in cuts {
        out.push_str(&text[pos..s]);
        pos = e;
    }
    out.push_str(&text[pos..]);
    let out = SPACE_RUN.replace_all(&out, " ");
    SPACE_BEFORE_STOP.replace_all(&out, "$1").trim().to_string()
}

/// The word-boundary prefix of `text` most similar to `source`; the
/// longest such prefix on ties. Text without words is returned as is.
pub fn trim_suffix(
    text: &str,
    source: &str,
    embedder: &dyn Embedder,
) -> Result<String, ProviderError> {
    let mut cuts: Vec<usize> = tokenize(text)
        .iter()
        .filter(|t| t.is_word())
        .map(|t| t.offset + t.text.len())
        .collect();
    if cuts.is_empty() {
        return Ok(text.to_string());
    }
    if cuts.last() != Some(&text.len()) {
        cuts.push(text.len());
    }
    let mut batch: Vec<&str> = vec![source];
    batch.extend(cuts.iter().map(|&c| &text[..c]));
    let vecs = embedder.embed_batch(&batch)?;
    let mut best = cuts.len() - 1;
    let mut best_sim = f64::NEG_INFINITY;
    for i in (0..cuts.len()).rev() {
        let sim = cosine_similarity(&vecs[0], &vecs[i + 1]);
        if sim > best_sim {
            best = i;
            best_sim = sim;
        }
    }
    Ok(text[..cuts[best]].to_string())
}

/// Applies the provider's suggestions whose replacement text is
/// constraint-free. Provider failures leave the text unchanged.
pub fn grammar_correct(text: &str, c: &ConstraintSet, provider: &dyn GrammarProvider) -> String {
    let mut matches = match provider.check(text) {
        Ok(m) => m,
        Err(e) => {
            warn!("grammar check skipped: {e}");
            return text.to_string();
        }
    };
    matches.sort_by_key(|m| (m.offset, m.length));
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    for m in matches {
        let Some(replacement) = m.replacement.as_deref() else {
            continue;
        };
        let end = m.offset.saturating_add(m.length);
        if m.offset < pos
            || end > text.len()
            || !text.is_char_boundary(m.offset)
            || !text.is_char_boundary(end)
        {
            debug!(
                "ignoring overlapping or out-of-range grammar match at {}",
                m.offset
            );
            continue;
        }
        if violates(replacement, c) {
            debug!("skipping suggestion {replacement:?}: violates the constraint");
            continue;
        }
        out.push_str(&text[pos..m.offset]);
        out.push_str(replacement);
        pos = end;
    }
    out.push_str(&text[pos..]);
    out
}

/// Preferred surface form of each word, learned from a corpus.
#[derive(Debug, Clone, Default)]
pub struct CasingTable {
    forms: HashMap<String, String>,
}

impl CasingTable {
    pub fn from_corpus(corpus: &str) -> Self {
        let mut counts: HashMap<String, HashMap<&str, u64>> = HashMap::new();
        for tok in tokenize(corpus) {
            if tok.is_word() {
                *counts
                    .entry(normalize_word(tok.text))
                    .or_default()
                    .entry(tok.text)
                    .or_insert(0) += 1;
            }
        }
        let mut forms = HashMap::new();
        for (word, surfaces) in counts {
            let best = surfaces
                .iter()
                .max_by(|a, b| {
                    a.1.cmp(b.1)
                        .then_with(|| (*a.0 == word).cmp(&(*b.0 == word)))
                        .then_with(|| b.0.cmp(a.0))
                })
                .map(|(s, _)| normalize_apostrophe(s));
            if let Some(best) = best {
                if best != word {
                    forms.insert(word, best);
                }
            }
        }
        CasingTable { forms }
    }

    pub fn get(&self, word: &str) -> Option<&str> {
        self.forms.get(word).map(String::as_str)
    }
}

fn normalize_apostrophe(s: &str) -> String {
    s.replace('\u{2019}', "'")
}
