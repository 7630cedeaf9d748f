//! Synonym/lemma resource and the two substitution baselines.
//!
//! Lexicon files are tab separated, one entry per line:
//!
//! ```text
//! word<TAB>lemma<TAB>syn1,syn2,...<TAB>frequency
//! ```
//!
//! Lines starting with `#` are comments. The synonym column may be empty.
//! A dictionary file (one lowercase word per line) backs the OOV metric.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::text::{
    normalize_word, strip_letters, tokenize, transfer_case, violates, ConstraintSet,
};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub word: String,
    pub lemma: String,
    pub synonyms: Vec<String>,
    pub corpus_frequency: u64,
}

/// Set of valid lowercase words.
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    words: HashSet<String>,
}

impl Dictionary {
    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&normalize_word(word))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let text = read(path.as_ref())?;
        Ok(text.lines().collect())
    }
}

impl<'a> FromIterator<&'a str> for Dictionary {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        let words = iter
            .into_iter()
            .map(str::trim)
            .filter(|w| !w.is_empty() && !w.starts_with('#'))
            .map(normalize_word)
            .collect();
        Dictionary { words }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, LexiconEntry>,
    dictionary: Dictionary,
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut entries = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let entry = parse_entry(line).map_err(|reason| LexiconError::Malformed {
                line: line_no,
                reason,
            })?;
            entries.entry(entry.word.clone()).or_insert(entry);
        }
        Ok(Lexicon {
            entries,
            dictionary: Dictionary::default(),
        })
    }

    pub fn with_dictionary(mut self, dictionary: Dictionary) -> Self {
        self.dictionary = dictionary;
        self
    }

    pub fn from_entries(entries: impl IntoIterator<Item = LexiconEntry>) -> Self {
        let mut map = HashMap::new();
        for e in entries {
            map.entry(e.word.clone()).or_insert(e);
        }
        Lexicon {
            entries: map,
            dictionary: Dictionary::default(),
        }
    }

    pub fn get(&self, word: &str) -> Option<&LexiconEntry> {
        self.entries.get(&normalize_word(word))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    pub fn frequency(&self, word: &str) -> u64 {
        self.get(word).map_or(0, |e| e.corpus_frequency)
    }

    /// Synonyms recorded for `word`, falling back to its lemma's entry.
    fn synonyms(&self, word: &str) -> &[String] {
        match self.get(word) {
            Some(e) if !e.synonyms.is_empty() => &e.synonyms,
            Some(e) if e.lemma != e.word => self.get(&e.lemma).map_or(&[], |l| &l.synonyms),
            _ => &[],
        }
    }
}

fn parse_entry(line: &str) -> Result<LexiconEntry, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 4 {
        return Err(format!(
            "expected 4 tab-separated columns, found {}",
            cols.len()
        ));
    }
    let word = normalize_word(cols[0].trim());
    let lemma = normalize_word(cols[1].trim());
    if word.is_empty() {
        return Err("empty word column".into());
    }
    if lemma.is_empty() {
        return Err("empty lemma column".into());
    }
    let mut synonyms = Vec::new();
    for syn in cols[2].split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if syn.chars().any(char::is_whitespace) {
            return Err(format!("synonym {syn:?} contains whitespace"));
        }
        synonyms.push(normalize_word(syn));
    }
    let corpus_frequency = cols[3]
        .trim()
        .parse()
        .map_err(|_| format!("invalid frequency {:?}", cols[3]))?;
    Ok(LexiconEntry {
        word,
        lemma,
        synonyms,
        corpus_frequency,
    })
}

fn read(path: &Path) -> Result<String, LexiconError> {
    fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon, LexiconError> {
    Lexicon::parse(&read(path.as_ref())?)
}

/// Synonyms of `word` that avoid `c`, most frequent first, ties broken
/// lexicographically. The word itself is never returned.
pub fn constraint_free_synonyms(word: &str, c: &ConstraintSet, lex: &Lexicon) -> Vec<String> {
    let key = normalize_word(word);
    let mut seen = HashSet::new();
    let mut out: Vec<(u64, &String)> = lex
        .synonyms(&key)
        .iter()
        .filter(|s| **s != key && !violates(s, c) && seen.insert(s.as_str()))
        .map(|s| (lex.frequency(s), s))
        .collect();
    out.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    out.into_iter().map(|(_, s)| s.clone()).collect()
}

/// Deletes every forbidden letter from every word.
pub fn translate_edelete(paragraph: &str, c: &ConstraintSet) -> String {
    tokenize(paragraph)
        .into_iter()
        .map(|t| {
            if t.is_word() {
                strip_letters(t.text, c)
            } else {
                t.text.to_string()
            }
        })
        .collect()
}

/// Replaces each violating word by its best constraint-free synonym, or by
/// the word with its forbidden letters deleted when no synonym qualifies.
pub fn translate_synonym(paragraph: &str, c: &ConstraintSet, lex: &Lexicon) -> String {
    tokenize(paragraph)
        .into_iter()
        .map(|t| {
            if !t.is_word() || !violates(t.text, c) {
                return t.text.to_string();
            }
            match constraint_free_synonyms(t.text, c, lex).first() {
                Some(syn) => transfer_case(t.text, syn),
                None => strip_letters(t.text, c),
            }
        })
        .collect()
}
