//! Tokenization, forbidden-letter sets and letter statistics.
//!
//! Words are maximal runs of ASCII letters, optionally joined by internal
//! apostrophes (`'` or `’`). Everything else is either whitespace or
//! punctuation. Concatenating the token texts of [`tokenize`] always
//! reproduces the input.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextError {
    #[error("invalid constraint character {0:?}: only letters a-z are allowed")]
    InvalidLetter(char),
    #[error("corpus contains no Latin letters")]
    NoLetters,
}

/// A set of forbidden letters, stored as a 26-bit mask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ConstraintSet(u32);

impl ConstraintSet {
    pub const EMPTY: ConstraintSet = ConstraintSet(0);

    pub fn single(letter: char) -> Result<Self, TextError> {
        let mut set = Self::EMPTY;
        set.insert(letter)?;
        Ok(set)
    }

    /// Parses letters case-insensitively; duplicates are ignored.
    pub fn parse(letters: &str) -> Result<Self, TextError> {
        let mut set = Self::EMPTY;
        for ch in letters.chars() {
            set.insert(ch)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, letter: char) -> Result<(), TextError> {
        let lower = letter.to_ascii_lowercase();
        if !lower.is_ascii_lowercase() {
            return Err(TextError::InvalidLetter(letter));
        }
        self.0 |= 1 << (lower as u8 - b'a');
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    /// Case-insensitive membership. Non-ASCII characters are never members.
    #[inline]
    pub fn contains(&self, ch: char) -> bool {
        let lower = ch.to_ascii_lowercase();
        lower.is_ascii_lowercase() && self.0 & (1 << (lower as u8 - b'a')) != 0
    }

    pub fn is_subset(&self, other: &ConstraintSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(&self, other: &ConstraintSet) -> ConstraintSet {
        ConstraintSet(self.0 | other.0)
    }

    pub fn letters(&self) -> impl Iterator<Item = char> + '_ {
        (0..26u8)
            .filter(|i| self.0 & (1 << i) != 0)
            .map(|i| (b'a' + i) as char)
    }
}

impl fmt::Display for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ch in self.letters() {
            write!(f, "{ch}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConstraintSet({{{self}}})")
    }
}

impl FromStr for ConstraintSet {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl From<ConstraintSet> for String {
    fn from(c: ConstraintSet) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for ConstraintSet {
    type Error = TextError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Punct,
    Space,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    /// Byte offset of the token in the tokenized string.
    pub offset: usize,
}

impl Token<'_> {
    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }
}

pub type TokenSeq<'a> = Vec<Token<'a>>;

#[inline]
pub fn is_letter(ch: char) -> bool {
    ch.is_ascii_alphabetic()
}

#[inline]
pub fn is_apostrophe(ch: char) -> bool {
    ch == '\'' || ch == '\u{2019}'
}

pub fn tokenize(text: &str) -> TokenSeq<'_> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(start, ch)) = chars.peek() {
        let kind = if is_letter(ch) {
            TokenKind::Word
        } else if ch.is_whitespace() {
            TokenKind::Space
        } else {
            TokenKind::Punct
        };
        let mut end = start;
        match kind {
            TokenKind::Word => {
                while let Some(&(i, c)) = chars.peek() {
                    let inner_apostrophe =
                        is_apostrophe(c) && text[i + c.len_utf8()..].starts_with(is_letter);
                    if is_letter(c) || inner_apostrophe {
                        chars.next();
                        end = i + c.len_utf8();
                    } else {
                        break;
                    }
                }
            }
            TokenKind::Space => {
                while let Some(&(i, c)) = chars.peek() {
                    if !c.is_whitespace() {
                        break;
                    }
                    chars.next();
                    end = i + c.len_utf8();
                }
            }
            TokenKind::Punct => {
                while let Some(&(i, c)) = chars.peek() {
                    if is_letter(c) || c.is_whitespace() {
                        break;
                    }
                    chars.next();
                    end = i + c.len_utf8();
                }
            }
        }
        tokens.push(Token {
            kind,
            text: &text[start..end],
            offset: start,
        });
    }
    tokens
}

/// Word tokens of `text`, in order.
pub fn words(text: &str) -> impl Iterator<Item = &str> {
    tokenize(text)
        .into_iter()
        .filter(Token::is_word)
        .map(|t| t.text)
}

/// Lowercases a word and folds the typographic apostrophe to ASCII.
pub fn normalize_word(word: &str) -> String {
    word.chars()
        .map(|c| {
            if c == '\u{2019}' {
                '\''
            } else {
                c.to_ascii_lowercase()
            }
        })
        .collect()
}

pub fn violates(word: &str, c: &ConstraintSet) -> bool {
    !c.is_empty() && word.chars().any(|ch| c.contains(ch))
}

pub fn strip_letters(word: &str, c: &ConstraintSet) -> String {
    word.chars().filter(|&ch| !c.contains(ch)).collect()
}

/// Copies the capitalization pattern of `original` onto `replacement`:
/// all-caps words (two or more letters) map to all-caps, otherwise only the
/// case of the first character carries over.
pub fn transfer_case(original: &str, replacement: &str) -> String {
    let letters: Vec<char> = original.chars().filter(|c| is_letter(*c)).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_ascii_uppercase()) {
        return replacement.to_ascii_uppercase();
    }
    match original.chars().next() {
        Some(first) if first.is_ascii_uppercase() => capitalize(replacement),
        _ => replacement.to_string(),
    }
}

pub fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Splits a document into paragraphs separated by one or more blank lines.
pub fn split_paragraphs(text: &str) -> Vec<String> {
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join("\n"));
    }
    paragraphs
}

pub fn join_paragraphs<S: AsRef<str>>(paragraphs: &[S]) -> String {
    let mut out = String::new();
    for (i, p) in paragraphs.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        out.push_str(p.as_ref());
    }
    out.push('\n');
    out
}

/// Per-letter counts over a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreqTable {
    counts: [u64; 26],
    total: u64,
}

impl FreqTable {
    pub fn from_counts(counts: [u64; 26]) -> Result<Self, TextError> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(TextError::NoLetters);
        }
        Ok(Self { counts, total })
    }

    pub fn count(&self, letter: char) -> u64 {
        let lower = letter.to_ascii_lowercase();
        if lower.is_ascii_lowercase() {
            self.counts[(lower as u8 - b'a') as usize]
        } else {
            0
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn freq(&self, letter: char) -> f64 {
        self.count(letter) as f64 / self.total as f64
    }

    /// Letters ordered from least to most frequent (ties alphabetical).
    pub fn ascending(&self) -> Vec<char> {
        let mut letters: Vec<char> = ('a'..='z').collect();
        letters.sort_by_key(|&l| (self.count(l), l));
        letters
    }
}

pub fn letter_frequencies(corpus: &str) -> Result<FreqTable, TextError> {
    let mut counts = [0u64; 26];
    for ch in corpus.chars() {
        let lower = ch.to_ascii_lowercase();
        if lower.is_ascii_lowercase() {
            counts[(lower as u8 - b'a') as usize] += 1;
        }
    }
    FreqTable::from_counts(counts)
}

pub fn exclusion_fraction(c: &ConstraintSet, f: &FreqTable) -> f64 {
    let excluded: u64 = c.letters().map(|l| f.count(l)).sum();
    excluded as f64 / f.total as f64
}
