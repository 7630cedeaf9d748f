//! Word-level n-gram language model with stupid-backoff scoring.
//!
//! Each paragraph is one training unit, padded with `order - 1` leading
//! `<s>` markers and a single trailing `</s>`. Every window of length
//! `1..=order` over the padded sequence is counted, so the prefix of any
//! counted n-gram is itself counted.
//!
//! Scores are not normalized probabilities. An attested n-gram scores
//! `ln(count(ngram) / count(context))`; otherwise the context is shortened
//! and `ln(alpha)` is added. At the unigram level a seen token scores
//! `ln(count / T)` and an unseen one `ln(1 / (T + V))`, where `T` is the
//! number of predicted positions and `V` the vocabulary size.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::text::{normalize_word, split_paragraphs, words};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const BOS_ID: u32 = 0;
pub const EOS_ID: u32 = 1;
/// Id used for words outside the model vocabulary.
pub const UNK_ID: u32 = u32::MAX;

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_ALPHA: f64 = 0.4;
pub const MAX_ORDER: usize = 5;

const ID_BITS: u32 = 24;
const MAX_VOCAB: usize = (1 << ID_BITS) - 1;
const HEADER_PREFIX: &str = "NGRAM-LM v1";

#[derive(Debug, Error)]
pub enum LmError {
    #[error("order must be between 1 and {MAX_ORDER}, got {0}")]
    InvalidOrder(usize),
    #[error("backoff weight must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("training corpus contains no words")]
    EmptyCorpus,
    #[error("vocabulary exceeds {MAX_VOCAB} words")]
    VocabularyTooLarge,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model file line {line}: {reason}")]
    Format { line: usize, reason: String },
}

/// Packs up to five 24-bit ids into one key.
#[inline]
fn pack(ids: &[u32]) -> u128 {
    ids.iter()
        .fold(0u128, |acc, &id| (acc << ID_BITS) | id as u128)
}

#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    alpha: f64,
    log_alpha: f64,
    vocab: Vec<String>,
    ids: FxHashMap<String, u32>,
    /// `counts[n - 1]` holds the n-gram table.
    counts: Vec<FxHashMap<u128, u64>>,
    /// Number of predicted positions (all unigram counts except `<s>`).
    predicted: u64,
}

impl NGramModel {
    pub fn train(corpus: &str, order: usize) -> Result<Self, LmError> {
        Self::train_with_alpha(corpus, order, DEFAULT_ALPHA)
    }

    pub fn train_with_alpha(corpus: &str, order: usize, alpha: f64) -> Result<Self, LmError> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(LmError::InvalidOrder(order));
        }
        let mut model = Self::empty(order, alpha)?;
        let mut any_words = false;
        for paragraph in split_paragraphs(corpus) {
            let mut seq = vec![BOS_ID; order - 1];
            for w in words(&paragraph) {
                any_words = true;
                let id = model.intern(&normalize_word(w))?;
                seq.push(id);
            }
            if seq.len() == order - 1 {
                continue;
            }
            seq.push(EOS_ID);
            for n in 1..=order {
                for window in seq.windows(n) {
                    *model.counts[n - 1].entry(pack(window)).or_insert(0) += 1;
                }
            }
        }
        if !any_words {
            return Err(LmError::EmptyCorpus);
        }
        model.finish();
        Ok(model)
    }

    fn empty(order: usize, alpha: f64) -> Result<Self, LmError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(LmError::InvalidAlpha(alpha));
        }
        let mut model = NGramModel {
            order,
            alpha,
            log_alpha: alpha.ln(),
            vocab: Vec::new(),
            ids: FxHashMap::default(),
            counts: vec![FxHashMap::default(); order],
            predicted: 0,
        };
        model.intern(BOS)?;
        model.intern(EOS)?;
        Ok(model)
    }

    fn intern(&mut self, word: &str) -> Result<u32, LmError> {
        if let Some(&id) = self.ids.get(word) {
            return Ok(id);
        }
        if self.vocab.len() >= MAX_VOCAB {
            return Err(LmError::VocabularyTooLarge);
        }
        let id = self.vocab.len() as u32;
        self.vocab.push(word.to_string());
        self.ids.insert(word.to_string(), id);
        Ok(id)
    }

    fn finish(&mut self) {
        self.predicted = self.counts[0]
            .iter()
            .filter(|(&k, _)| k != BOS_ID as u128)
            .map(|(_, &c)| c)
            .sum();
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Vocabulary size, including both boundary markers.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn total_predicted(&self) -> u64 {
        self.predicted
    }

    pub fn ngram_types(&self, n: usize) -> usize {
        self.counts.get(n.wrapping_sub(1)).map_or(0, |t| t.len())
    }

    pub fn id(&self, word: &str) -> u32 {
        self.ids.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ids.contains_key(&normalize_word(word))
    }

    /// Count of an n-gram given as ids; zero when any id is unknown.
    pub fn count_ids(&self, ids: &[u32]) -> u64 {
        if ids.is_empty() || ids.len() > self.order || ids.contains(&UNK_ID) {
            return 0;
        }
        self.counts[ids.len() - 1]
            .get(&pack(ids))
            .copied()
            .unwrap_or(0)
    }

    pub fn count(&self, ngram: &[&str]) -> u64 {
        let ids: Vec<u32> = ngram.iter().map(|w| self.id(&normalize_word(w))).collect();
        self.count_ids(&ids)
    }

    /// Words other than the boundary markers, most frequent first, ties
    /// broken lexicographically.
    pub fn words_by_frequency(&self) -> Vec<&str> {
        let mut ws: Vec<(u64, &str)> = self
            .vocab
            .iter()
            .enumerate()
            .skip(2)
            .map(|(id, w)| {
                (
                    self.counts[0].get(&(id as u128)).copied().unwrap_or(0),
                    w.as_str(),
                )
            })
            .collect();
        ws.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        ws.into_iter().map(|(_, w)| w).collect()
    }

    /// Stupid-backoff log score of `token` after `context` (both as ids).
    /// Only the last `order - 1` context ids are used.
    pub fn score_ids(&self, context: &[u32], token: u32) -> f64 {
        let keep = context.len().min(self.order - 1);
        let ctx = &context[context.len() - keep..];
        let mut penalty = 0.0;
        if token != UNK_ID {
            let mut buf = [0u32; MAX_ORDER];
            for k in (1..=ctx.len()).rev() {
                let hist = &ctx[ctx.len() - k..];
                if !hist.contains(&UNK_ID) {
                    buf[..k].copy_from_slice(hist);
                    buf[k] = token;
                    let full = self.counts[k].get(&pack(&buf[..=k])).copied().unwrap_or(0);
                    if full > 0 {
                        let denom = self.counts[k - 1].get(&pack(hist)).copied().unwrap_or(0);
                        return penalty + (full as f64 / denom as f64).ln();
                    }
                }
                penalty += self.log_alpha;
            }
        } else {
            penalty = self.log_alpha * ctx.len() as f64;
        }
        penalty + self.unigram_score(token)
    }

    fn unigram_score(&self, token: u32) -> f64 {
        let count = if token == UNK_ID {
            0
        } else {
            self.counts[0].get(&(token as u128)).copied().unwrap_or(0)
        };
        if count > 0 {
            (count as f64 / self.predicted as f64).ln()
        } else {
            (1.0 / (self.predicted + self.vocab.len() as u64) as f64).ln()
        }
    }

    pub fn token_logscore(&self, context: &[&str], token: &str) -> f64 {
        let ctx: Vec<u32> = context.iter().map(|w| self.marker_or_word_id(w)).collect();
        self.score_ids(&ctx, self.marker_or_word_id(token))
    }

    fn marker_or_word_id(&self, w: &str) -> u32 {
        match w {
            BOS => BOS_ID,
            EOS => EOS_ID,
            _ => self.id(&normalize_word(w)),
        }
    }

    /// Sum of per-token scores, with `order - 1` leading `<s>` markers as
    /// the initial context.
    pub fn sequence_logscore(&self, tokens: &[&str]) -> f64 {
        let mut ctx = vec![BOS_ID; self.order - 1];
        let mut total = 0.0;
        for tok in tokens {
            let id = self.marker_or_word_id(tok);
            total += self.score_ids(&ctx, id);
            ctx.push(id);
        }
        total
    }

    fn ngram_text(&self, key: u128, n: usize) -> String {
        let mask = (1u128 << ID_BITS) - 1;
        let mut out = String::new();
        for i in (0..n).rev() {
            let id = ((key >> (ID_BITS as usize * i)) & mask) as usize;
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&self.vocab[id]);
        }
        out
    }

    /// Serializes the model. Lines within a section are sorted, so equal
    /// models produce identical bytes.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{HEADER_PREFIX} order={} alpha={}\n",
            self.order, self.alpha
        );
        for n in 1..=self.order {
            let _ = writeln!(out, "\n[{n}-grams]");
            let mut lines: Vec<(String, u64)> = self.counts[n - 1]
                .iter()
                .map(|(&k, &c)| (self.ngram_text(k, n), c))
                .collect();
            lines.sort();
            for (text, count) in lines {
                let _ = writeln!(out, "{count}\t{text}");
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, LmError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or(LmError::Format {
            line: 1,
            reason: "empty model file".into(),
        })?;
        let (order, alpha) = parse_header(header)?;
        let mut model = Self::empty(order, alpha).map_err(|e| LmError::Format {
            line: 1,
            reason: e.to_string(),
        })?;
        let mut section = 0usize;
        let mut last_line = 1;
        for (line_no, line) in lines {
            last_line = line_no;
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                let expected = format!("[{}-grams]", section + 1);
                if line != expected || section == order {
                    return Err(LmError::Format {
                        line: line_no,
                        reason: format!("malformed section header {line:?}, expected {expected:?}"),
                    });
                }
                section += 1;
                continue;
            }
            if section == 0 {
                return Err(LmError::Format {
                    line: line_no,
                    reason: "n-gram line before the first section header".into(),
                });
            }
            let bad = |reason: String| LmError::Format {
                line: line_no,
                reason,
            };
            let (count, ngram) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected count<TAB>tokens".into()))?;
            let count: u64 = count
                .parse()
                .map_err(|_| bad(format!("invalid count {count:?}")))?;
            let toks: Vec<&str> = ngram.split(' ').collect();
            if toks.len() != section || toks.iter().any(|t| t.is_empty()) {
                return Err(bad(format!("expected {section} tokens, found {ngram:?}")));
            }
            let mut ids = Vec::with_capacity(section);
            for t in toks {
                ids.push(model.intern(t).map_err(|e| bad(e.to_string()))?);
            }
            model.counts[section - 1].insert(pack(&ids), count);
        }
        if section != order {
            return Err(LmError::Format {
                line: last_line,
                reason: format!("truncated model: found {section} of {order} sections"),
            });
        }
        model.finish();
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LmError> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| LmError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LmError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| LmError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }
}

fn parse_header(header: &str) -> Result<(usize, f64), LmError> {
    let bad = |reason: String| LmError::Format { line: 1, reason };
    let rest = header.strip_prefix(HEADER_PREFIX).ok_or_else(|| {
        bad(format!(
            "unsupported header {header:?}, expected {HEADER_PREFIX:?}"
        ))
    })?;
    let mut order = None;
    let mut alpha = None;
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("order", v)) => order = v.parse::<usize>().ok(),
            Some(("alpha", v)) => alpha = v.parse::<f64>().ok(),
            _ => return Err(bad(format!("unexpected header field {field:?}"))),
        }
    }
    let order = order.ok_or_else(|| bad("missing or invalid order".into()))?;
    let alpha = alpha.ok_or_else(|| bad("missing or invalid alpha".into()))?;
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(bad(LmError::InvalidOrder(order).to_string()));
    }
    Ok((order, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bigram_counts() {
        let m = NGramModel::train("a b a b", 2).unwrap();
        assert_eq!(m.count(&["a", "b"]), 2);
        assert_eq!(m.count(&["b", "a"]), 1);
        assert_eq!(m.count(&[BOS, "a"]), 1);
        assert_eq!(m.count(&["b", EOS]), 1);
    }

    #[test]
    fn unigram_counts() {
        let m = NGramModel::train("a a a", 1).unwrap();
        assert_eq!(m.count(&["a"]), 3);
        assert_eq!(m.total_predicted(), 4);
    }

    #[test]
    fn invalid_order_and_corpus() {
        assert!(matches!(
            NGramModel::train("a b", 0),
            Err(LmError::InvalidOrder(0))
        ));
        assert!(matches!(
            NGramModel::train("a b", 6),
            Err(LmError::InvalidOrder(6))
        ));
        assert!(matches!(
            NGramModel::train("", 3),
            Err(LmError::EmptyCorpus)
        ));
        assert!(matches!(
            NGramModel::train("... !!", 3),
            Err(LmError::EmptyCorpus)
        ));
    }

    #[test]
    fn prefix_counts_present() {
        let m = NGramModel::train("the cat sat\n\nthe dog sat on the mat", 3).unwrap();
        for n in 2..=3 {
            for &key in m.counts[n - 1].keys() {
                let prefix = key >> ID_BITS;
                assert!(m.counts[n - 2].get(&prefix).copied().unwrap_or(0) > 0);
            }
        }
        assert!(m.contains("<s>") && m.contains("</s>"));
    }

    #[test]
    fn attested_ratio_one_scores_zero() {
        let m = NGramModel::train("a b a b", 2).unwrap();
        // count(a b) = 2, count(a) = 2
        assert_eq!(m.token_logscore(&["a"], "b"), 0.0);
    }

    #[test]
    fn unseen_token_floor() {
        let m = NGramModel::train("a b a b", 2).unwrap();
        // T = 5 predicted positions (a, b, a, b, </s>), V = 4 (<s>, </s>, a, b)
        let want = (1.0f64 / 9.0).ln();
        assert_eq!(m.token_logscore(&[], "zebra"), want);
        assert_eq!(m.token_logscore(&["a"], "zebra"), 0.4f64.ln() + want);
    }

    #[test]
    fn one_backoff_step() {
        // trigram "x b a" unseen, bigram "b a" seen once, count(b) = 2
        let m = NGramModel::train("a b a b\n\nx b", 3).unwrap();
        assert_eq!(m.count(&["x", "b", "a"]), 0);
        assert_eq!(m.count(&["b", "a"]), 1);
        assert_eq!(m.count(&["b"]), 3);
        let m = NGramModel::train("a b a b", 3).unwrap();
        assert_eq!(m.count(&["b", "a"]), 1);
        assert_eq!(m.count(&["b"]), 2);
        let got = m.token_logscore(&["x", "b"], "a");
        assert!((got - (0.4f64.ln() + 0.5f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn sequence_scores() {
        let m = NGramModel::train("a b c\n\nb c a\n\nc a b", 3).unwrap();
        assert_eq!(m.sequence_logscore(&[]), 0.0);
        assert_eq!(
            m.sequence_logscore(&["b"]),
            m.token_logscore(&[BOS, BOS], "b")
        );
        let two = m.sequence_logscore(&["b", "c"]);
        let direct = m.token_logscore(&[BOS, BOS], "b") + m.token_logscore(&[BOS, "b"], "c");
        assert_eq!(two, direct);
    }

    #[test]
    fn save_load_preserves_order_and_alpha() {
        let m = NGramModel::train_with_alpha("a b c d\n\nd c b a", 3, 0.35).unwrap();
        let back = NGramModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back.order(), 3);
        assert_eq!(back.alpha(), 0.35);
        assert_eq!(back.total_predicted(), m.total_predicted());
        assert_eq!(back.to_text(), m.to_text());
    }

    #[test]
    fn truncated_and_bad_headers_rejected() {
        let m = NGramModel::train("a b c d\n\nd c b a", 3).unwrap();
        let text = m.to_text();
        let cut = text.find("[3-grams]").unwrap();
        assert!(matches!(
            NGramModel::from_text(&text[..cut]),
            Err(LmError::Format { .. })
        ));
        let v2 = text.replacen("NGRAM-LM v1", "NGRAM-LM v2", 1);
        assert!(NGramModel::from_text(&v2).is_err());
        let bad_section = text.replacen("[2-grams]", "[two-grams]", 1);
        let err = NGramModel::from_text(&bad_section).unwrap_err().to_string();
        assert!(err.contains("section header"), "{err}");
        assert!(NGramModel::from_text("").is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = "one two three two one\n\nthree three two";
        let a = NGramModel::train(corpus, 3).unwrap().to_text();
        let b = NGramModel::train(corpus, 3).unwrap().to_text();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn scores_never_positive(
            corpus in proptest::collection::vec("[a-e]{1,2}", 1..40),
            ctx in proptest::collection::vec("[a-f]{1,2}", 0..4),
            tok in "[a-f]{1,2}",
        ) {
            let m = NGramModel::train(&corpus.join(" "), 3).unwrap();
            let ctx: Vec<&str> = ctx.iter().map(String::as_str).collect();
            prop_assert!(m.token_logscore(&ctx, &tok) <= 0.0);
            prop_assert!(m.token_logscore(&ctx, EOS) <= 0.0);
        }

        #[test]
        fn round_trip_scores_bit_exact(
            corpus in proptest::collection::vec("[a-e]{1,2}", 1..60),
            queries in proptest::collection::vec(proptest::collection::vec("[a-f]{1,2}", 0..6), 1..20),
        ) {
            let m = NGramModel::train(&corpus.join(" "), 3).unwrap();
            let back = NGramModel::from_text(&m.to_text()).unwrap();
            for q in &queries {
                let q: Vec<&str> = q.iter().map(String::as_str).collect();
                prop_assert_eq!(
                    m.sequence_logscore(&q).to_bits(),
                    back.sequence_logscore(&q).to_bits()
                );
            }
        }
    }
}
