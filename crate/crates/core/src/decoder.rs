//! Constrained beam-search paraphrasing.
//!
//! The decoder only ever emits words from an allow-list that already
//! satisfies the constraint, so soundness does not depend on scoring. Each
//! hypothesis is ranked by
//!
//! ```text
//! combined = lambda_lm * lm / n^length_penalty + lambda_sim * sim
//! ```
//!
//! where `lm` is the summed n-gram log score of the tokens scored so far
//! (`n` of them, including the end marker once finished) and `sim` is the
//! TF-IDF cosine similarity between the partial output and the source,
//! maintained incrementally as words are appended.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{constraint_free_synonyms, Lexicon};
use crate::lm::{NGramModel, BOS_ID, EOS_ID, MAX_ORDER};
use crate::metrics::embedding::{
    bigram_feature, cosine_similarity, feature_id, Embedder, TfIdfEmbedder,
};
use crate::providers::ProviderError;
use crate::text::{normalize_word, tokenize, violates, words, ConstraintSet, TokenKind};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("no constraint-free word is available to decode with")]
    EmptyVocabulary,
    #[error("source paragraph has no words")]
    EmptySource,
    #[error("decoding failed: {0}")]
    DecodeFailure(String),
    #[error("no candidates to select from")]
    NoCandidates,
    #[error("invalid decoder configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Deterministic,
    Sampled,
}

impl FromStr for DecodeMode {
    type Err = DecodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "deterministic" => Ok(DecodeMode::Deterministic),
            "sampled" => Ok(DecodeMode::Sampled),
            other => Err(DecodeError::Config(format!(
                "mode must be deterministic or sampled, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecodeMode::Deterministic => "deterministic",
            DecodeMode::Sampled => "sampled",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub beam_width: usize,
    pub candidates_k: usize,
    pub no_repeat_ngram: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Softmax temperature over expansion scores; sampled mode only.
    pub temperature: f64,
    pub lambda_lm: f64,
    pub lambda_sim: f64,
    pub candidate_vocab_size: usize,
    pub mode: DecodeMode,
    pub seed: u64,
    /// Exponent of the length normalization applied to the LM term.
    pub length_penalty: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            beam_width: 20,
            candidates_k: 10,
            no_repeat_ngram: 3,
            min_ratio: 0.5,
            max_ratio: 1.5,
            temperature: 0.9,
            lambda_lm: 1.0,
            lambda_sim: 5.0,
            candidate_vocab_size: 500,
            mode: DecodeMode::Deterministic,
            seed: 0,
            length_penalty: 1.0,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "beam_width",
    "candidates_k",
    "no_repeat_ngram",
    "min_ratio",
    "max_ratio",
    "temperature",
    "lambda_lm",
    "lambda_sim",
    "candidate_vocab_size",
    "mode",
    "seed",
    "length_penalty",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, DecodeError> {
    value
        .trim()
        .parse()
        .map_err(|_| DecodeError::Config(format!("invalid value {value:?} for {key}")))
}

impl DecoderConfig {
    /// Three candidates per paragraph instead of ten.
    pub fn small_multiselect() -> Self {
        DecoderConfig {
            candidates_k: 3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        let fail = |msg: &str| Err(DecodeError::Config(msg.to_string()));
        if self.candidates_k < 1 || self.beam_width < self.candidates_k {
            return fail("need beam_width >= candidates_k >= 1");
        }
        if !(self.min_ratio > 0.0 && self.min_ratio <= self.max_ratio && self.max_ratio.is_finite())
        {
            return fail("need 0 < min_ratio <= max_ratio");
        }
        if self.no_repeat_ngram < 2 {
            return fail("no_repeat_ngram must be at least 2");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return fail("temperature must be positive");
        }
        for (name, v) in [
            ("lambda_lm", self.lambda_lm),
            ("lambda_sim", self.lambda_sim),
            ("length_penalty", self.length_penalty),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DecodeError::Config(format!(
                    "{name} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }

    /// Sets one field by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), DecodeError> {
        match key {
            "beam_width" => self.beam_width = parse_value(key, value)?,
            "candidates_k" => self.candidates_k = parse_value(key, value)?,
            "no_repeat_ngram" => self.no_repeat_ngram = parse_value(key, value)?,
            "min_ratio" => self.min_ratio = parse_value(key, value)?,
            "max_ratio" => self.max_ratio = parse_value(key, value)?,
            "temperature" => self.temperature = parse_value(key, value)?,
            "lambda_lm" => self.lambda_lm = parse_value(key, value)?,
            "lambda_sim" => self.lambda_sim = parse_value(key, value)?,
            "candidate_vocab_size" => self.candidate_vocab_size = parse_value(key, value)?,
            "mode" => self.mode = value.parse()?,
            "seed" => self.seed = parse_value(key, value)?,
            "length_penalty" => self.length_penalty = parse_value(key, value)?,
            _ => return Err(DecodeError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment line.
    pub fn from_kv_str(text: &str) -> Result<Self, DecodeError> {
        let mut cfg = Self::default();
        for (key, value) in parse_kv_lines(text)? {
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Inclusive length bounds for a source of `source_words` words.
    pub fn length_bounds(&self, source_words: usize) -> (usize, usize) {
        let s = source_words as f64;
        let min = (self.min_ratio * s - 1e-9).ceil().max(0.0) as usize;
        let max = (self.max_ratio * s + 1e-9).floor().max(0.0) as usize;
        (min.max(1), max)
    }

    fn normalizer(&self, scored: usize) -> f64 {
        (scored as f64).powf(self.length_penalty)
    }

    fn combine(&self, lm_sum: f64, scored: usize, sim: f64) -> f64 {
        self.lambda_lm * (lm_sum / self.normalizer(scored)) + self.lambda_sim * sim
    }
}

/// Splits `key = value` lines, skipping blanks and `#` comments.
pub fn parse_kv_lines(text: &str) -> Result<Vec<(String, String)>, DecodeError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| DecodeError::Config(format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// A decoded word sequence with its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub tokens: Vec<String>,
    /// Length-normalized LM log score, including the end marker.
    pub lm_score: f64,
    pub sim_score: f64,
    pub combined: f64,
}

impl Hypothesis {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

fn is_single_word(w: &str) -> bool {
    let toks = tokenize(w);
    toks.len() == 1 && toks[0].kind == TokenKind::Word
}

/// Allow-list for one paragraph: legal source words, then legal synonyms of
/// every source word, then the `m_top` most frequent legal model words.
pub fn build_candidate_vocab(
    source: &str,
    c: &ConstraintSet,
    lex: &Lexicon,
    model: &NGramModel,
    m_top: usize,
) -> Result<Vec<String>, DecodeError> {
    let mut vocab: Vec<String> = Vec::new();
    let mut seen: FxHashMap<String, ()> = FxHashMap::default();
    let mut add = |w: String, vocab: &mut Vec<String>| {
        if !violates(&w, c) && is_single_word(&w) && !seen.contains_key(&w) {
            seen.insert(w.clone(), ());
            vocab.push(w);
        }
    };
    let source_words: Vec<String> = words(source).map(normalize_word).collect();
    for w in &source_words {
        add(w.clone(), &mut vocab);
    }
    for w in &source_words {
        for syn in constraint_free_synonyms(w, c, lex) {
            add(syn, &mut vocab);
        }
    }
    for w in model
        .words_by_frequency()
        .into_iter()
        .filter(|w| !violates(w, c))
        .take(m_top)
    {
        add(w.to_string(), &mut vocab);
    }
    if vocab.is_empty() {
        return Err(DecodeError::EmptyVocabulary);
    }
    Ok(vocab)
}

/// Per-word data the search loop needs.
struct SearchVocab {
    lm_ids: Vec<u32>,
    uni_idf: Vec<f64>,
    uni_src: Vec<f64>,
    idf_ids: Vec<Option<u32>>,
    /// Source weight of each source bigram whose words are both in the vocabulary.
    bi_src: FxHashMap<(u32, u32), f64>,
}

#[derive(Clone)]
struct Live {
    tokens: Vec<u32>,
    lm_sum: f64,
    dot: f64,
    sq: f64,
    unigram_tf: Vec<u32>,
}

impl Live {
    fn sim(&self) -> f64 {
        similarity_from(self.dot, self.sq)
    }
}

fn similarity_from(dot: f64, sq: f64) -> f64 {
    if sq > 0.0 {
        (dot / sq.sqrt()).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

struct Expansion {
    score: f64,
    key: f64,
    parent: u32,
    word: u32,
    lm_sum: f64,
    dot: f64,
    sq: f64,
}

fn rank(a: &Expansion, b: &Expansion) -> Ordering {
    b.key
        .total_cmp(&a.key)
        .then(a.parent.cmp(&b.parent))
        .then(a.word.cmp(&b.word))
}

struct Search<'a> {
    cfg: &'a DecoderConfig,
    model: &'a NGramModel,
    embedder: &'a TfIdfEmbedder,
    words: &'a [String],
    v: SearchVocab,
    min_len: usize,
    max_len: usize,
}

impl<'a> Search<'a> {
    fn new(
        source_words: &[String],
        vocab: &'a [String],
        cfg: &'a DecoderConfig,
        model: &'a NGramModel,
        embedder: &'a TfIdfEmbedder,
    ) -> Result<Self, DecodeError> {
        cfg.validate()?;
        if source_words.is_empty() {
            return Err(DecodeError::EmptySource);
        }
        if vocab.is_empty() {
            return Err(DecodeError::EmptyVocabulary);
        }
        let (min_len, max_len) = cfg.length_bounds(source_words.len());
        if max_len < min_len {
            return Err(DecodeError::DecodeFailure(format!(
                "no legal length between {min_len} and {max_len}"
            )));
        }
        let src = embedder.embed_words(source_words);
        let idf = embedder.idf();
        let idf_ids: Vec<Option<u32>> = vocab.iter().map(|w| idf.word_id(w)).collect();
        let index: FxHashMap<&str, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i as u32))
            .collect();
        let mut bi_src = FxHashMap::default();
        for pair in source_words.windows(2) {
            if let (Some(&a), Some(&b)) = (index.get(pair[0].as_str()), index.get(pair[1].as_str()))
            {
                bi_src.insert(
                    (a, b),
                    src.get(feature_id(&bigram_feature(&pair[0], &pair[1]))),
                );
            }
        }
        let v = SearchVocab {
            lm_ids: vocab.iter().map(|w| model.id(w)).collect(),
            uni_idf: idf_ids
                .iter()
                .map(|&id| idf.idf_from_df(idf.unigram_df(id)))
                .collect(),
            uni_src: vocab.iter().map(|w| src.get(feature_id(w))).collect(),
            idf_ids,
            bi_src,
        };
        Ok(Search {
            cfg,
            model,
            embedder,
            words: vocab,
            v,
            min_len,
            max_len,
        })
    }

    fn context(&self, tokens: &[u32], buf: &mut [u32; MAX_ORDER]) -> usize {
        let n = self.model.order() - 1;
        for (j, slot) in buf[..n].iter_mut().enumerate() {
            // distance of this slot from the most recent token
            let back = n - 1 - j;
            *slot = if back < tokens.len() {
                self.v.lm_ids[tokens[tokens.len() - 1 - back] as usize]
            } else {
                BOS_ID
            };
        }
        n
    }

    /// Tokens that would complete an n-gram already present in `tokens`.
    fn banned(&self, tokens: &[u32]) -> Vec<u32> {
        let n = self.cfg.no_repeat_ngram;
        if n == 0 || tokens.len() < n {
            return Vec::new();
        }
        let prefix = &tokens[tokens.len() + 1 - n..];
        let mut out = Vec::new();
        for start in 0..=tokens.len() - n {
            if &tokens[start..start + n - 1] == prefix {
                out.push(tokens[start + n - 1]);
            }
        }
        out
    }

    fn finish(&self, h: &Live) -> Hypothesis {
        let mut buf = [0u32; MAX_ORDER];
        let n = self.context(&h.tokens, &mut buf);
        let lm_sum = h.lm_sum + self.model.score_ids(&buf[..n], EOS_ID);
        let scored = h.tokens.len() + 1;
        let sim = h.sim();
        Hypothesis {
            tokens: h
                .tokens
                .iter()
                .map(|&t| self.words[t as usize].clone())
                .collect(),
            lm_score: lm_sum / self.cfg.normalizer(scored),
            sim_score: sim,
            combined: self.cfg.combine(lm_sum, scored, sim),
        }
    }

    /// Largest combined score any completion of `h` can reach.
    fn upper_bound(&self, h: &Live) -> f64 {
        let lm = self.cfg.lambda_lm * (h.lm_sum / self.cfg.normalizer(self.max_len + 1));
        lm + self.cfg.lambda_sim
    }

    fn expand(&self, parent: u32, h: &Live, out: &mut Vec<Expansion>) {
        let mut buf = [0u32; MAX_ORDER];
        let n = self.context(&h.tokens, &mut buf);
        let ctx = &buf[..n];
        let banned = self.banned(&h.tokens);
        let prev = h.tokens.last().copied();
        // successor counts of the last token, for the bigram tf update
        let mut successors: Vec<(u32, u32)> = Vec::new();
        if let Some(p) = prev {
            for pair in h.tokens.windows(2) {
                if pair[0] == p {
                    match successors.iter_mut().find(|(w, _)| *w == pair[1]) {
                        Some((_, c)) => *c += 1,
                        None => successors.push((pair[1], 1)),
                    }
                }
            }
        }
        let idf = self.embedder.idf();
        let scored = h.tokens.len() + 1;
        let norm = self.cfg.normalizer(scored);
        for w in 0..self.words.len() as u32 {
            if banned.contains(&w) {
                continue;
            }
            let wi = w as usize;
            let lm_sum = h.lm_sum + self.model.score_ids(ctx, self.v.lm_ids[wi]);
            let tf = h.unigram_tf[wi] as f64;
            let widf = self.v.uni_idf[wi];
            let mut dot = h.dot + widf * self.v.uni_src[wi];
            let mut sq = h.sq + (2.0 * tf + 1.0) * widf * widf;
            if let Some(p) = prev {
                let m = successors
                    .iter()
                    .find(|(s, _)| *s == w)
                    .map_or(0, |&(_, c)| c) as f64;
                let bidf =
                    idf.idf_from_df(idf.bigram_df(self.v.idf_ids[p as usize], self.v.idf_ids[wi]));
                dot += bidf * self.v.bi_src.get(&(p, w)).copied().unwrap_or(0.0);
                sq += (2.0 * m + 1.0) * bidf * bidf;
            }
            let score = self.cfg.lambda_lm * (lm_sum / norm)
                + self.cfg.lambda_sim * similarity_from(dot, sq);
            out.push(Expansion {
                score,
                key: score,
                parent,
                word: w,
                lm_sum,
                dot,
                sq,
            });
        }
    }

    fn run(&self, rng: Option<&mut ChaCha8Rng>) -> Result<Vec<Hypothesis>, DecodeError> {
        let mut rng = rng;
        let k = self.cfg.candidates_k;
        let mut pool: Vec<Hypothesis> = Vec::new();
        let mut live = vec![Live {
            tokens: Vec::new(),
            lm_sum: 0.0,
            dot: 0.0,
            sq: 0.0,
            unigram_tf: vec![0; self.words.len()],
        }];
        let mut expansions = Vec::new();
        for len in 0..=self.max_len {
            if live.is_empty() {
                break;
            }
            if len >= self.min_len {
                for h in &live {
                    insert_bounded(&mut pool, self.finish(h), k);
                }
            }
            if len == self.max_len {
                break;
            }
            if pool.len() == k {
                let worst = pool[k - 1].combined;
                if live.iter().all(|h| self.upper_bound(h) < worst) {
                    break;
                }
            }
            expansions.clear();
            for (i, h) in live.iter().enumerate() {
                self.expand(i as u32, h, &mut expansions);
            }
            if let Some(rng) = rng.as_deref_mut() {
                for e in expansions.iter_mut() {
                    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                    e.key = e.score / self.cfg.temperature - (-u.ln()).ln();
                }
            }
            let keep = self.cfg.beam_width.min(expansions.len());
            if keep == 0 {
                live.clear();
                break;
            }
            if keep < expansions.len() {
                expansions.select_nth_unstable_by(keep - 1, rank);
                expansions.truncate(keep);
            }
            expansions.sort_by(rank);
            live = expansions
                .iter()
                .map(|e| {
                    let parent = &live[e.parent as usize];
                    let mut tokens = Vec::with_capacity(parent.tokens.len() + 1);
                    tokens.extend_from_slice(&parent.tokens);
                    tokens.push(e.word);
                    let mut unigram_tf = parent.unigram_tf.clone();
                    unigram_tf[e.word as usize] += 1;
                    Live {
                        tokens,
                        lm_sum: e.lm_sum,
                        dot: e.dot,
                        sq: e.sq,
                        unigram_tf,
                    }
                })
                .collect();
        }
        if pool.is_empty() {
            return Err(DecodeError::DecodeFailure(
                "every hypothesis was pruned before reaching the minimum length".into(),
            ));
        }
        Ok(pool)
    }
}

/// Keeps the `k` best by combined score; earlier entries win ties.
fn insert_bounded(pool: &mut Vec<Hypothesis>, h: Hypothesis, k: usize) {
    let pos = pool.partition_point(|p| p.combined >= h.combined);
    if pos < k {
        pool.insert(pos, h);
        pool.truncate(k);
    }
}

/// Beam search over an explicit allow-list of normalized words.
pub fn beam_search_with_vocab(
    source_words: &[String],
    vocab: &[String],
    cfg: &DecoderConfig,
    model: &NGramModel,
    embedder: &TfIdfEmbedder,
) -> Result<Vec<Hypothesis>, DecodeError> {
    let search = Search::new(source_words, vocab, cfg, model, embedder)?;
    match cfg.mode {
        DecodeMode::Deterministic => search.run(None),
        DecodeMode::Sampled => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            search.run(Some(&mut rng))
        }
    }
}

/// Up to `candidates_k` hypotheses for `source`, best first.
pub fn beam_search(
    source: &str,
    c: &ConstraintSet,
    cfg: &DecoderConfig,
    model: &NGramModel,
    lex: &Lexicon,
    embedder: &TfIdfEmbedder,
) -> Result<Vec<Hypothesis>, DecodeError> {
    let source_words: Vec<String> = words(source).map(normalize_word).collect();
    if source_words.is_empty() {
        return Err(DecodeError::EmptySource);
    }
    let vocab = build_candidate_vocab(source, c, lex, model, cfg.candidate_vocab_size)?;
    beam_search_with_vocab(&source_words, &vocab, cfg, model, embedder)
}

/// Candidates for multiselection: the top `candidates_k` of one run in
/// deterministic mode, or the best of `candidates_k` runs seeded
/// `seed, seed + 1, ...` in sampled mode.
pub fn generate_candidates(
    source: &str,
    c: &ConstraintSet,
    cfg: &DecoderConfig,
    model: &NGramModel,
    lex: &Lexicon,
    embedder: &TfIdfEmbedder,
) -> Result<Vec<Hypothesis>, DecodeError> {
    match cfg.mode {
        DecodeMode::Deterministic => beam_search(source, c, cfg, model, lex, embedder),
        DecodeMode::Sampled => {
            let mut out = Vec::with_capacity(cfg.candidates_k);
            for i in 0..cfg.candidates_k as u64 {
                let run = DecoderConfig {
                    seed: cfg.seed.wrapping_add(i),
                    ..cfg.clone()
                };
                let mut hyps = beam_search(source, c, &run, model, lex, embedder)?;
                out.push(hyps.swap_remove(0));
            }
            Ok(out)
        }
    }
}

/// The candidate most similar to `source`; the earliest one on ties.
pub fn multiselect<'h>(
    candidates: &'h [Hypothesis],
    source: &str,
    embedder: &dyn Embedder,
) -> Result<&'h Hypothesis, DecodeError> {
    let idx = multiselect_index(candidates, source, embedder)?;
    Ok(&candidates[idx])
}

pub fn multiselect_index(
    candidates: &[Hypothesis],
    source: &str,
    embedder: &dyn Embedder,
) -> Result<usize, DecodeError> {
    if candidates.is_empty() {
        return Err(DecodeError::NoCandidates);
    }
    let texts: Vec<String> = candidates.iter().map(Hypothesis::text).collect();
    let mut batch: Vec<&str> = vec![source];
    batch.extend(texts.iter().map(String::as_str));
    let vecs = embedder.embed_batch(&batch)?;
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (i, v) in vecs[1..].iter().enumerate() {
        let sim = cosine_similarity(&vecs[0], v);
        if sim > best_sim {
            best = i;
            best_sim = sim;
        }
    }
    Ok(best)
}
