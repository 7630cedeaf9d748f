//! TF-IDF text embeddings over word unigrams and bigrams.
//!
//! Feature weights are `tf * idf` with `idf = ln((N + 1) / (df + 1)) + 1`,
//! where `N` is the number of reference documents (paragraphs). Vectors are
//! L2-normalized; a text without words maps to the zero vector.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;

use crate::providers::ProviderError;
use crate::text::{normalize_word, words};

pub type FeatureId = u64;

/// Produces embeddings for similarity scoring.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError>;

    /// Embeds several texts; remote providers override this to batch.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

/// Sparse vector keyed by feature id, with its L2 norm.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingVector {
    weights: BTreeMap<FeatureId, f64>,
    norm: f64,
}

impl EmbeddingVector {
    /// Builds a vector from raw weights, normalizing to unit length.
    pub fn normalized(raw: BTreeMap<FeatureId, f64>) -> Self {
        let norm = raw.values().map(|w| w * w).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Self::default();
        }
        let weights: BTreeMap<FeatureId, f64> = raw
            .into_iter()
            .filter(|(_, w)| *w != 0.0)
            .map(|(k, w)| (k, w / norm))
            .collect();
        let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
        EmbeddingVector { weights, norm }
    }

    /// Dense vector (as returned by remote encoders), feature id = index.
    pub fn from_dense(values: &[f64]) -> Self {
        Self::normalized(
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| (i as FeatureId, v))
                .collect(),
        )
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_zero(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, feature: FeatureId) -> f64 {
        self.weights.get(&feature).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (FeatureId, f64)> + '_ {
        self.weights.iter().map(|(&k, &w)| (k, w))
    }
}

/// Cosine similarity clamped to `[0, 1]`; 0 when either vector is zero.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    if a.is_zero() || b.is_zero() {
        return 0.0;
    }
    // merge join in key order keeps the sum symmetric in (a, b)
    let mut dot = 0.0;
    let mut left = a.weights.iter().peekable();
    let mut right = b.weights.iter().peekable();
    while let (Some(&(ka, wa)), Some(&(kb, wb))) = (left.peek(), right.peek()) {
        match ka.cmp(kb) {
            std::cmp::Ordering::Less => {
                left.next();
            }
            std::cmp::Ordering::Greater => {
                right.next();
            }
            std::cmp::Ordering::Equal => {
                dot += wa * wb;
                left.next();
                right.next();
            }
        }
    }
    (dot / (a.norm * b.norm)).clamp(0.0, 1.0)
}

/// 64-bit FNV-1a; stable across runs and platforms.
pub fn feature_id(feature: &str) -> FeatureId {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in feature.bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn bigram_feature(first: &str, second: &str) -> String {
    format!("{first} {second}")
}

/// Document frequencies of unigram and bigram features.
#[derive(Debug, Clone, Default)]
pub struct IdfTable {
    n_docs: u64,
    word_ids: FxHashMap<String, u32>,
    unigram_df: Vec<u32>,
    bigram_df: FxHashMap<(u32, u32), u32>,
}

impl IdfTable {
    pub fn build<S: AsRef<str>>(documents: &[S]) -> Self {
        let mut table = IdfTable {
            n_docs: documents.len() as u64,
            ..Default::default()
        };
        for doc in documents {
            let ids: Vec<u32> = words(doc.as_ref())
                .map(|w| table.intern(&normalize_word(w)))
                .collect();
            let mut uni: Vec<u32> = ids.clone();
            uni.sort_unstable();
            uni.dedup();
            for id in uni {
                table.unigram_df[id as usize] += 1;
            }
            let mut bi: Vec<(u32, u32)> = ids.windows(2).map(|w| (w[0], w[1])).collect();
            bi.sort_unstable();
            bi.dedup();
            for pair in bi {
                *table.bigram_df.entry(pair).or_insert(0) += 1;
            }
        }
        table
    }

    fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.word_ids.get(word) {
            return id;
        }
        let id = self.unigram_df.len() as u32;
        self.word_ids.insert(word.to_string(), id);
        self.unigram_df.push(0);
        id
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    /// Id of a normalized word in the reference vocabulary.
    pub fn word_id(&self, word: &str) -> Option<u32> {
        self.word_ids.get(word).copied()
    }

    pub fn idf_from_df(&self, df: u32) -> f64 {
        ((self.n_docs as f64 + 1.0) / (df as f64 + 1.0)).ln() + 1.0
    }

    pub fn unigram_df(&self, id: Option<u32>) -> u32 {
        id.map_or(0, |i| self.unigram_df[i as usize])
    }

    pub fn bigram_df(&self, first: Option<u32>, second: Option<u32>) -> u32 {
        match (first, second) {
            (Some(a), Some(b)) => self.bigram_df.get(&(a, b)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn idf_unigram(&self, word: &str) -> f64 {
        self.idf_from_df(self.unigram_df(self.word_id(word)))
    }

    pub fn idf_bigram(&self, first: &str, second: &str) -> f64 {
        self.idf_from_df(self.bigram_df(self.word_id(first), self.word_id(second)))
    }
}

/// The built-in deterministic embedder.
#[derive(Debug, Clone, Default)]
pub struct TfIdfEmbedder {
    idf: IdfTable,
}

impl TfIdfEmbedder {
    pub fn new(idf: IdfTable) -> Self {
        TfIdfEmbedder { idf }
    }

    pub fn from_documents<S: AsRef<str>>(documents: &[S]) -> Self {
        Self::new(IdfTable::build(documents))
    }

    pub fn idf(&self) -> &IdfTable {
        &self.idf
    }

    /// Embeds an already-normalized word sequence.
    pub fn embed_words<S: AsRef<str>>(&self, words: &[S]) -> EmbeddingVector {
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for w in words {
            *tf.entry(w.as_ref().to_string()).or_insert(0) += 1;
        }
        let mut raw = BTreeMap::new();
        for (w, n) in &tf {
            raw.insert(feature_id(w), *n as f64 * self.idf.idf_unigram(w));
        }
        let mut bi: BTreeMap<(&str, &str), u32> = BTreeMap::new();
        for pair in words.windows(2) {
            *bi.entry((pair[0].as_ref(), pair[1].as_ref())).or_insert(0) += 1;
        }
        for ((a, b), n) in bi {
            raw.insert(
                feature_id(&bigram_feature(a, b)),
                n as f64 * self.idf.idf_bigram(a, b),
            );
        }
        EmbeddingVector::normalized(raw)
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let ws: Vec<String> = words(text).map(normalize_word).collect();
        self.embed_words(&ws)
    }

    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        cosine_similarity(&self.embed_text(a), &self.embed_text(b))
    }
}

impl Embedder for TfIdfEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        Ok(self.embed_text(text))
    }
}
