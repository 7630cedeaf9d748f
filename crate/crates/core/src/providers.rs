//! External service clients: grammar checking and remote embeddings.
//!
//! The grammar client speaks the LanguageTool v2 protocol
//! (`POST /v2/check`, form fields `text` and `language`). The embedding
//! client posts `{"texts": [...]}` to `/embed` and expects
//! `{"vectors": [[...], ...]}` back. Both have offline counterparts so the
//! pipeline runs without a network.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::embedding::{Embedder, EmbeddingVector};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("request to {endpoint} failed: {reason}")]
    Unreachable { endpoint: String, reason: String },
    #[error("unexpected response from {endpoint}: {reason}")]
    BadResponse { endpoint: String, reason: String },
}

/// One grammar finding, with byte offsets into the checked text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarMatch {
    pub offset: usize,
    pub length: usize,
    pub replacement: Option<String>,
    pub message: String,
}

pub trait GrammarProvider: Send + Sync {
    fn check(&self, text: &str) -> Result<Vec<GrammarMatch>, ProviderError>;
}

/// Reports no findings for any text.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineGrammar;

impl GrammarProvider for OfflineGrammar {
    fn check(&self, _text: &str) -> Result<Vec<GrammarMatch>, ProviderError> {
        Ok(Vec::new())
    }
}

const TIMEOUT: Duration = Duration::from_secs(30);

fn join_endpoint(base: &str, path: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with(path) {
        base.to_string()
    } else {
        format!("{base}{path}")
    }
}

fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(TIMEOUT)
        .build()
        .expect("HTTP client construction")
}

#[derive(Debug, Deserialize)]
struct CheckResponse {
    matches: Vec<RawMatch>,
}

#[derive(Debug, Deserialize)]
struct RawMatch {
    offset: usize,
    length: usize,
    #[serde(default)]
    message: String,
    #[serde(default)]
    replacements: Vec<RawReplacement>,
}

#[derive(Debug, Deserialize)]
struct RawReplacement {
    value: String,
}

/// Client for a LanguageTool-compatible server.
#[derive(Debug, Clone)]
pub struct LanguageToolClient {
    url: String,
    language: String,
    http: reqwest::blocking::Client,
}

impl LanguageToolClient {
    pub fn new(endpoint: &str) -> Self {
        LanguageToolClient {
            url: join_endpoint(endpoint, "/v2/check"),
            language: "en-US".to_string(),
            http: client(),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl GrammarProvider for LanguageToolClient {
    fn check(&self, text: &str) -> Result<Vec<GrammarMatch>, ProviderError> {
        let unreachable = |e: reqwest::Error| ProviderError::Unreachable {
            endpoint: self.url.clone(),
            reason: e.to_string(),
        };
        let resp = self
            .http
            .post(&self.url)
            .form(&[("text", text), ("language", self.language.as_str())])
            .send()
            .map_err(unreachable)?;
        if !resp.status().is_success() {
            return Err(ProviderError::BadResponse {
                endpoint: self.url.clone(),
                reason: format!("HTTP {}", resp.status()),
            });
        }
        let parsed: CheckResponse = resp.json().map_err(|e| ProviderError::BadResponse {
            endpoint: self.url.clone(),
            reason: e.to_string(),
        })?;
        parsed
            .matches
            .into_iter()
            .map(|m| {
                let (offset, length) =
                    utf16_span_to_bytes(text, m.offset, m.length).ok_or_else(|| {
                        ProviderError::BadResponse {
                            endpoint: self.url.clone(),
                            reason: format!("match span {}+{} out of range", m.offset, m.length),
                        }
                    })?;
                Ok(GrammarMatch {
                    offset,
                    length,
                    replacement: m.replacements.into_iter().next().map(|r| r.value),
                    message: m.message,
                })
            })
            .collect()
    }
}

/// LanguageTool reports offsets in UTF-16 code units.
fn utf16_span_to_bytes(text: &str, offset: usize, length: usize) -> Option<(usize, usize)> {
    let mut units = 0usize;
    let mut start = None;
    for (byte, ch) in text.char_indices() {
        if units == offset {
            start = Some(byte);
        }
        if units == offset + length {
            return start.map(|s| (s, byte - s));
        }
        units += ch.len_utf16();
    }
    if units == offset {
        start = Some(text.len());
    }
    if units == offset + length {
        return start.map(|s| (s, text.len() - s));
    }
    None
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for an HTTP sentence-embedding service.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    url: String,
    http: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(endpoint: &str) -> Self {
        RemoteEmbedder {
            url: join_endpoint(endpoint, "/embed"),
            http: client(),
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let mut out = self.embed_batch(&[text])?;
        Ok(out.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        let resp = self
            .http
            .post(&self.url)
            .json(&EmbedRequest { texts })
            .send()
            .map_err(|e| ProviderError::Unreachable {
                endpoint: self.url.clone(),
                reason: e.to_string(),
            })?;
        let bad = |reason: String| ProviderError::BadResponse {
            endpoint: self.url.clone(),
            reason,
        };
        if !resp.status().is_success() {
            return Err(bad(format!("HTTP {}", resp.status())));
        }
        let parsed: EmbedResponse = resp.json().map_err(|e| bad(e.to_string()))?;
        if parsed.vectors.len() != texts.len() {
            return Err(bad(format!(
                "expected {} vectors, got {}",
                texts.len(),
                parsed.vectors.len()
            )));
        }
        Ok(parsed
            .vectors
            .iter()
            .map(|v| EmbeddingVector::from_dense(v))
            .collect())
    }
}
