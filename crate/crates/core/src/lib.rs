//! Lipogram translation toolkit.
//!
//! Rewrites text so that it avoids a chosen set of letters, either with
//! simple substitution baselines or with a constrained beam-search decoder
//! driven by an n-gram language model, and measures how faithful the result
//! is to the source.
//!
//! The crate is organised bottom-up:
//!
//! * [`text`]: tokenization, constraint sets, letter statistics
//! * [`lexicon`]: synonym resource and the two baseline translators
//! * [`lm`]: stupid-backoff n-gram language model
//! * [`metrics`]: E-score, OOV, similarity, grammar and readability
//! * [`decoder`]: constrained beam search and multiselection
//! * [`passes`]: entity aliasing, pronouns and post-processing
//! * [`pipeline`]: end-to-end document translation
//! * [`sweep`]: constraint-strength experiments and decay fits
//! * [`providers`]: HTTP grammar and embedding clients

pub mod decoder;
pub mod lexicon;
pub mod lm;
pub mod metrics;
pub mod passes;
pub mod pipeline;
pub mod providers;
pub mod sweep;
pub mod text;

pub use decoder::{DecodeError, DecodeMode, DecoderConfig, Hypothesis};
pub use lexicon::{Dictionary, Lexicon, LexiconEntry, LexiconError};
pub use lm::NGramModel;
pub use metrics::embedding::{cosine_similarity, Embedder, EmbeddingVector, TfIdfEmbedder};
pub use metrics::EvaluationReport;
pub use text::{ConstraintSet, FreqTable, Token, TokenKind};
