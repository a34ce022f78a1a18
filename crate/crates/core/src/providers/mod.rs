//! Interfaces for every model-dependent step, with deterministic offline
//! stubs, an HTTP client for OpenAI-compatible servers, and the on-disk store
//! for structured documents.

mod counting;
mod http;
pub mod prompts;
mod store;
mod stub;
mod window;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doctree::Outline;

pub use counting::{CallCounts, Counting};
pub use http::{HttpProvider, ProviderConfig, ENV_API_KEY, ENV_ENDPOINT};
pub use prompts::Prompts;
pub use store::{content_hash, CorpusStore, MissReason, StoreError, StoreLookup, StoreRecord, StructMeta};
pub use stub::{StubLevelProvider, StubStructurer};
pub use window::{split_windows, structure_document, StructuredText};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("bad response: {0}")]
    BadResponse(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("input of {tokens} words exceeds the context window of {window}")]
    OversizeInput { tokens: usize, window: usize },
    #[error("could not parse a section list from: {0}")]
    UnparseableSelection(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider configuration: {0}")]
    Config(String),
}

impl ProviderError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, Self::Timeout(_) | Self::BadResponse(_) | Self::Auth(_) | Self::Transport(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelProbs {
    pub p_local: f64,
    pub p_global: f64,
}

pub trait LevelProbabilityProvider: Send + Sync {
    fn level_probs(&self, query: &str) -> Result<LevelProbs, ProviderError>;
}

pub trait Structurer: Send + Sync {
    /// Returns the markup for `text`. Fails with `OversizeInput` when the
    /// text exceeds [`Structurer::context_window`].
    fn structure(&self, text: &str) -> Result<String, ProviderError>;

    /// Largest input, in words, accepted in one call.
    fn context_window(&self) -> usize;

    fn model_id(&self) -> String;
}

pub trait SectionSelector: Send + Sync {
    /// Titles from `outline.titles`, or `"abstract"`, judged useful for the
    /// query.
    fn select(&self, query: &str, outline: &Outline) -> Result<Vec<String>, ProviderError>;
}

/// How raw leaf scores are mapped into [0, 1] within one document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// For bounded or lexical scores: `(x - min) / (max - min)`.
    MinMax,
    /// For unbounded logits: `1 / (1 + e^-x)`.
    Logistic,
    /// Scores are already in [0, 1].
    Identity,
}

pub trait LeafScorer: Send + Sync {
    /// One raw score per leaf text, in input order.
    fn score(&self, query: &str, leaves: &[&str]) -> Result<Vec<f64>, ProviderError>;

    fn normalization(&self) -> Normalization;
}
