use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{LeafScorer, LevelProbabilityProvider, LevelProbs, Normalization, ProviderError, SectionSelector, Structurer};
use crate::doctree::Outline;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub level: usize,
    pub structure: usize,
    pub select: usize,
    pub score: usize,
}

/// Wraps a provider and counts calls per interface.
#[derive(Debug, Default)]
pub struct Counting<P> {
    inner: P,
    level: AtomicUsize,
    structure: AtomicUsize,
    select: AtomicUsize,
    score: AtomicUsize,
}

impl<P> Counting<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, level: AtomicUsize::new(0), structure: AtomicUsize::new(0), select: AtomicUsize::new(0), score: AtomicUsize::new(0) }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn counts(&self) -> CallCounts {
        CallCounts {
            level: self.level.load(Ordering::SeqCst),
            structure: self.structure.load(Ordering::SeqCst),
            select: self.select.load(Ordering::SeqCst),
            score: self.score.load(Ordering::SeqCst),
        }
    }

    pub fn reset(&self) {
        for c in [&self.level, &self.structure, &self.select, &self.score] {
            c.store(0, Ordering::SeqCst);
        }
    }
}

impl<P: LevelProbabilityProvider> LevelProbabilityProvider for Counting<P> {
    fn level_probs(&self, query: &str) -> Result<LevelProbs, ProviderError> {
        self.level.fetch_add(1, Ordering::SeqCst);
        self.inner.level_probs(query)
    }
}

impl<P: Structurer> Structurer for Counting<P> {
    fn structure(&self, text: &str) -> Result<String, ProviderError> {
        self.structure.fetch_add(1, Ordering::SeqCst);
        self.inner.structure(text)
    }

    fn context_window(&self) -> usize {
        self.inner.context_window()
    }

    fn model_id(&self) -> String {
        self.inner.model_id()
    }
}

impl<P: SectionSelector> SectionSelector for Counting<P> {
    fn select(&self, query: &str, outline: &Outline) -> Result<Vec<String>, ProviderError> {
        self.select.fetch_add(1, Ordering::SeqCst);
        self.inner.select(query, outline)
    }
}

impl<P: LeafScorer> LeafScorer for Counting<P> {
    fn score(&self, query: &str, leaves: &[&str]) -> Result<Vec<f64>, ProviderError> {
        self.score.fetch_add(1, Ordering::SeqCst);
        self.inner.score(query, leaves)
    }

    fn normalization(&self) -> Normalization {
        self.inner.normalization()
    }
}
