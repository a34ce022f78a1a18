use std::collections::{HashMap, HashSet};

use crate::providers::{LeafScorer, Normalization, ProviderError};

/// Lowercased alphanumeric runs; apostrophes inside a word are kept.
pub fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\'').to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Okapi BM25 with document statistics taken from the leaves being scored.
#[derive(Debug, Clone, Copy)]
pub struct Bm25 {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25 {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25 {
    pub fn idf(n_docs: usize, df: usize) -> f64 {
        let (n, df) = (n_docs as f64, df as f64);
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    pub fn scores(&self, query: &str, docs: &[&str]) -> Vec<f64> {
        let q: Vec<String> = {
            let mut seen = HashSet::new();
            terms(query).into_iter().filter(|t| seen.insert(t.clone())).collect()
        };
        let tf: Vec<HashMap<String, usize>> = docs
            .iter()
            .map(|d| {
                let mut m = HashMap::new();
                for t in terms(d) {
                    *m.entry(t).or_insert(0) += 1;
                }
                m
            })
            .collect();
        let lens: Vec<f64> = tf.iter().map(|m| m.values().sum::<usize>() as f64).collect();
        let avgdl = if docs.is_empty() { 0.0 } else { lens.iter().sum::<f64>() / docs.len() as f64 };
        if avgdl == 0.0 {
            return vec![0.0; docs.len()];
        }
        let idf: Vec<f64> = q.iter().map(|t| Self::idf(docs.len(), tf.iter().filter(|m| m.contains_key(t)).count())).collect();
        tf.iter()
            .zip(&lens)
            .map(|(m, &dl)| {
                q.iter()
                    .zip(&idf)
                    .map(|(t, idf)| {
                        let f = *m.get(t).unwrap_or(&0) as f64;
                        idf * f * (self.k1 + 1.0) / (f + self.k1 * (1.0 - self.b + self.b * dl / avgdl))
                    })
                    .sum()
            })
            .collect()
    }
}

impl LeafScorer for Bm25 {
    fn score(&self, query: &str, leaves: &[&str]) -> Result<Vec<f64>, ProviderError> {
        Ok(self.scores(query, leaves))
    }

    fn normalization(&self) -> Normalization {
        Normalization::MinMax
    }
}
