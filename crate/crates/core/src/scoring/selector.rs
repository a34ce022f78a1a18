use std::collections::HashSet;

use super::bm25::terms;
use crate::doctree::Outline;
use crate::providers::{ProviderError, SectionSelector};

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "an", "and", "any", "are", "as", "at", "be", "been", "before", "but", "by", "can", "did", "do", "does",
    "for", "from", "had", "has", "have", "he", "her", "his", "how", "i", "if", "in", "into", "is", "it", "its", "many", "me", "much", "of",
    "on", "or", "she", "so", "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "to", "was", "we", "were",
    "what", "when", "where", "which", "who", "whom", "why", "will", "with", "you",
];

pub fn content_words(text: &str) -> HashSet<String> {
    terms(text).into_iter().filter(|t| !STOPWORDS.contains(&t.as_str())).collect()
}

pub fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

/// Selects every title, and the abstract, whose content-word Jaccard overlap
/// with the query exceeds `threshold`.
#[derive(Debug, Clone, Copy)]
pub struct JaccardSelector {
    pub threshold: f64,
}

impl Default for JaccardSelector {
    fn default() -> Self {
        Self { threshold: 0.1 }
    }
}

impl SectionSelector for JaccardSelector {
    fn select(&self, query: &str, outline: &Outline) -> Result<Vec<String>, ProviderError> {
        let q = content_words(query);
        let mut out = Vec::new();
        if !outline.abstract_text.is_empty() && jaccard(&q, &content_words(&outline.abstract_text)) > self.threshold {
            out.push("abstract".to_string());
        }
        for t in &outline.titles {
            if jaccard(&q, &content_words(t)) > self.threshold {
                out.push(t.clone());
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case_outline() -> Outline {
        Outline {
            abstract_text: "Bunk'd is an American comedy television series created by Pamela Eells O'Connell.".into(),
            titles: ["Plot", "Cast", "Production", "Broadcast"].map(String::from).to_vec(),
        }
    }

    #[test]
    fn renewal_production_query_picks_production() {
        let s = JaccardSelector::default().select("When was the production renewed for season three?", &case_outline()).unwrap();
        assert_eq!(s, ["Production"]);
    }

    #[test]
    fn abstract_is_selectable() {
        let s = JaccardSelector::default().select("Bunk'd comedy series creator", &case_outline()).unwrap();
        assert!(s.contains(&"abstract".to_string()));
    }

    #[test]
    fn empty_outline_selects_nothing() {
        assert!(JaccardSelector::default().select("anything", &Outline::default()).unwrap().is_empty());
    }

    #[test]
    fn threshold_is_strict() {
        // one shared word out of ten distinct
        let q = "alpha b1 b2 b3 b4 b5 b6 b7 b8 b9";
        let o = Outline { abstract_text: String::new(), titles: vec!["alpha".into()] };
        assert!(JaccardSelector::default().select(q, &o).unwrap().is_empty());
        assert_eq!(JaccardSelector { threshold: 0.09 }.select(q, &o).unwrap(), ["alpha"]);
    }
}
