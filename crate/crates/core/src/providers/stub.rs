use super::{LevelProbabilityProvider, LevelProbs, ProviderError, Structurer};
use crate::doctree::{Block, DocTree};
use crate::tokens::{normalize_whitespace, word_count};
use crate::xml_codec::{serialize, SkipPolicy};

const GLOBAL_CUES: &[&str] = &["summarize", "summary", "describe", "explain", "overview", "why", "compare", "discuss"];
const LOCAL_CUES: &[&str] = &["who", "when", "where", "which", "what"];

/// Fixed rule table over query words:
///
/// | query contains | (p_local, p_global) |
/// |---|---|
/// | summarize, summary, describe, explain, overview, why, compare, discuss | (0.2, 0.8) |
/// | who, when, where, which, what, "how many", "how much" | (0.85, 0.15) |
/// | anything else | (0.5, 0.5) |
///
/// Rows are checked top to bottom.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubLevelProvider;

impl StubLevelProvider {
    pub const GLOBAL: LevelProbs = LevelProbs { p_local: 0.2, p_global: 0.8 };
    pub const LOCAL: LevelProbs = LevelProbs { p_local: 0.85, p_global: 0.15 };
    pub const NEUTRAL: LevelProbs = LevelProbs { p_local: 0.5, p_global: 0.5 };
}

impl LevelProbabilityProvider for StubLevelProvider {
    fn level_probs(&self, query: &str) -> Result<LevelProbs, ProviderError> {
        let lower = query.to_lowercase();
        let words: Vec<&str> = lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
        let has = |w: &str| words.contains(&w);
        if GLOBAL_CUES.iter().any(|c| has(c)) {
            return Ok(Self::GLOBAL);
        }
        let how_quantity = words.windows(2).any(|p| p[0] == "how" && (p[1] == "many" || p[1] == "much"));
        if how_quantity || LOCAL_CUES.iter().any(|c| has(c)) {
            return Ok(Self::LOCAL);
        }
        Ok(Self::NEUTRAL)
    }
}

/// Rule-based structurer: paragraphs split at blank lines, grouped three per
/// section, each section titled with the first sentence of its first
/// paragraph (at most eight words).
#[derive(Debug, Clone)]
pub struct StubStructurer {
    pub policy: SkipPolicy,
    pub window: usize,
    pub paragraphs_per_section: usize,
}

impl Default for StubStructurer {
    fn default() -> Self {
        Self { policy: SkipPolicy::default(), window: usize::MAX, paragraphs_per_section: 3 }
    }
}

impl StubStructurer {
    pub const MAX_TITLE_WORDS: usize = 8;

    pub fn title_for(paragraph: &str) -> String {
        let first_sentence = paragraph.split_inclusive(['.', '!', '?']).next().unwrap_or(paragraph).trim_end_matches(['.', '!', '?']);
        first_sentence.split_whitespace().take(Self::MAX_TITLE_WORDS).collect::<Vec<_>>().join(" ")
    }
}

pub(crate) fn split_paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(normalize_whitespace(&cur.join(" ")));
                cur.clear();
            }
        } else {
            cur.push(line);
        }
    }
    if !cur.is_empty() {
        out.push(normalize_whitespace(&cur.join(" ")));
    }
    out
}

impl Structurer for StubStructurer {
    fn structure(&self, text: &str) -> Result<String, ProviderError> {
        let tokens = word_count(text);
        if tokens > self.window {
            return Err(ProviderError::OversizeInput { tokens, window: self.window });
        }
        let paragraphs = split_paragraphs(text);
        if paragraphs.is_empty() {
            return Ok("<abstract>\n</abstract>".to_string());
        }
        let blocks = paragraphs
            .chunks(self.paragraphs_per_section.max(1))
            .map(|group| Block::section(Self::title_for(&group[0]), group.to_vec()))
            .collect();
        let tree = DocTree::from_text_blocks("stub", blocks);
        serialize(&tree, &self.policy, true).map(|s| s.text).map_err(|e| ProviderError::BadResponse(e.to_string()))
    }

    fn context_window(&self) -> usize {
        self.window
    }

    fn model_id(&self) -> String {
        format!("stub-structurer-k{}", self.policy.k())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xml_codec::{parse, TagKind};

    #[test]
    fn rule_table_rows() {
        let p = |q: &str| StubLevelProvider.level_probs(q).unwrap();
        assert_eq!(p("Summarize the article"), StubLevelProvider::GLOBAL);
        assert_eq!(p("why did it end"), StubLevelProvider::GLOBAL);
        assert_eq!(p("when was X born"), StubLevelProvider::LOCAL);
        assert_eq!(p("How many seasons aired?"), StubLevelProvider::LOCAL);
        assert_eq!(p("Explain who founded it"), StubLevelProvider::GLOBAL);
        assert_eq!(p("camp kikiwaka"), StubLevelProvider::NEUTRAL);
        assert_eq!(p("however"), StubLevelProvider::NEUTRAL);
    }

    #[test]
    fn six_paragraphs_make_two_sections() {
        let text = (1..=6).map(|i| format!("Paragraph {i} opens here. More text.")).collect::<Vec<_>>().join("\n\n");
        let xml = StubStructurer::default().structure(&text).unwrap();
        let parsed = parse(&xml).unwrap();
        assert!(parsed.repairs.is_empty());
        let kinds: Vec<TagKind> = parsed.doc.tags().map(|t| t.kind).collect();
        use TagKind::*;
        assert_eq!(kinds, [SectionOpen, Br, Br, SectionClose, SectionOpen, Br, Br, SectionClose]);
        assert!(xml.starts_with("<section: Paragraph 1 opens here>"));
    }

    #[test]
    fn empty_document_gives_empty_abstract() {
        assert_eq!(StubStructurer::default().structure("  \n\n ").unwrap(), "<abstract>\n</abstract>");
    }

    #[test]
    fn oversize_input_is_refused() {
        let s = StubStructurer { window: 3, ..Default::default() };
        assert!(matches!(s.structure("one two three four"), Err(ProviderError::OversizeInput { tokens: 4, window: 3 })));
    }

    #[test]
    fn titles_stop_at_the_first_sentence() {
        assert_eq!(StubStructurer::title_for("Short one. Then more."), "Short one");
        assert_eq!(StubStructurer::title_for("a b c d e f g h i j k"), "a b c d e f g h");
    }
}
