//! Builds (plain text, markup) training pairs from structured wiki pages.
//!
//! A page arrives as ordered heading blocks. It is cleaned, turned into a
//! [`DocTree`], serialized with elision, and kept only if the markup restores
//! the tree exactly.

use std::collections::HashSet;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doctree::{Block, DocTree, SectionItem, Violation};
use crate::tokens::{normalize_whitespace, word_count};
use crate::xml_codec::{roundtrip, serialize, RoundtripOutcome, SkipPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WikiBlock {
    /// 0 for the lead, 1 for a section, 2 for a subsection.
    pub heading_level: u8,
    #[serde(default)]
    pub heading_text: String,
    #[serde(default)]
    pub paragraphs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawWikiPage {
    pub page_id: String,
    #[serde(default)]
    pub title: String,
    pub blocks: Vec<WikiBlock>,
}

#[derive(Debug, Error)]
pub enum PageError {
    #[error("page {0} has no content left after cleaning")]
    EmptyAfterClean(String),
    #[error("page {page} is malformed: {reason}")]
    MalformedPage { page: String, reason: String, violations: Vec<Violation> },
    #[error("invalid cleaning pattern: {0}")]
    BadPattern(#[from] regex::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleanConfig {
    /// Headings (case-insensitive) whose blocks are dropped along with their
    /// subsections.
    pub stop_headings: Vec<String>,
    /// Patterns removed from paragraph text.
    pub strip_patterns: Vec<String>,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            stop_headings: ["References", "External links", "See also", "Further reading", "Notes", "Bibliography"]
                .map(String::from)
                .to_vec(),
            strip_patterns: vec![
                // [1], [23], [a], [citation needed]
                r"\[(?:\d+|[a-z]|citation needed|clarification needed)\]".into(),
                // file and image stubs
                r"\[\[(?:File|Image):[^\]]*\]\]".into(),
                r"(?m)^(?:thumb\|)?(?:File|Image):\S+".into(),
            ],
        }
    }
}

pub struct Cleaner {
    stop: HashSet<String>,
    strip: Vec<Regex>,
    pipe_link: Regex,
}

impl Cleaner {
    pub fn new(config: &CleanConfig) -> Result<Self, PageError> {
        Ok(Self {
            stop: config.stop_headings.iter().map(|h| h.trim().to_lowercase()).collect(),
            strip: config.strip_patterns.iter().map(|p| Regex::new(p)).collect::<Result<_, _>>()?,
            pipe_link: Regex::new(r"\[\[(?:[^\[\]|]*\|)?([^\[\]|]*)\]\]").expect("static pattern"),
        })
    }

    /// Strips markup remnants until the text stops changing, so cleaning is
    /// idempotent even when removals expose new matches.
    pub fn clean_text(&self, text: &str) -> String {
        let mut cur = normalize_whitespace(text);
        loop {
            let mut next = cur.clone();
            for re in &self.strip {
                next = re.replace_all(&next, "").into_owned();
            }
            next = self.pipe_link.replace_all(&next, "$1").into_owned();
            next = normalize_whitespace(&next);
            if next == cur {
                return cur;
            }
            cur = next;
        }
    }

    pub fn clean(&self, page: &RawWikiPage) -> Result<RawWikiPage, PageError> {
        let mut blocks = Vec::with_capacity(page.blocks.len());
        let mut dropping_below: Option<u8> = None;
        for b in &page.blocks {
            if let Some(level) = dropping_below {
                if b.heading_level > level {
                    continue;
                }
                dropping_below = None;
            }
            let heading = self.clean_text(&b.heading_text);
            if b.heading_level > 0 && self.stop.contains(&heading.to_lowercase()) {
                dropping_below = Some(b.heading_level);
                continue;
            }
            let paragraphs: Vec<String> = b.paragraphs.iter().map(|p| self.clean_text(p)).filter(|p| !p.is_empty()).collect();
            blocks.push(WikiBlock { heading_level: b.heading_level, heading_text: heading, paragraphs });
        }
        if blocks.iter().all(|b| b.paragraphs.is_empty()) {
            return Err(PageError::EmptyAfterClean(page.page_id.clone()));
        }
        Ok(RawWikiPage { page_id: page.page_id.clone(), title: page.title.clone(), blocks })
    }
}

/// Lead blocks become the abstract, level 1 sections, level 2 and deeper
/// subsections. A subsection before any section gets an untitled parent.
pub fn to_tree(page: &RawWikiPage) -> Result<DocTree, PageError> {
    let malformed = |reason: String| PageError::MalformedPage { page: page.page_id.clone(), reason, violations: Vec::new() };
    let mut blocks: Vec<Block<String>> = Vec::new();
    for b in &page.blocks {
        match b.heading_level {
            0 => match blocks.last_mut() {
                None => blocks.push(Block::Abstract(b.paragraphs.clone())),
                Some(Block::Abstract(ps)) => ps.extend(b.paragraphs.iter().cloned()),
                Some(Block::Section { .. }) => return Err(malformed("lead block after a section".into())),
            },
            1 => blocks.push(Block::section(b.heading_text.clone(), b.paragraphs.clone())),
            _ => {
                if !matches!(blocks.last(), Some(Block::Section { .. })) {
                    tracing::warn!(page = %page.page_id, heading = %b.heading_text, "subsection before any section; adding untitled parent");
                    blocks.push(Block::section(String::new(), Vec::new()));
                }
                if let Some(Block::Section { items, .. }) = blocks.last_mut() {
                    items.push(SectionItem::Subsection { title: b.heading_text.clone(), paragraphs: b.paragraphs.clone() });
                }
            }
        }
    }
    let tree = DocTree::from_text_blocks(page.page_id.clone(), blocks);
    let violations = tree.validate();
    if !violations.is_empty() {
        return Err(PageError::MalformedPage { page: page.page_id.clone(), reason: "tree validation failed".into(), violations });
    }
    Ok(tree)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub text_tokens: usize,
    pub label_tokens: usize,
    /// `label_tokens / text_tokens`.
    pub elision_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub source_id: String,
    pub text: String,
    pub label: String,
    pub stats: PairStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub pages: usize,
    pub pairs: usize,
    /// Pages whose label failed the roundtrip check.
    pub drops: usize,
    /// Pages rejected before serialization (empty or malformed).
    pub rejected: usize,
    pub mean_elision_ratio: f64,
    pub label_tokens: usize,
    pub text_tokens: usize,
}

pub enum PageOutcome {
    Pair(TrainingPair),
    Dropped { page: String, reason: String },
    Rejected(PageError),
}

pub struct LabelPipeline {
    cleaner: Cleaner,
    policy: SkipPolicy,
}

impl LabelPipeline {
    pub fn new(config: &CleanConfig, policy: SkipPolicy) -> Result<Self, PageError> {
        Ok(Self { cleaner: Cleaner::new(config)?, policy })
    }

    pub fn cleaner(&self) -> &Cleaner {
        &self.cleaner
    }

    pub fn process(&self, page: &RawWikiPage) -> PageOutcome {
        let tree = match self.cleaner.clean(page).and_then(|p| to_tree(&p)) {
            Ok(t) => t,
            Err(e) => return PageOutcome::Rejected(e),
        };
        let outcome = roundtrip(&tree, &self.policy);
        if outcome != RoundtripOutcome::Lossless {
            return PageOutcome::Dropped { page: page.page_id.clone(), reason: format!("{outcome:?}") };
        }
        let label = match serialize(&tree, &self.policy, true) {
            Ok(s) => s.text,
            Err(e) => return PageOutcome::Dropped { page: page.page_id.clone(), reason: e.to_string() },
        };
        let text_tokens = word_count(&tree.source_text);
        let label_tokens = word_count(&label);
        PageOutcome::Pair(TrainingPair {
            source_id: tree.source_id,
            text: tree.source_text,
            label,
            stats: PairStats {
                text_tokens,
                label_tokens,
                elision_ratio: if text_tokens == 0 { 0.0 } else { label_tokens as f64 / text_tokens as f64 },
            },
        })
    }

    /// Processes pages in parallel; output order follows input order.
    pub fn build_pairs(&self, pages: &[RawWikiPage]) -> (Vec<TrainingPair>, PipelineStats) {
        let outcomes: Vec<PageOutcome> = pages.par_iter().map(|p| self.process(p)).collect();
        let mut stats = PipelineStats { pages: pages.len(), ..Default::default() };
        let mut pairs = Vec::new();
        for o in outcomes {
            match o {
                PageOutcome::Pair(p) => {
                    stats.text_tokens += p.stats.text_tokens;
                    stats.label_tokens += p.stats.label_tokens;
                    stats.mean_elision_ratio += p.stats.elision_ratio;
                    pairs.push(p);
                }
                PageOutcome::Dropped { page, reason } => {
                    tracing::warn!(%page, %reason, "label failed roundtrip; dropped");
                    stats.drops += 1;
                }
                PageOutcome::Rejected(e) => {
                    tracing::warn!(error = %e, "page rejected");
                    stats.rejected += 1;
                }
            }
        }
        stats.pairs = pairs.len();
        if !pairs.is_empty() {
            stats.mean_elision_ratio /= pairs.len() as f64;
        }
        (pairs, stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doctree::NodeKind;
    use crate::xml_codec::{parse, restore};
    use proptest::prelude::*;

    fn block(level: u8, heading: &str, paras: &[&str]) -> WikiBlock {
        WikiBlock { heading_level: level, heading_text: heading.into(), paragraphs: paras.iter().map(|s| s.to_string()).collect() }
    }

    fn page(blocks: Vec<WikiBlock>) -> RawWikiPage {
        RawWikiPage { page_id: "p".into(), title: "T".into(), blocks }
    }

    fn cleaner() -> Cleaner {
        Cleaner::new(&CleanConfig::default()).unwrap()
    }

    #[test]
    fn stop_listed_sections_are_removed_with_their_subsections() {
        let p = page(vec![
            block(0, "", &["lead"]),
            block(1, "References", &["ref"]),
            block(2, "Books", &["book"]),
            block(1, "History", &["hist"]),
        ]);
        let c = cleaner().clean(&p).unwrap();
        let headings: Vec<_> = c.blocks.iter().map(|b| b.heading_text.as_str()).collect();
        assert_eq!(headings, ["", "History"]);
    }

    #[test]
    fn citations_and_links_are_stripped() {
        let c = cleaner();
        assert_eq!(c.clean_text("a television series[2] created by"), "a television series created by");
        assert_eq!(c.clean_text("aired on [[Disney Channel|the channel]] in 2015[citation needed]."), "aired on the channel in 2015.");
        assert_eq!(c.clean_text("see [[Maine]] [[File:Camp.jpg|thumb]] now"), "see Maine now");
    }

    #[test]
    fn nested_remnants_clean_to_a_fixpoint() {
        let c = cleaner();
        let once = c.clean_text("x [[a|[[b]]]] y [[1]]");
        assert_eq!(c.clean_text(&once), once);
    }

    #[test]
    fn page_with_only_references_is_empty() {
        let p = page(vec![block(1, "References", &["ref"]), block(1, "See also", &[])]);
        assert!(matches!(cleaner().clean(&p), Err(PageError::EmptyAfterClean(_))));
    }

    #[test]
    fn levels_map_to_tree_kinds() {
        let p = page(vec![block(0, "", &["lead"]), block(1, "Cast", &[]), block(2, "Main cast", &["m"]), block(1, "Plot", &["p"])]);
        let t = to_tree(&p).unwrap();
        let kinds: Vec<_> = t.preorder().iter().map(|&i| t.node(i).kind).collect();
        use NodeKind::*;
        assert_eq!(kinds, [Root, Abstract, Paragraph, Section, Subsection, Paragraph, Section, Paragraph]);
        assert_eq!(t.outline().titles, ["Cast", "Plot"]);
        assert_eq!(t.source_text, "lead\n\nm\n\np");
    }

    #[test]
    fn early_subsection_gets_an_untitled_section() {
        let t = to_tree(&page(vec![block(2, "Orphan", &["x"])])).unwrap();
        let s = t.children(t.root)[0];
        assert_eq!(t.node(s).kind, NodeKind::Section);
        assert_eq!(t.node(s).title.as_deref(), Some(""));
    }

    #[test]
    fn single_paragraph_page_is_abstract_only() {
        let t = to_tree(&page(vec![block(0, "", &["only"])])).unwrap();
        assert_eq!(t.sections().len(), 1);
        assert_eq!(t.node(t.sections()[0]).kind, NodeKind::Abstract);
    }

    #[test]
    fn lead_after_section_is_malformed() {
        let p = page(vec![block(1, "A", &["a"]), block(0, "", &["late"])]);
        assert!(matches!(to_tree(&p), Err(PageError::MalformedPage { .. })));
    }

    #[test]
    fn emitted_pairs_parse_cleanly_and_restore_exactly() {
        let long: String = (0..60).map(|i| format!("word{i}")).collect::<Vec<_>>().join(" ");
        let p = page(vec![block(0, "", &[&long]), block(1, "Body", &[&long, "short one"])]);
        let pipe = LabelPipeline::new(&CleanConfig::default(), SkipPolicy::default()).unwrap();
        let (pairs, stats) = pipe.build_pairs(&[p.clone(), p]);
        assert_eq!((stats.pairs, stats.drops, stats.rejected), (2, 0, 0));
        for pair in &pairs {
            let parsed = parse(&pair.label).unwrap();
            assert!(parsed.repairs.is_empty());
            let (_, report) = restore(&parsed.doc, &pair.text, &pair.source_id, &SkipPolicy::default());
            assert_eq!(report.exact, report.paragraphs.len());
            assert!(pair.stats.elision_ratio < 0.5);
        }
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(s in "[a-z \\[\\]|0-9:F]{0,60}") {
            let c = cleaner();
            let once = c.clean_text(&s);
            prop_assert_eq!(c.clean_text(&once), once);
        }
    }
}
