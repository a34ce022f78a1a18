//! Flat XML-like encoding of a [`DocTree`] and its inverse.
//!
//! The grammar has eight tags:
//!
//! ```text
//! <section: {title}>  </section: {title}>
//! <subsection: {title}>  </subsection: {title}>
//! <abstract>  </abstract>  <skip>  <br>
//! ```
//!
//! Paragraphs inside a block are separated by `<br>`. With elision enabled,
//! long paragraphs keep only their first and last `k` words around a
//! `<skip>`; [`restore`] recovers the full text by aligning those words
//! against the original document.

mod escape;
mod parse;
mod restore;
mod serialize;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doctree::{DocTree, Violation};

pub use escape::{escape, unescape};
pub use parse::{parse, ParseOutput, Repair, RepairRule};
pub use restore::{restore, AlignmentReport, MatchStatus, ParagraphAlignment};
pub use serialize::{serialize, SerializeWarning, Serialized};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("tree is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidTree(Vec<Violation>),
    #[error("input has no content")]
    EmptyInput,
    #[error("invalid skip policy: {0}")]
    InvalidPolicy(String),
}

/// How paragraphs are elided: the first and last `k` words are kept for any
/// paragraph longer than `min_paragraph_tokens` words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipPolicy {
    k: usize,
    min_paragraph_tokens: usize,
}

impl SkipPolicy {
    pub const DEFAULT_K: usize = 5;
    pub const DEFAULT_MIN_PARAGRAPH_TOKENS: usize = 12;

    pub fn new(k: usize, min_paragraph_tokens: usize) -> Result<Self, CodecError> {
        if k == 0 {
            return Err(CodecError::InvalidPolicy("k must be at least 1".into()));
        }
        if min_paragraph_tokens < 2 * k + 1 {
            return Err(CodecError::InvalidPolicy(format!(
                "min_paragraph_tokens ({min_paragraph_tokens}) must be at least 2k+1 ({})",
                2 * k + 1
            )));
        }
        Ok(Self { k, min_paragraph_tokens })
    }

    /// Policy for a given `k`, raising the elision threshold to `2k+1` when the
    /// default threshold would be too small.
    pub fn with_k(k: usize) -> Result<Self, CodecError> {
        Self::new(k, Self::DEFAULT_MIN_PARAGRAPH_TOKENS.max(2 * k + 1))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn min_paragraph_tokens(&self) -> usize {
        self.min_paragraph_tokens
    }

    pub fn elides(&self, word_count: usize) -> bool {
        word_count > self.min_paragraph_tokens
    }
}

impl Default for SkipPolicy {
    fn default() -> Self {
        Self { k: Self::DEFAULT_K, min_paragraph_tokens: Self::DEFAULT_MIN_PARAGRAPH_TOKENS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    SectionOpen,
    SectionClose,
    SubsectionOpen,
    SubsectionClose,
    AbstractOpen,
    AbstractClose,
    Skip,
    Br,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct XmlTag {
    pub kind: TagKind,
    /// Unescaped title; only section and subsection tags carry one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl XmlTag {
    pub fn bare(kind: TagKind) -> Self {
        Self { kind, title: None }
    }

    pub fn titled(kind: TagKind, title: impl Into<String>) -> Self {
        Self { kind, title: Some(title.into()) }
    }

    pub fn is_open(&self) -> bool {
        matches!(self.kind, TagKind::SectionOpen | TagKind::SubsectionOpen | TagKind::AbstractOpen)
    }

    pub fn is_close(&self) -> bool {
        matches!(self.kind, TagKind::SectionClose | TagKind::SubsectionClose | TagKind::AbstractClose)
    }
}

impl fmt::Display for XmlTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let title = escape(self.title.as_deref().unwrap_or(""));
        match self.kind {
            TagKind::SectionOpen => write!(f, "<section: {title}>"),
            TagKind::SectionClose => write!(f, "</section: {title}>"),
            TagKind::SubsectionOpen => write!(f, "<subsection: {title}>"),
            TagKind::SubsectionClose => write!(f, "</subsection: {title}>"),
            TagKind::AbstractOpen => f.write_str("<abstract>"),
            TagKind::AbstractClose => f.write_str("</abstract>"),
            TagKind::Skip => f.write_str("<skip>"),
            TagKind::Br => f.write_str("<br>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XmlItem {
    Tag(XmlTag),
    /// Escaped, non-empty text run.
    Text(String),
}

/// Flat item sequence of the markup.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct XmlDoc {
    pub items: Vec<XmlItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_hint: Option<String>,
}

impl XmlDoc {
    pub fn tags(&self) -> impl Iterator<Item = &XmlTag> {
        self.items.iter().filter_map(|i| match i {
            XmlItem::Tag(t) => Some(t),
            XmlItem::Text(_) => None,
        })
    }
}

/// Canonical rendering: block tags and `<br>` on their own lines, `<skip>`
/// inline between single spaces.
impl fmt::Display for XmlDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        fn newline(out: &mut String) {
            if !out.is_empty() && !out.ends_with('\n') {
                out.push('\n');
            }
        }
        for item in &self.items {
            match item {
                XmlItem::Text(t) if out.ends_with('\n') => out.push_str(t.trim_start_matches('\n')),
                XmlItem::Text(t) => out.push_str(t),
                XmlItem::Tag(t) if t.kind == TagKind::Skip => {
                    if !out.is_empty() && !out.ends_with(char::is_whitespace) {
                        out.push(' ');
                    }
                    out.push_str("<skip> ");
                }
                XmlItem::Tag(t) => {
                    if out.ends_with(' ') {
                        out.pop();
                    }
                    newline(&mut out);
                    out.push_str(&t.to_string());
                    out.push('\n');
                }
            }
        }
        f.write_str(out.trim_end())
    }
}

/// Result of a serialize → parse → restore cycle on a tree's own source text.
#[derive(Debug, Clone, PartialEq)]
pub enum RoundtripOutcome {
    Lossless,
    Repairs(Vec<Repair>),
    Alignment(AlignmentReport),
    Mismatch,
    Invalid(String),
}

/// Runs serialize (with elision) → parse → restore and compares the result
/// with `tree`.
pub fn roundtrip(tree: &DocTree, policy: &SkipPolicy) -> RoundtripOutcome {
    let serialized = match serialize(tree, policy, true) {
        Ok(s) => s,
        Err(e) => return RoundtripOutcome::Invalid(e.to_string()),
    };
    let parsed = match parse(&serialized.text) {
        Ok(p) => p,
        Err(CodecError::EmptyInput) if tree.leaves().is_empty() && tree.sections().is_empty() => return RoundtripOutcome::Lossless,
        Err(e) => return RoundtripOutcome::Invalid(e.to_string()),
    };
    if !parsed.repairs.is_empty() {
        return RoundtripOutcome::Repairs(parsed.repairs);
    }
    let (restored, report) = restore(&parsed.doc, &tree.source_text, &tree.source_id, policy);
    if report.exact != report.paragraphs.len() || report.absorbed_tokens > 0 {
        return RoundtripOutcome::Alignment(report);
    }
    if !restored.same_structure_and_text(tree) {
        return RoundtripOutcome::Mismatch;
    }
    RoundtripOutcome::Lossless
}

pub fn roundtrip_check(tree: &DocTree, policy: &SkipPolicy) -> bool {
    roundtrip(tree, policy) == RoundtripOutcome::Lossless
}
