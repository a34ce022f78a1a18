//! Hierarchical document tree: root, optional abstract, sections, subsections
//! and paragraph leaves.
//!
//! Node ids are assigned in pre-order when a tree is built, so a node's id is
//! also its document position among all nodes.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tokens::normalize_whitespace;

pub type NodeId = usize;

/// Separator placed between paragraphs when a plain text is assembled from
/// paragraphs.
pub const PARAGRAPH_SEPARATOR: &str = "\n\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Root,
    Abstract,
    Section,
    Subsection,
    Paragraph,
}

impl NodeKind {
    fn may_contain(self, child: NodeKind) -> bool {
        use NodeKind::*;
        matches!(
            (self, child),
            (Root, Abstract)
                | (Root, Section)
                | (Abstract, Paragraph)
                | (Section, Subsection)
                | (Section, Paragraph)
                | (Subsection, Paragraph)
        )
    }

    pub fn is_titled(self) -> bool {
        matches!(self, NodeKind::Section | NodeKind::Subsection)
    }
}

/// Half-open byte interval `[start, end)` into the tree's source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn empty_at(pos: usize) -> Self {
        Self { start: pos, end: pos }
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl From<(usize, usize)> for Span {
    fn from((start, end): (usize, usize)) -> Self {
        Self { start, end }
    }
}

impl From<Span> for (usize, usize) {
    fn from(s: Span) -> Self {
        (s.start, s.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocNode {
    pub id: NodeId,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default)]
    pub children: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_span: Option<Span>,
    /// Set on paragraphs whose text could not be located in the source; their
    /// span is zero-width and their content is whatever the structurer kept.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTree {
    pub source_id: String,
    pub source_text: String,
    pub root: NodeId,
    pub nodes: Vec<DocNode>,
}

/// Abstract text plus the ordered section titles; the input to global section
/// selection.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Outline {
    pub abstract_text: String,
    pub titles: Vec<String>,
}

/// Top-level block used to build a tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Block<P> {
    Abstract(Vec<P>),
    Section { title: String, items: Vec<SectionItem<P>> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SectionItem<P> {
    Paragraph(P),
    Subsection { title: String, paragraphs: Vec<P> },
}

/// A paragraph already located in the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedParagraph {
    pub content: String,
    pub span: Span,
    pub degraded: bool,
}

impl<P> Block<P> {
    pub fn section(title: impl Into<String>, paragraphs: Vec<P>) -> Self {
        Block::Section { title: title.into(), items: paragraphs.into_iter().map(SectionItem::Paragraph).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationRule {
    IdMismatch,
    RootInvalid,
    DanglingChild,
    ParentMismatch,
    DuplicateChild,
    Unreachable,
    LeafHasChild,
    BadChildKind,
    MultipleAbstract,
    AbstractNotFirst,
    MissingTitle,
    UnexpectedTitle,
    MissingContent,
    UnexpectedContent,
    MissingSpan,
    SpanOutOfBounds,
    SpanOverlap,
    SpanOutsideParent,
    ContentSpanMismatch,
    LossyContent,
}

impl fmt::Display for ViolationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("unknown"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node: Option<NodeId>,
    pub rule: ViolationRule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(n) => write!(f, "node {n}: {} ({})", self.rule, self.detail),
            None => write!(f, "tree: {} ({})", self.rule, self.detail),
        }
    }
}

struct TreeAssembler {
    nodes: Vec<DocNode>,
    cursor: usize,
}

impl TreeAssembler {
    fn push(&mut self, kind: NodeKind, parent: Option<NodeId>, title: Option<String>) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(DocNode { id, kind, title, content: None, children: Vec::new(), parent, char_span: None, degraded: false });
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        id
    }

    fn paragraph(&mut self, parent: NodeId, p: PlacedParagraph) {
        let id = self.push(NodeKind::Paragraph, Some(parent), None);
        let node = &mut self.nodes[id];
        node.content = Some(p.content);
        node.char_span = Some(p.span);
        node.degraded = p.degraded;
        self.cursor = self.cursor.max(p.span.end);
    }

    fn close(&mut self, id: NodeId) {
        let span = match (self.nodes[id].children.first(), self.nodes[id].children.last()) {
            (Some(&first), Some(&last)) => {
                let s = self.nodes[first].char_span.unwrap_or(Span::empty_at(self.cursor));
                let e = self.nodes[last].char_span.unwrap_or(Span::empty_at(self.cursor));
                Span::new(s.start, e.end)
            }
            _ => Span::empty_at(self.cursor),
        };
        self.nodes[id].char_span = Some(span);
    }
}

fn clean_title(t: &str) -> String {
    normalize_whitespace(t)
}

impl DocTree {
    /// Builds a tree from plain paragraph strings. The source text is the
    /// trimmed paragraphs joined by [`PARAGRAPH_SEPARATOR`]; blank paragraphs
    /// are dropped.
    pub fn from_text_blocks(source_id: impl Into<String>, blocks: Vec<Block<String>>) -> Self {
        let mut text = String::new();
        let mut place = |p: String| -> Option<PlacedParagraph> {
            let p = p.trim();
            if p.is_empty() {
                return None;
            }
            if !text.is_empty() {
                text.push_str(PARAGRAPH_SEPARATOR);
            }
            let start = text.len();
            text.push_str(p);
            Some(PlacedParagraph { content: p.to_string(), span: Span::new(start, text.len()), degraded: false })
        };
        let placed: Vec<Block<PlacedParagraph>> = blocks
            .into_iter()
            .map(|b| match b {
                Block::Abstract(ps) => Block::Abstract(ps.into_iter().filter_map(&mut place).collect()),
                Block::Section { title, items } => Block::Section {
                    title,
                    items: items
                        .into_iter()
                        .filter_map(|it| match it {
                            SectionItem::Paragraph(p) => place(p).map(SectionItem::Paragraph),
                            SectionItem::Subsection { title, paragraphs } => {
                                Some(SectionItem::Subsection { title, paragraphs: paragraphs.into_iter().filter_map(&mut place).collect() })
                            }
                        })
                        .collect(),
                },
            })
            .collect();
        Self::from_placed_blocks(source_id, text, placed)
    }

    /// Builds a tree from paragraphs that already carry their spans in
    /// `source_text`. Ids are assigned in pre-order; section titles are
    /// whitespace-normalized.
    pub fn from_placed_blocks(source_id: impl Into<String>, source_text: impl Into<String>, blocks: Vec<Block<PlacedParagraph>>) -> Self {
        let mut asm = TreeAssembler { nodes: Vec::new(), cursor: 0 };
        let root = asm.push(NodeKind::Root, None, None);
        for block in blocks {
            match block {
                Block::Abstract(paragraphs) => {
                    let id = asm.push(NodeKind::Abstract, Some(root), None);
                    for p in paragraphs {
                        asm.paragraph(id, p);
                    }
                    asm.close(id);
                }
                Block::Section { title, items } => {
                    let id = asm.push(NodeKind::Section, Some(root), Some(clean_title(&title)));
                    for item in items {
                        match item {
                            SectionItem::Paragraph(p) => asm.paragraph(id, p),
                            SectionItem::Subsection { title, paragraphs } => {
                                let sub = asm.push(NodeKind::Subsection, Some(id), Some(clean_title(&title)));
                                for p in paragraphs {
                                    asm.paragraph(sub, p);
                                }
                                asm.close(sub);
                            }
                        }
                    }
                    asm.close(id);
                }
            }
        }
        DocTree { source_id: source_id.into(), source_text: source_text.into(), root, nodes: asm.nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn node(&self, id: NodeId) -> &DocNode {
        &self.nodes[id]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    /// All node ids in pre-order (document order), starting at the root.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if id >= self.nodes.len() || std::mem::replace(&mut seen[id], true) {
                continue;
            }
            out.push(id);
            stack.extend(self.nodes[id].children.iter().rev().copied());
        }
        out
    }

    /// `id` and all of its descendants, in pre-order.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev().copied());
        }
        out
    }

    /// Paragraph leaves in document order.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.preorder().into_iter().filter(|&id| self.nodes[id].kind == NodeKind::Paragraph).collect()
    }

    /// The abstract (if any) followed by the sections, in document order.
    pub fn sections(&self) -> Vec<NodeId> {
        self.preorder().into_iter().filter(|&id| matches!(self.nodes[id].kind, NodeKind::Abstract | NodeKind::Section)).collect()
    }

    pub fn abstract_node(&self) -> Option<NodeId> {
        self.nodes[self.root].children.iter().copied().find(|&c| self.nodes[c].kind == NodeKind::Abstract)
    }

    /// Concatenated text of a subtree's paragraphs.
    pub fn subtree_text(&self, id: NodeId) -> String {
        self.subtree(id).into_iter().filter_map(|n| self.nodes[n].content.as_deref()).collect::<Vec<_>>().join(PARAGRAPH_SEPARATOR)
    }

    pub fn outline(&self) -> Outline {
        let abstract_text = self.abstract_node().map(|a| self.subtree_text(a)).unwrap_or_default();
        let titles = self
            .sections()
            .into_iter()
            .filter(|&id| self.nodes[id].kind == NodeKind::Section)
            .map(|id| self.nodes[id].title.clone().unwrap_or_default())
            .collect();
        Outline { abstract_text, titles }
    }

    /// Compares kinds, titles, paragraph contents and the parent/child shape,
    /// ignoring spans.
    pub fn same_structure_and_text(&self, other: &DocTree) -> bool {
        self.root == other.root
            && self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(&other.nodes).all(|(a, b)| {
                a.kind == b.kind && a.title == b.title && a.content == b.content && a.children == b.children && a.parent == b.parent
            })
    }

    /// Checks every structural invariant; an empty result means the tree is
    /// well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut flag = |node: Option<NodeId>, rule: ViolationRule, detail: String| {
            out.push(Violation { node, rule, detail });
        };
        let n = self.nodes.len();

        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                flag(Some(i), ViolationRule::IdMismatch, format!("stored id {}", node.id));
            }
        }
        if self.root >= n {
            flag(None, ViolationRule::RootInvalid, format!("root id {} out of range", self.root));
            return out;
        }
        let root = &self.nodes[self.root];
        if root.kind != NodeKind::Root || root.parent.is_some() {
            flag(Some(self.root), ViolationRule::RootInvalid, "root must be kind root without parent".into());
        }
        for node in &self.nodes {
            if node.kind == NodeKind::Root && node.id != self.root {
                flag(Some(node.id), ViolationRule::RootInvalid, "second root node".into());
            }
        }

        let mut parent_count = vec![0usize; n];
        for node in &self.nodes {
            for &c in &node.children {
                if c >= n {
                    flag(Some(node.id), ViolationRule::DanglingChild, format!("child {c} does not exist"));
                    continue;
                }
                parent_count[c] += 1;
                let child = &self.nodes[c];
                if child.parent != Some(node.id) {
                    flag(Some(c), ViolationRule::ParentMismatch, format!("listed under {} but parent is {:?}", node.id, child.parent));
                }
                if node.kind == NodeKind::Paragraph {
                    flag(Some(node.id), ViolationRule::LeafHasChild, format!("paragraph has child {c}"));
                } else if !node.kind.may_contain(child.kind) {
                    flag(Some(c), ViolationRule::BadChildKind, format!("{:?} under {:?}", child.kind, node.kind));
                }
            }
        }
        for (i, &count) in parent_count.iter().enumerate() {
            if count > 1 {
                flag(Some(i), ViolationRule::DuplicateChild, format!("listed as a child {count} times"));
            }
        }

        let reachable: HashSet<NodeId> = self.preorder().into_iter().collect();
        for i in 0..n {
            if !reachable.contains(&i) {
                flag(Some(i), ViolationRule::Unreachable, "not reachable from root".into());
            }
        }

        let abstracts: Vec<NodeId> = root.children.iter().copied().filter(|&c| c < n && self.nodes[c].kind == NodeKind::Abstract).collect();
        if abstracts.len() > 1 {
            flag(Some(abstracts[1]), ViolationRule::MultipleAbstract, format!("{} abstracts", abstracts.len()));
        }
        if let Some(&a) = abstracts.first() {
            if root.children.first() != Some(&a) {
                flag(Some(a), ViolationRule::AbstractNotFirst, "abstract must precede all sections".into());
            }
        }

        for node in &self.nodes {
            if node.kind.is_titled() {
                if node.title.is_none() {
                    flag(Some(node.id), ViolationRule::MissingTitle, format!("{:?} without title", node.kind));
                }
            } else if node.title.is_some() {
                flag(Some(node.id), ViolationRule::UnexpectedTitle, format!("{:?} with title", node.kind));
            }
            match (node.kind, &node.content) {
                (NodeKind::Paragraph, None) => flag(Some(node.id), ViolationRule::MissingContent, "paragraph without content".into()),
                (NodeKind::Paragraph, Some(_)) | (_, None) => {}
                (_, Some(_)) => flag(Some(node.id), ViolationRule::UnexpectedContent, format!("{:?} carries content", node.kind)),
            }
        }

        let text_len = self.source_text.len();
        for node in &self.nodes {
            if node.id == self.root {
                continue;
            }
            let Some(span) = node.char_span else {
                flag(Some(node.id), ViolationRule::MissingSpan, "non-root node without span".into());
                continue;
            };
            if span.start > span.end
                || span.end > text_len
                || !self.source_text.is_char_boundary(span.start)
                || !self.source_text.is_char_boundary(span.end)
            {
                flag(Some(node.id), ViolationRule::SpanOutOfBounds, format!("[{}, {}) in text of {text_len} bytes", span.start, span.end));
                continue;
            }
            if node.kind == NodeKind::Paragraph && !node.degraded {
                if let Some(content) = &node.content {
                    let slice = &self.source_text[span.start..span.end];
                    if normalize_whitespace(slice) != normalize_whitespace(content) {
                        flag(Some(node.id), ViolationRule::ContentSpanMismatch, "content differs from its source span".into());
                    }
                }
            }
        }
        for node in &self.nodes {
            let spans: Vec<(NodeId, Span)> =
                node.children.iter().filter(|&&c| c < n).filter_map(|&c| self.nodes[c].char_span.map(|s| (c, s))).collect();
            for w in spans.windows(2) {
                if w[0].1.end > w[1].1.start {
                    flag(
                        Some(w[1].0),
                        ViolationRule::SpanOverlap,
                        format!("starts at {} before sibling {} ends at {}", w[1].1.start, w[0].0, w[0].1.end),
                    );
                }
            }
            if node.id != self.root {
                if let Some(ps) = node.char_span {
                    for (c, s) in &spans {
                        if !ps.contains(s) {
                            flag(
                                Some(*c),
                                ViolationRule::SpanOutsideParent,
                                format!("[{}, {}) outside parent [{}, {})", s.start, s.end, ps.start, ps.end),
                            );
                        }
                    }
                }
            }
        }

        let joined = self
            .leaves()
            .into_iter()
            .filter(|&id| !self.nodes[id].degraded)
            .filter_map(|id| self.nodes[id].content.as_deref())
            .collect::<Vec<_>>()
            .join(" ");
        if normalize_whitespace(&joined) != normalize_whitespace(&self.source_text) {
            flag(None, ViolationRule::LossyContent, "paragraphs do not reproduce the source text".into());
        }
        out
    }
}
