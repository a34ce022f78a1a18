use crate::doctree::{DocTree, NodeId, NodeKind, PARAGRAPH_SEPARATOR};
use crate::tokens::TokenCounter;

/// Stands in for each maximal run of omitted paragraphs.
pub const MARKER: &str = "...";

/// Heading line for a selected Section (`# `) or Subsection (`## `); untitled
/// blocks, the abstract and paragraphs have none.
pub fn heading(tree: &DocTree, id: NodeId) -> Option<String> {
    let node = tree.node(id);
    let title = node.title.as_deref().map(str::trim).filter(|t| !t.is_empty())?;
    match node.kind {
        NodeKind::Section => Some(format!("# {title}")),
        NodeKind::Subsection => Some(format!("## {title}")),
        _ => None,
    }
}

enum Piece<'a> {
    Text(&'a str),
    Owned(String),
    Marker,
}

/// Walks the tree in document order and yields the blocks of the assembled
/// context for `selected`.
fn pieces<'a>(tree: &'a DocTree, order: &[NodeId], headings: &'a [Option<String>], selected: &[bool], mut f: impl FnMut(Piece<'a>)) {
    let mut gap = false;
    let mut any = false;
    for &id in order {
        let node = tree.node(id);
        let piece = if node.kind == NodeKind::Paragraph {
            if !selected[id] {
                gap = true;
                continue;
            }
            Piece::Text(node.content.as_deref().unwrap_or(""))
        } else {
            match (&headings[id], selected[id]) {
                (Some(h), true) => Piece::Owned(h.clone()),
                _ => continue,
            }
        };
        if gap {
            f(Piece::Marker);
            gap = false;
        }
        f(piece);
        any = true;
    }
    if gap && any {
        f(Piece::Marker);
    }
}

fn document_order(tree: &DocTree) -> Vec<NodeId> {
    tree.preorder().into_iter().filter(|&i| i != tree.root).collect()
}

fn all_headings(tree: &DocTree) -> Vec<Option<String>> {
    (0..tree.len()).map(|i| heading(tree, i)).collect()
}

/// Selected content in document order, blocks separated by blank lines. An
/// empty selection assembles to the empty string.
pub fn assemble(tree: &DocTree, selected: &[bool]) -> String {
    let headings = all_headings(tree);
    let mut blocks: Vec<String> = Vec::new();
    pieces(tree, &document_order(tree), &headings, selected, |p| {
        blocks.push(match p {
            Piece::Text(t) => t.to_string(),
            Piece::Owned(s) => s,
            Piece::Marker => MARKER.to_string(),
        })
    });
    blocks.join(PARAGRAPH_SEPARATOR)
}

/// Token cost of any selection, from per-block counts. Counters work word by
/// word, so block counts add up to the count of the joined text.
pub struct CostModel {
    order: Vec<NodeId>,
    paragraph: Vec<bool>,
    /// Paragraph tokens, or heading tokens for titled blocks, else `None`.
    block: Vec<Option<usize>>,
    marker: usize,
}

impl CostModel {
    pub fn new(tree: &DocTree, counter: &dyn TokenCounter) -> Self {
        let block = (0..tree.len())
            .map(|i| {
                let n = tree.node(i);
                match n.kind {
                    NodeKind::Paragraph => Some(counter.count(n.content.as_deref().unwrap_or(""))),
                    _ => heading(tree, i).map(|h| counter.count(&h)),
                }
            })
            .collect();
        Self {
            order: document_order(tree),
            paragraph: (0..tree.len()).map(|i| tree.node(i).kind == NodeKind::Paragraph).collect(),
            block,
            marker: counter.count(MARKER),
        }
    }

    /// Same walk as [`assemble`], summing counts instead of building text.
    pub fn cost(&self, selected: &[bool]) -> usize {
        let mut total = 0;
        let mut gap = false;
        let mut any = false;
        for &id in &self.order {
            if self.paragraph[id] && !selected[id] {
                gap = true;
                continue;
            }
            let Some(c) = self.block[id].filter(|_| selected[id]) else { continue };
            if gap {
                total += self.marker;
                gap = false;
            }
            total += c;
            any = true;
        }
        if gap && any {
            total += self.marker;
        }
        total
    }
}
