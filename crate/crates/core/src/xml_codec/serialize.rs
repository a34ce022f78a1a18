use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{escape, CodecError, SkipPolicy, TagKind, XmlDoc, XmlItem, XmlTag};
use crate::doctree::{DocTree, NodeId, NodeKind};
use crate::tokens::normalize_whitespace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SerializeWarning {
    /// Two sibling blocks share a title after case folding; close tags can no
    /// longer tell them apart by title.
    TitleCollision { parent: NodeId, title: String },
}

#[derive(Debug, Clone)]
pub struct Serialized {
    pub text: String,
    pub doc: XmlDoc,
    pub warnings: Vec<SerializeWarning>,
}

pub fn serialize(tree: &DocTree, policy: &SkipPolicy, elide: bool) -> Result<Serialized, CodecError> {
    let violations = tree.validate();
    if !violations.is_empty() {
        return Err(CodecError::InvalidTree(violations));
    }
    let mut w = Writer { tree, policy, elide, items: Vec::new(), warnings: Vec::new() };
    w.children(tree.root);
    let doc = XmlDoc { items: w.items, source_hint: Some(tree.source_id.clone()) };
    Ok(Serialized { text: doc.to_string(), doc, warnings: w.warnings })
}

struct Writer<'a> {
    tree: &'a DocTree,
    policy: &'a SkipPolicy,
    elide: bool,
    items: Vec<XmlItem>,
    warnings: Vec<SerializeWarning>,
}

impl Writer<'_> {
    fn children(&mut self, id: NodeId) {
        let mut seen = HashSet::new();
        let mut prev_paragraph = false;
        for &c in self.tree.children(id) {
            let node = self.tree.node(c);
            if let Some(t) = &node.title {
                let key = t.trim().to_lowercase();
                if !seen.insert(key) {
                    self.warnings.push(SerializeWarning::TitleCollision { parent: id, title: t.clone() });
                }
            }
            match node.kind {
                NodeKind::Paragraph => {
                    if prev_paragraph {
                        self.items.push(XmlItem::Tag(XmlTag::bare(TagKind::Br)));
                    }
                    self.paragraph(node.content.as_deref().unwrap_or(""));
                    prev_paragraph = true;
                    continue;
                }
                NodeKind::Abstract => self.block(c, XmlTag::bare(TagKind::AbstractOpen), XmlTag::bare(TagKind::AbstractClose)),
                NodeKind::Section => {
                    let t = node.title.clone().unwrap_or_default();
                    self.block(c, XmlTag::titled(TagKind::SectionOpen, t.clone()), XmlTag::titled(TagKind::SectionClose, t))
                }
                NodeKind::Subsection => {
                    let t = node.title.clone().unwrap_or_default();
                    self.block(c, XmlTag::titled(TagKind::SubsectionOpen, t.clone()), XmlTag::titled(TagKind::SubsectionClose, t))
                }
                NodeKind::Root => {}
            }
            prev_paragraph = false;
        }
    }

    fn block(&mut self, id: NodeId, open: XmlTag, close: XmlTag) {
        self.items.push(XmlItem::Tag(open));
        self.children(id);
        self.items.push(XmlItem::Tag(close));
    }

    fn paragraph(&mut self, content: &str) {
        let words: Vec<&str> = content.split_whitespace().collect();
        if words.is_empty() {
            return;
        }
        let k = self.policy.k();
        if self.elide && self.policy.elides(words.len()) {
            self.items.push(XmlItem::Text(escape(&words[..k].join(" "))));
            self.items.push(XmlItem::Tag(XmlTag::bare(TagKind::Skip)));
            self.items.push(XmlItem::Text(escape(&words[words.len() - k..].join(" "))));
        } else {
            self.items.push(XmlItem::Text(escape(&normalize_whitespace(content))));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doctree::{Block, SectionItem};

    fn s(x: &str) -> String {
        x.to_string()
    }

    #[test]
    fn long_paragraph_keeps_first_and_last_k_words() {
        let para = (1..=30).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let t = DocTree::from_text_blocks("d", vec![Block::Abstract(vec![para])]);
        let out = serialize(&t, &SkipPolicy::default(), true).unwrap();
        assert_eq!(out.text, "<abstract>\nw1 w2 w3 w4 w5 <skip> w26 w27 w28 w29 w30\n</abstract>");
        let full = serialize(&t, &SkipPolicy::default(), false).unwrap();
        assert!(!full.text.contains("<skip>"));
        assert!(full.text.contains("w17"));
    }

    #[test]
    fn short_paragraph_is_verbatim() {
        // 12 words: at the threshold, not above it
        let para = (1..=12).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let t = DocTree::from_text_blocks("d", vec![Block::section("A", vec![para.clone()])]);
        let out = serialize(&t, &SkipPolicy::default(), true).unwrap();
        assert_eq!(out.text, format!("<section: A>\n{para}\n</section: A>"));
    }

    #[test]
    fn single_paragraph_section_has_no_br() {
        let t = DocTree::from_text_blocks("d", vec![Block::section("Broadcast", vec![s("In Canada it aired.")])]);
        let out = serialize(&t, &SkipPolicy::default(), true).unwrap();
        assert_eq!(out.text, "<section: Broadcast>\nIn Canada it aired.\n</section: Broadcast>");
    }

    #[test]
    fn paragraphs_are_separated_by_br_and_nested_blocks_by_tags() {
        let t = DocTree::from_text_blocks(
            "d",
            vec![Block::Section {
                title: s("S"),
                items: vec![
                    SectionItem::Paragraph(s("one")),
                    SectionItem::Paragraph(s("two")),
                    SectionItem::Subsection { title: s("Sub"), paragraphs: vec![s("three")] },
                    SectionItem::Paragraph(s("four")),
                ],
            }],
        );
        let out = serialize(&t, &SkipPolicy::default(), true).unwrap();
        assert_eq!(out.text, "<section: S>\none\n<br>\ntwo\n<subsection: Sub>\nthree\n</subsection: Sub>\nfour\n</section: S>");
    }

    #[test]
    fn tag_like_content_is_escaped() {
        let t = DocTree::from_text_blocks("d", vec![Block::Abstract(vec![s("x <skip> & <br> y")])]);
        let out = serialize(&t, &SkipPolicy::default(), true).unwrap();
        assert_eq!(out.text, "<abstract>\nx &lt;skip&gt; &amp; &lt;br&gt; y\n</abstract>");
    }

    #[test]
    fn sibling_title_collision_is_a_warning() {
        let t = DocTree::from_text_blocks("d", vec![Block::section("Reception", vec![s("a")]), Block::section("reception ", vec![s("b")])]);
        let out = serialize(&t, &SkipPolicy::default(), true).unwrap();
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn invalid_tree_is_rejected() {
        let mut t = DocTree::from_text_blocks("d", vec![Block::section("A", vec![s("a")])]);
        t.nodes[1].title = None;
        assert!(matches!(serialize(&t, &SkipPolicy::default(), true), Err(CodecError::InvalidTree(_))));
    }
}
