//! Rebuilding a full [`DocTree`] from parsed markup and the original text.
//!
//! Paragraphs are aligned left to right against the original's words with a
//! monotone cursor. An elided paragraph is located by its retained head
//! (first `k` words) and tail (last `k` words); a verbatim paragraph by all of
//! its words. Exact search comes first. When it fails, the head is retried
//! with leading words dropped one at a time (down to three words) and the tail
//! with trailing words dropped, both inside a forward window of four times the
//! expected paragraph length. Before that, the boundary word next to the
//! `<skip>` may match a fragment of a source word, since generated output
//! sometimes cuts words there.
//!
//! Words between aligned paragraphs that no paragraph claims are absorbed into
//! the preceding paragraph (the first paragraph also takes any leading
//! words), so the restored paragraphs always tile the original.

use serde::{Deserialize, Serialize};

use super::{unescape, SkipPolicy, TagKind, XmlDoc, XmlItem};
use crate::doctree::{Block, DocTree, NodeId, PlacedParagraph, SectionItem, Span};
use crate::tokens::{word_spans, WordSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStatus {
    Exact,
    Fuzzy,
    PrefixOnly,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParagraphAlignment {
    pub node: NodeId,
    pub status: MatchStatus,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub paragraphs: Vec<ParagraphAlignment>,
    pub exact: usize,
    pub fuzzy: usize,
    pub prefix_only: usize,
    pub failed: usize,
    /// Original words attached to a paragraph beyond its own match.
    pub absorbed_tokens: usize,
    /// Original words not covered by any paragraph.
    pub unclaimed_tokens: usize,
}

impl AlignmentReport {
    pub fn failure_rate(&self) -> f64 {
        if self.paragraphs.is_empty() {
            0.0
        } else {
            self.failed as f64 / self.paragraphs.len() as f64
        }
    }
}

#[derive(Debug, Default)]
struct RawParagraph {
    head: Vec<String>,
    tail: Vec<String>,
    elided: bool,
}

impl RawParagraph {
    fn is_empty(&self) -> bool {
        self.head.is_empty() && self.tail.is_empty()
    }

    fn retained_text(&self) -> String {
        self.head.iter().chain(&self.tail).cloned().collect::<Vec<_>>().join(" ")
    }
}

#[derive(Default)]
struct Accumulator {
    current: RawParagraph,
}

impl Accumulator {
    fn words(&mut self, escaped: &str) {
        let text = unescape(escaped);
        let target = if self.current.elided { &mut self.current.tail } else { &mut self.current.head };
        target.extend(text.split_whitespace().map(str::to_string));
    }

    fn skip(&mut self) {
        // with several skips only the text after the last one is the tail
        self.current.elided = true;
        self.current.tail.clear();
    }

    fn take(&mut self) -> Option<RawParagraph> {
        let p = std::mem::take(&mut self.current);
        (!p.is_empty()).then_some(p)
    }
}

#[derive(PartialEq)]
enum Where {
    Outside,
    Abstract,
    Section,
    Subsection,
}

struct Skeleton {
    blocks: Vec<Block<usize>>,
    paragraphs: Vec<RawParagraph>,
    at: Where,
}

impl Skeleton {
    fn ensure_open(&mut self) {
        if self.at == Where::Outside {
            if self.blocks.is_empty() {
                self.blocks.push(Block::Abstract(Vec::new()));
                self.at = Where::Abstract;
            } else {
                self.blocks.push(Block::Section { title: String::new(), items: Vec::new() });
                self.at = Where::Section;
            }
        }
    }

    fn attach(&mut self, p: RawParagraph) {
        self.ensure_open();
        let idx = self.paragraphs.len();
        self.paragraphs.push(p);
        match self.blocks.last_mut() {
            Some(Block::Abstract(ps)) => ps.push(idx),
            Some(Block::Section { items, .. }) => match (&self.at, items.last_mut()) {
                (Where::Subsection, Some(SectionItem::Subsection { paragraphs, .. })) => paragraphs.push(idx),
                _ => items.push(SectionItem::Paragraph(idx)),
            },
            None => unreachable!("ensure_open pushed a block"),
        }
    }
}

fn skeleton(xml: &XmlDoc) -> Skeleton {
    let mut sk = Skeleton { blocks: Vec::new(), paragraphs: Vec::new(), at: Where::Outside };
    let mut acc = Accumulator::default();
    for item in &xml.items {
        let kind = match item {
            XmlItem::Text(t) => {
                if !t.trim().is_empty() {
                    sk.ensure_open();
                    acc.words(t);
                }
                continue;
            }
            XmlItem::Tag(tag) => tag,
        };
        if kind.kind == TagKind::Skip {
            sk.ensure_open();
            acc.skip();
            continue;
        }
        if let Some(p) = acc.take() {
            sk.attach(p);
        }
        let title = kind.title.clone().unwrap_or_default();
        match kind.kind {
            TagKind::AbstractOpen => {
                sk.blocks.push(Block::Abstract(Vec::new()));
                sk.at = Where::Abstract;
            }
            TagKind::SectionOpen => {
                sk.blocks.push(Block::Section { title, items: Vec::new() });
                sk.at = Where::Section;
            }
            TagKind::SubsectionOpen => {
                if !matches!(sk.at, Where::Section | Where::Subsection) {
                    sk.blocks.push(Block::Section { title: String::new(), items: Vec::new() });
                }
                if let Some(Block::Section { items, .. }) = sk.blocks.last_mut() {
                    items.push(SectionItem::Subsection { title, paragraphs: Vec::new() });
                }
                sk.at = Where::Subsection;
            }
            TagKind::SubsectionClose => {
                if sk.at == Where::Subsection {
                    sk.at = Where::Section;
                }
            }
            TagKind::SectionClose | TagKind::AbstractClose => sk.at = Where::Outside,
            TagKind::Br | TagKind::Skip => {}
        }
    }
    if let Some(p) = acc.take() {
        sk.attach(p);
    }
    sk
}

/// Which boundary word of a retained run may be a fragment of the source
/// word: the head can end mid-word and the tail can start mid-word.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Cut {
    None,
    Leading,
    Trailing,
}

enum Lookahead<'a> {
    End,
    Words(&'a [String]),
    Unknown,
}

#[derive(Debug, Clone, Copy)]
enum Outcome {
    Matched { start: usize, end: usize, status: MatchStatus },
    Failed,
}

struct Aligner<'a> {
    words: Vec<WordSpan<'a>>,
    policy: SkipPolicy,
}

impl Aligner<'_> {
    fn n(&self) -> usize {
        self.words.len()
    }

    fn matches_at(&self, needle: &[String], pos: usize) -> bool {
        self.matches_loosely(needle, pos, Cut::None)
    }

    fn matches_loosely(&self, needle: &[String], pos: usize, cut: Cut) -> bool {
        if pos + needle.len() > self.n() {
            return false;
        }
        let last = needle.len() - 1;
        needle.iter().zip(&self.words[pos..]).enumerate().all(|(i, (a, b))| match cut {
            Cut::Leading if i == 0 => b.text.ends_with(a.as_str()),
            Cut::Trailing if i == last => b.text.starts_with(a.as_str()),
            _ => a == b.text,
        })
    }

    /// First `p` in `[from, to - needle.len()]` where `needle` occurs.
    fn find(&self, needle: &[String], from: usize, to: usize) -> Option<usize> {
        self.find_loosely(needle, from, to, Cut::None)
    }

    fn find_loosely(&self, needle: &[String], from: usize, to: usize, cut: Cut) -> Option<usize> {
        let to = to.min(self.n());
        if needle.is_empty() || from + needle.len() > to {
            return None;
        }
        (from..=to - needle.len()).find(|&p| self.matches_loosely(needle, p, cut))
    }

    /// Retries `needle` with leading words dropped; returns the estimated
    /// start of the full needle and the end of the matched part.
    fn find_dropping_leading(&self, needle: &[String], from: usize, to: usize) -> Option<(usize, usize)> {
        (1..needle.len().saturating_sub(2)).find_map(|d| {
            let sub = &needle[d..];
            self.find(sub, from, to).map(|p| (p.saturating_sub(d).max(from), p + sub.len()))
        })
    }

    /// Retries `needle` with trailing words dropped; returns the match start
    /// and the estimated end of the full needle.
    fn find_dropping_trailing(&self, needle: &[String], from: usize, to: usize) -> Option<(usize, usize)> {
        (1..needle.len().saturating_sub(2)).find_map(|d| {
            let sub = &needle[..needle.len() - d];
            self.find(sub, from, to).map(|p| (p, (p + needle.len()).min(self.n())))
        })
    }

    /// Locates an elided paragraph's tail at or after `from`. Among exact
    /// occurrences it prefers one that is followed by the next paragraph's head
    /// and leaves the paragraph longer than the elision threshold.
    fn find_tail(&self, tail: &[String], from: usize, start: usize, next: &Lookahead<'_>, cut: Cut) -> Option<usize> {
        let n = self.n();
        if tail.is_empty() || from + tail.len() > n {
            return None;
        }
        let (mut followed, mut long_enough, mut any) = (None, None, None);
        for p in from..=n - tail.len() {
            if !self.matches_loosely(tail, p, cut) {
                continue;
            }
            let end = p + tail.len();
            let look = match next {
                Lookahead::End => end == n,
                Lookahead::Words(h) => self.matches_at(&h[..h.len().min(self.policy.k())], end),
                Lookahead::Unknown => false,
            };
            let long = end - start > self.policy.min_paragraph_tokens();
            if look && long {
                return Some(p);
            }
            if look && followed.is_none() {
                followed = Some(p);
            }
            if long && long_enough.is_none() {
                long_enough = Some(p);
            }
            any = any.or(Some(p));
        }
        followed.or(long_enough).or(any)
    }

    fn align(&self, p: &RawParagraph, cursor: usize, next: &Lookahead<'_>, expected: usize) -> Outcome {
        let n = self.n();
        let window = |from: usize, len: usize| from.saturating_add(4 * len.max(1)).min(n);

        if !p.elided {
            let m = p.head.len();
            if let Some(s) = self.find(&p.head, cursor, n) {
                return Outcome::Matched { start: s, end: s + m, status: MatchStatus::Exact };
            }
            let to = window(cursor, m);
            if let Some((s, _)) = self.find_dropping_leading(&p.head, cursor, to) {
                return Outcome::Matched { start: s, end: (s + m).min(n), status: MatchStatus::Fuzzy };
            }
            if let Some((s, e)) = self.find_dropping_trailing(&p.head, cursor, to) {
                return Outcome::Matched { start: s, end: e, status: MatchStatus::Fuzzy };
            }
            return Outcome::Failed;
        }

        let (start, head_end, head_exact) = if p.head.is_empty() {
            (cursor, cursor, false)
        } else if let Some(s) = self.find(&p.head, cursor, n) {
            (s, s + p.head.len(), true)
        } else if let Some(s) = self.find_loosely(&p.head, cursor, n, Cut::Trailing) {
            (s, s + p.head.len(), false)
        } else if let Some((s, e)) = self.find_dropping_leading(&p.head, cursor, window(cursor, expected)) {
            (s, e, false)
        } else {
            return Outcome::Failed;
        };

        if let Some(t) = self.find_tail(&p.tail, head_end, start, next, Cut::None) {
            let status = if head_exact { MatchStatus::Exact } else { MatchStatus::Fuzzy };
            return Outcome::Matched { start, end: t + p.tail.len(), status };
        }
        if let Some(t) = self.find_tail(&p.tail, head_end, start, next, Cut::Leading) {
            return Outcome::Matched { start, end: t + p.tail.len(), status: MatchStatus::Fuzzy };
        }
        if let Some((_, e)) = self.find_dropping_trailing(&p.tail, head_end, window(head_end, expected)) {
            return Outcome::Matched { start, end: e, status: MatchStatus::Fuzzy };
        }
        if p.head.is_empty() {
            return Outcome::Failed;
        }
        Outcome::Matched { start, end: head_end, status: MatchStatus::PrefixOnly }
    }
}

/// Restores the tree described by `xml` against `original`.
///
/// Never fails: paragraphs that cannot be located keep their retained words,
/// get a zero-width span and are flagged `degraded`.
pub fn restore(xml: &XmlDoc, original: &str, source_id: &str, policy: &SkipPolicy) -> (DocTree, AlignmentReport) {
    let sk = skeleton(xml);
    let aligner = Aligner { words: word_spans(original), policy: *policy };
    let n = aligner.n();

    let mut outcomes = Vec::with_capacity(sk.paragraphs.len());
    let mut cursor = 0;
    let (mut matched_len, mut matched_count) = (0usize, 0usize);
    for (i, p) in sk.paragraphs.iter().enumerate() {
        let next = match sk.paragraphs.get(i + 1) {
            None => Lookahead::End,
            Some(q) if q.head.is_empty() => Lookahead::Unknown,
            Some(q) => Lookahead::Words(&q.head),
        };
        let floor = policy.min_paragraph_tokens() + 1;
        let expected = matched_len.checked_div(matched_count).map_or(floor, |m| m.max(floor));
        let outcome = aligner.align(p, cursor, &next, expected);
        if let Outcome::Matched { start, end, .. } = outcome {
            cursor = end;
            matched_len += end - start;
            matched_count += 1;
        }
        outcomes.push(outcome);
    }

    // absorb unclaimed words into neighbouring matches
    let mut absorbed = 0;
    let matched: Vec<usize> = (0..outcomes.len()).filter(|&i| matches!(outcomes[i], Outcome::Matched { .. })).collect();
    for (j, &i) in matched.iter().enumerate() {
        let next_start = matched.get(j + 1).map(|&ni| match outcomes[ni] {
            Outcome::Matched { start, .. } => start,
            Outcome::Failed => unreachable!(),
        });
        if let Outcome::Matched { start, end, .. } = &mut outcomes[i] {
            if j == 0 {
                absorbed += *start;
                *start = 0;
            }
            let target = next_start.unwrap_or(n);
            if target > *end {
                absorbed += target - *end;
                *end = target;
            }
        }
    }
    let unclaimed = if matched.is_empty() { n } else { 0 };

    let byte_span = |s: usize, e: usize| Span::new(aligner.words[s].start, aligner.words[e - 1].end);
    let mut placed: Vec<Option<PlacedParagraph>> = Vec::with_capacity(outcomes.len());
    let mut statuses = Vec::with_capacity(outcomes.len());
    let mut last_byte = 0;
    for (p, outcome) in sk.paragraphs.iter().zip(&outcomes) {
        match *outcome {
            Outcome::Matched { start, end, status } => {
                let span = byte_span(start, end);
                last_byte = span.end;
                placed.push(Some(PlacedParagraph { content: original[span.start..span.end].to_string(), span, degraded: false }));
                statuses.push(status);
            }
            Outcome::Failed => {
                placed.push(Some(PlacedParagraph { content: p.retained_text(), span: Span::empty_at(last_byte), degraded: true }));
                statuses.push(MatchStatus::Failed);
            }
        }
    }

    let mut take = |i: usize| placed[i].take().expect("each paragraph is placed once");
    let blocks = sk
        .blocks
        .into_iter()
        .map(|b| match b {
            Block::Abstract(ps) => Block::Abstract(ps.into_iter().map(&mut take).collect()),
            Block::Section { title, items } => Block::Section {
                title,
                items: items
                    .into_iter()
                    .map(|it| match it {
                        SectionItem::Paragraph(i) => SectionItem::Paragraph(take(i)),
                        SectionItem::Subsection { title, paragraphs } => {
                            SectionItem::Subsection { title, paragraphs: paragraphs.into_iter().map(&mut take).collect() }
                        }
                    })
                    .collect(),
            },
        })
        .collect();
    let tree = DocTree::from_placed_blocks(source_id, original, blocks);

    let mut report = AlignmentReport { absorbed_tokens: absorbed, unclaimed_tokens: unclaimed, ..Default::default() };
    for (node, status) in tree.leaves().into_iter().zip(statuses) {
        match status {
            MatchStatus::Exact => report.exact += 1,
            MatchStatus::Fuzzy => report.fuzzy += 1,
            MatchStatus::PrefixOnly => report.prefix_only += 1,
            MatchStatus::Failed => report.failed += 1,
        }
        let span = tree.node(node).char_span.unwrap_or(Span::empty_at(0));
        report.paragraphs.push(ParagraphAlignment { node, status, span });
    }
    (tree, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doctree::{NodeKind, ViolationRule};
    use crate::xml_codec::{parse, serialize};

    fn words(prefix: &str, n: usize) -> String {
        (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(" ")
    }

    fn sample() -> DocTree {
        DocTree::from_text_blocks(
            "doc",
            vec![
                Block::Abstract(vec![words("a", 20)]),
                Block::Section {
                    title: "One".into(),
                    items: vec![
                        SectionItem::Paragraph(words("b", 30)),
                        SectionItem::Subsection { title: "Sub".into(), paragraphs: vec![words("c", 8), words("d", 40)] },
                    ],
                },
                Block::section("Two", vec![words("e", 25)]),
            ],
        )
    }

    fn restore_text(xml: &str, original: &str) -> (DocTree, AlignmentReport) {
        let parsed = parse(xml).unwrap();
        restore(&parsed.doc, original, "doc", &SkipPolicy::default())
    }

    #[test]
    fn self_produced_output_restores_exactly() {
        let tree = sample();
        let xml = serialize(&tree, &SkipPolicy::default(), true).unwrap();
        let (back, report) = restore_text(&xml.text, &tree.source_text);
        assert_eq!(report.exact, 5, "{report:?}");
        assert_eq!(report.absorbed_tokens, 0);
        assert!(back.same_structure_and_text(&tree));
        assert_eq!(back, tree);
        assert!(back.validate().is_empty());
    }

    #[test]
    fn missing_suffix_gives_prefix_only_up_to_next_match() {
        let p1 = words("x", 20);
        let p2 = words("y", 20);
        let original = format!("{p1}\n\n{p2}");
        // the first tail word is corrupted, so neither the exact nor the
        // trailing-drop search can find it
        let xml = "<abstract>\nx0 x1 x2 x3 x4 <skip> WRONG x16 x17 x18 x19\n<br>\ny0 y1 y2 y3 y4 <skip> y15 y16 y17 y18 y19\n</abstract>";
        let (tree, report) = restore_text(xml, &original);
        assert_eq!(report.paragraphs[0].status, MatchStatus::PrefixOnly);
        assert_eq!(report.paragraphs[1].status, MatchStatus::Exact);
        // prefix start through the next paragraph's match start
        let leaves = tree.leaves();
        assert_eq!(tree.node(leaves[0]).content.as_deref(), Some(p1.as_str()));
        assert_eq!(tree.node(leaves[0]).char_span, Some(Span::new(0, p1.len())));
        assert_eq!(report.absorbed_tokens, 15);
        assert!(tree.validate().is_empty(), "{:?}", tree.validate());
    }

    #[test]
    fn hallucinated_paragraph_fails_alone() {
        let tree = sample();
        let xml = serialize(&tree, &SkipPolicy::default(), true).unwrap().text;
        let injected =
            xml.replacen("</section: Two>", "<br>\nnever said in the source at all <skip> and this is made up too\n</section: Two>", 1);
        let (back, report) = restore_text(&injected, &tree.source_text);
        assert_eq!(report.failed, 1, "{report:?}");
        assert_eq!(report.exact, 5);
        let failed = report.paragraphs.iter().find(|p| p.status == MatchStatus::Failed).unwrap();
        let node = back.node(failed.node);
        assert!(node.degraded);
        assert_eq!(node.content.as_deref(), Some("never said in the source at all and this is made up too"));
        assert!(failed.span.is_empty());
        assert!(back.validate().is_empty(), "{:?}", back.validate());
    }

    #[test]
    fn copy_error_in_head_is_matched_fuzzily() {
        let original = words("w", 30);
        let xml = "<abstract>\nTYPO w1 w2 w3 w4 <skip> w25 w26 w27 w28 w29\n</abstract>";
        let (tree, report) = restore_text(xml, &original);
        assert_eq!(report.fuzzy, 1, "{report:?}");
        assert_eq!(tree.node(tree.leaves()[0]).content.as_deref(), Some(original.as_str()));
    }

    #[test]
    fn word_fragments_at_the_skip_are_tolerated() {
        let original = format!("{} Kikiwaka and put them in charge.", words("w", 20));
        let xml = "<abstract>\nw0 w1 w2 w3 w <skip> waka and put them in charge.\n</abstract>";
        let (tree, report) = restore_text(xml, &original);
        assert_eq!(report.fuzzy, 1, "{report:?}");
        assert_eq!(tree.node(tree.leaves()[0]).content.as_deref(), Some(original.as_str()));
    }

    #[test]
    fn omitted_paragraph_is_absorbed_by_its_predecessor() {
        let (a, b, c) = (words("a", 6), words("b", 6), words("c", 6));
        let original = format!("{a}\n\n{b}\n\n{c}");
        let xml = format!("<section: S>\n{a}\n<br>\n{c}\n</section: S>");
        let (tree, report) = restore_text(&xml, &original);
        assert_eq!(report.exact, 2);
        assert_eq!(report.absorbed_tokens, 6);
        let leaves = tree.leaves();
        assert_eq!(tree.node(leaves[0]).content.as_deref(), Some(format!("{a}\n\n{b}").as_str()));
        assert!(tree.validate().is_empty());
    }

    #[test]
    fn nothing_aligned_leaves_tokens_unclaimed() {
        let (tree, report) = restore_text("<section: S>\nzzz qqq\n</section: S>", "alpha beta gamma");
        assert_eq!(report.failed, 1);
        assert_eq!(report.unclaimed_tokens, 3);
        assert!(tree.validate().iter().any(|v| v.rule == ViolationRule::LossyContent));
    }

    #[test]
    fn spans_are_monotone() {
        let tree = sample();
        let xml = serialize(&tree, &SkipPolicy::default(), true).unwrap();
        let (_, report) = restore_text(&xml.text, &tree.source_text);
        for w in report.paragraphs.windows(2) {
            assert!(w[0].span.end <= w[1].span.start);
        }
    }

    #[test]
    fn text_outside_blocks_lands_in_implicit_abstract() {
        let (tree, _) = restore(
            &XmlDoc { items: vec![XmlItem::Text("alpha beta".into())], source_hint: None },
            "alpha beta",
            "d",
            &SkipPolicy::default(),
        );
        assert_eq!(tree.node(tree.children(tree.root)[0]).kind, NodeKind::Abstract);
    }
}
