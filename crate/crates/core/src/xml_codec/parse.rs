//! Error-tolerant parser for structurer output.
//!
//! Malformed input is never fatal. Each deviation from the grammar is fixed
//! by one of the rules below and logged as a [`Repair`]:
//!
//! * a `<...>` that is not one of the known tags is kept as escaped text;
//! * a `<` with no matching `>` is kept as text;
//! * a close tag without a matching open tag is dropped;
//! * an open tag left unclosed is closed at the next open tag of the same or a
//!   higher level, when its parent closes, or at end of input;
//! * close tags match by kind; a differing title only logs a repair;
//! * text or `<br>` outside any block opens an implicit untitled block: the
//!   abstract if no abstract or section has been seen yet, otherwise a section;
//! * a second `<abstract>`, or one after the first section, is ignored;
//! * a subsection outside a section opens an implicit untitled section.
//!
//! The resulting [`XmlDoc`] is always well nested.

use serde::{Deserialize, Serialize};

use super::{escape, unescape, CodecError, TagKind, XmlDoc, XmlItem, XmlTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairRule {
    UnknownTag,
    StrayLessThan,
    OrphanClose,
    AutoClose,
    UnclosedAtEnd,
    TitleMismatch,
    MissingTitle,
    ImplicitAbstract,
    ImplicitSection,
    LateAbstract,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repair {
    /// Byte offset in the input where the rule fired.
    pub position: usize,
    pub rule: RepairRule,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutput {
    pub doc: XmlDoc,
    pub repairs: Vec<Repair>,
}

#[derive(Debug, Clone, PartialEq)]
enum Lexeme<'a> {
    Tag { kind: TagKind, title: Option<String>, raw: &'a str },
    Unknown(&'a str),
    StrayLt,
    Text(&'a str),
}

fn classify(body: &str) -> Option<(TagKind, Option<String>)> {
    let b = body.trim();
    let lower = b.to_ascii_lowercase();
    let bare = match lower.as_str() {
        "abstract" => Some(TagKind::AbstractOpen),
        "/abstract" => Some(TagKind::AbstractClose),
        "skip" => Some(TagKind::Skip),
        "br" | "br/" | "br /" => Some(TagKind::Br),
        "section" => return Some((TagKind::SectionOpen, None)),
        "/section" => return Some((TagKind::SectionClose, None)),
        "subsection" | "sub-section" => return Some((TagKind::SubsectionOpen, None)),
        "/subsection" | "/sub-section" => return Some((TagKind::SubsectionClose, None)),
        _ => None,
    };
    if let Some(k) = bare {
        return Some((k, None));
    }
    let (name, title) = b.split_once(':')?;
    let kind = match name.trim().to_ascii_lowercase().as_str() {
        "section" => TagKind::SectionOpen,
        "/section" => TagKind::SectionClose,
        "subsection" | "sub-section" => TagKind::SubsectionOpen,
        "/subsection" | "/sub-section" => TagKind::SubsectionClose,
        _ => return None,
    };
    Some((kind, Some(unescape(title.trim()))))
}

fn lex(input: &str) -> Vec<(usize, Lexeme<'_>)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < input.len() {
        let rest = &input[i..];
        let Some(lt) = rest.find('<') else {
            out.push((i, Lexeme::Text(rest)));
            break;
        };
        if lt > 0 {
            out.push((i, Lexeme::Text(&rest[..lt])));
        }
        let at = i + lt;
        let after = &input[at + 1..];
        let gt = after.find('>');
        let next_lt = after.find('<');
        match gt {
            Some(g) if next_lt.is_none_or(|n| n > g) && !after[..g].contains('\n') => {
                let raw = &input[at..at + g + 2];
                match classify(&after[..g]) {
                    Some((kind, title)) => out.push((at, Lexeme::Tag { kind, title, raw })),
                    None => out.push((at, Lexeme::Unknown(raw))),
                }
                i = at + g + 2;
            }
            _ => {
                out.push((at, Lexeme::StrayLt));
                i = at + 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Frame {
    Abstract,
    Section,
    Subsection,
}

impl Frame {
    fn close_kind(self) -> TagKind {
        match self {
            Frame::Abstract => TagKind::AbstractClose,
            Frame::Section => TagKind::SectionClose,
            Frame::Subsection => TagKind::SubsectionClose,
        }
    }
}

struct Open {
    frame: Frame,
    title: Option<String>,
    implicit: bool,
    /// Index of the open tag in the output items.
    item: usize,
}

struct Builder {
    items: Vec<XmlItem>,
    repairs: Vec<Repair>,
    stack: Vec<Open>,
    abstract_seen: bool,
    section_seen: bool,
    suppressed_abstract_closes: usize,
}

impl Builder {
    fn repair(&mut self, position: usize, rule: RepairRule, detail: impl Into<String>) {
        self.repairs.push(Repair { position, rule, detail: detail.into() });
    }

    fn push_text(&mut self, text: &str) {
        if let Some(XmlItem::Text(prev)) = self.items.last_mut() {
            prev.push_str(text);
        } else {
            self.items.push(XmlItem::Text(text.to_string()));
        }
    }

    fn open(&mut self, frame: Frame, title: Option<String>, implicit: bool) {
        let tag = match frame {
            Frame::Abstract => {
                self.abstract_seen = true;
                XmlTag::bare(TagKind::AbstractOpen)
            }
            Frame::Section => {
                self.section_seen = true;
                XmlTag::titled(TagKind::SectionOpen, title.clone().unwrap_or_default())
            }
            Frame::Subsection => XmlTag::titled(TagKind::SubsectionOpen, title.clone().unwrap_or_default()),
        };
        self.stack.push(Open { frame, title, implicit, item: self.items.len() });
        self.items.push(XmlItem::Tag(tag));
    }

    /// Pops the top frame and emits its close tag. Explicit frames closed
    /// without their own close tag are logged under `rule`.
    fn pop(&mut self, position: usize, rule: Option<RepairRule>) {
        let Some(top) = self.stack.pop() else { return };
        if let (Some(rule), false) = (rule, top.implicit) {
            let detail = match &top.title {
                Some(t) => format!("{:?} `{t}`", top.frame).to_lowercase(),
                None => format!("{:?}", top.frame).to_lowercase(),
            };
            self.repair(position, rule, detail);
        }
        let tag = match top.frame {
            Frame::Abstract => XmlTag::bare(TagKind::AbstractClose),
            _ => XmlTag::titled(top.frame.close_kind(), top.title.unwrap_or_default()),
        };
        self.items.push(XmlItem::Tag(tag));
    }

    /// Makes sure some block is open before content at `position`.
    fn ensure_block(&mut self, position: usize) {
        if !self.stack.is_empty() {
            return;
        }
        if !self.abstract_seen && !self.section_seen {
            self.repair(position, RepairRule::ImplicitAbstract, "content outside any block");
            self.open(Frame::Abstract, None, true);
        } else {
            self.repair(position, RepairRule::ImplicitSection, "content outside any block");
            self.open(Frame::Section, Some(String::new()), true);
        }
    }

    fn open_section(&mut self, position: usize, title: Option<String>) {
        while !self.stack.is_empty() {
            self.pop(position, Some(RepairRule::AutoClose));
        }
        let title = self.require_title(position, title, "section");
        self.open(Frame::Section, Some(title), false);
    }

    fn open_subsection(&mut self, position: usize, title: Option<String>) {
        if matches!(self.stack.last().map(|o| o.frame), Some(Frame::Subsection)) {
            self.pop(position, Some(RepairRule::AutoClose));
        }
        if matches!(self.stack.last().map(|o| o.frame), Some(Frame::Abstract)) {
            self.pop(position, Some(RepairRule::AutoClose));
        }
        if self.stack.is_empty() {
            self.repair(position, RepairRule::ImplicitSection, "subsection outside a section");
            self.open(Frame::Section, Some(String::new()), true);
        }
        let title = self.require_title(position, title, "subsection");
        self.open(Frame::Subsection, Some(title), false);
    }

    fn open_abstract(&mut self, position: usize) {
        if self.abstract_seen || self.section_seen {
            self.repair(position, RepairRule::LateAbstract, "abstract after the first block is ignored");
            self.suppressed_abstract_closes += 1;
            return;
        }
        while !self.stack.is_empty() {
            self.pop(position, Some(RepairRule::AutoClose));
        }
        self.open(Frame::Abstract, None, false);
    }

    fn require_title(&mut self, position: usize, title: Option<String>, what: &str) -> String {
        title.unwrap_or_else(|| {
            self.repair(position, RepairRule::MissingTitle, format!("{what} opened without a title"));
            String::new()
        })
    }

    fn close(&mut self, position: usize, frame: Frame, title: Option<String>, raw: &str) {
        if frame == Frame::Abstract && self.suppressed_abstract_closes > 0 {
            self.suppressed_abstract_closes -= 1;
            return;
        }
        let Some(idx) = self.stack.iter().rposition(|o| o.frame == frame) else {
            self.repair(position, RepairRule::OrphanClose, raw);
            return;
        };
        while self.stack.len() > idx + 1 {
            self.pop(position, Some(RepairRule::AutoClose));
        }
        let open = &mut self.stack[idx];
        if let Some(t) = title {
            if open.implicit && frame != Frame::Abstract {
                // an implicit block closed by a titled tag takes that title
                open.title = Some(t.clone());
                if let XmlItem::Tag(tag) = &mut self.items[open.item] {
                    tag.title = Some(t);
                }
            } else if !open.implicit && normalize_title(open.title.as_deref().unwrap_or("")) != normalize_title(&t) {
                let detail = format!("`{}` closed as `{t}`", open.title.as_deref().unwrap_or(""));
                self.repair(position, RepairRule::TitleMismatch, detail);
            }
        }
        self.pop(position, None);
    }
}

fn normalize_title(t: &str) -> String {
    t.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Parses structurer output into a well-nested [`XmlDoc`] plus the repairs
/// applied on the way. Only empty input is an error.
pub fn parse(input: &str) -> Result<ParseOutput, CodecError> {
    if input.trim().is_empty() {
        return Err(CodecError::EmptyInput);
    }
    let mut b = Builder {
        items: Vec::new(),
        repairs: Vec::new(),
        stack: Vec::new(),
        abstract_seen: false,
        section_seen: false,
        suppressed_abstract_closes: 0,
    };
    for (pos, lexeme) in lex(input) {
        match lexeme {
            Lexeme::Text(t) => {
                if t.trim().is_empty() {
                    if !b.stack.is_empty() {
                        b.push_text(t);
                    }
                    continue;
                }
                b.ensure_block(pos);
                b.push_text(t);
            }
            Lexeme::Unknown(raw) => {
                b.repair(pos, RepairRule::UnknownTag, raw);
                b.ensure_block(pos);
                b.push_text(&escape(raw));
            }
            Lexeme::StrayLt => {
                b.repair(pos, RepairRule::StrayLessThan, "`<` without a tag");
                b.ensure_block(pos);
                b.push_text("&lt;");
            }
            Lexeme::Tag { kind, title, raw } => match kind {
                TagKind::SectionOpen => b.open_section(pos, title),
                TagKind::SubsectionOpen => b.open_subsection(pos, title),
                TagKind::AbstractOpen => b.open_abstract(pos),
                TagKind::SectionClose => b.close(pos, Frame::Section, title, raw),
                TagKind::SubsectionClose => b.close(pos, Frame::Subsection, title, raw),
                TagKind::AbstractClose => b.close(pos, Frame::Abstract, title, raw),
                TagKind::Br | TagKind::Skip => {
                    b.ensure_block(pos);
                    b.items.push(XmlItem::Tag(XmlTag::bare(kind)));
                }
            },
        }
    }
    while !b.stack.is_empty() {
        b.pop(input.len(), Some(RepairRule::UnclosedAtEnd));
    }
    let items = b.items.into_iter().filter(|i| !matches!(i, XmlItem::Text(t) if t.trim().is_empty())).collect();
    Ok(ParseOutput { doc: XmlDoc { items, source_hint: None }, repairs: b.repairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules(input: &str) -> Vec<RepairRule> {
        parse(input).unwrap().repairs.into_iter().map(|r| r.rule).collect()
    }

    fn tags(input: &str) -> Vec<String> {
        parse(input).unwrap().doc.tags().map(|t| t.to_string()).collect()
    }

    #[test]
    fn well_formed_input_needs_no_repair() {
        let input = "<abstract>\nA b <skip> c d\n</abstract>\n<section: Plot>\nx <br> y\n</section: Plot>";
        let out = parse(input).unwrap();
        assert!(out.repairs.is_empty(), "{:?}", out.repairs);
        assert_eq!(tags(input), vec!["<abstract>", "<skip>", "</abstract>", "<section: Plot>", "<br>", "</section: Plot>"]);
    }

    #[test]
    fn missing_close_is_inserted_at_end() {
        let out = parse("<section: A> text").unwrap();
        assert_eq!(out.repairs.len(), 1);
        assert_eq!(out.repairs[0].rule, RepairRule::UnclosedAtEnd);
        assert_eq!(out.repairs[0].position, "<section: A> text".len());
        assert_eq!(tags("<section: A> text"), vec!["<section: A>", "</section: A>"]);
    }

    #[test]
    fn orphan_close_is_dropped() {
        let input = "<section: A>x</section: A></section: B>";
        let out = parse(input).unwrap();
        assert_eq!(out.repairs.len(), 1);
        assert_eq!(out.repairs[0].rule, RepairRule::OrphanClose);
        assert_eq!(out.repairs[0].position, input.find("</section: B>").unwrap());
        assert_eq!(tags(input), vec!["<section: A>", "</section: A>"]);
    }

    #[test]
    fn mismatched_close_title_closes_innermost_of_kind() {
        let input = "<section: A><subsection: B>x</subsection: C></section: A>";
        assert_eq!(rules(input), vec![RepairRule::TitleMismatch]);
        assert_eq!(tags(input), vec!["<section: A>", "<subsection: B>", "</subsection: B>", "</section: A>"]);
    }

    #[test]
    fn unknown_tag_becomes_text() {
        let out = parse("<section: A>a <b>bold</b> c</section: A>").unwrap();
        assert_eq!(out.repairs.iter().map(|r| r.rule).collect::<Vec<_>>(), vec![RepairRule::UnknownTag; 2]);
        assert_eq!(out.doc.items[1], XmlItem::Text("a &lt;b&gt;bold&lt;/b&gt; c".into()));
    }

    #[test]
    fn stray_less_than_is_text() {
        let out = parse("<section: A>1 < 2 and <section: B>").unwrap();
        assert_eq!(out.repairs[0].rule, RepairRule::StrayLessThan);
        assert_eq!(out.doc.items[1], XmlItem::Text("1 &lt; 2 and ".into()));
    }

    #[test]
    fn open_section_auto_closes_previous() {
        let input = "<section: A>x<subsection: S>y<section: B>z</section: B>";
        assert_eq!(rules(input), vec![RepairRule::AutoClose, RepairRule::AutoClose]);
        assert_eq!(
            tags(input),
            vec!["<section: A>", "<subsection: S>", "</subsection: S>", "</section: A>", "<section: B>", "</section: B>"]
        );
    }

    #[test]
    fn leading_br_opens_implicit_abstract() {
        let input = "intro<br>more<section: A>x</section: A>";
        assert_eq!(rules(input), vec![RepairRule::ImplicitAbstract]);
        assert_eq!(tags(input), vec!["<abstract>", "<br>", "</abstract>", "<section: A>", "</section: A>"]);
    }

    #[test]
    fn trailing_text_opens_implicit_section_that_adopts_close_title() {
        let input = "<section: A>x</section: A> y </section: B>";
        assert_eq!(rules(input), vec![RepairRule::ImplicitSection]);
        assert_eq!(tags(input), vec!["<section: A>", "</section: A>", "<section: B>", "</section: B>"]);
    }

    #[test]
    fn late_abstract_is_ignored() {
        let input = "<section: A>x</section: A><abstract>y</abstract>";
        assert_eq!(rules(input), vec![RepairRule::LateAbstract, RepairRule::ImplicitSection]);
    }

    #[test]
    fn subsection_outside_section_gets_implicit_parent() {
        let input = "<subsection: S>x</subsection: S>";
        assert_eq!(rules(input), vec![RepairRule::ImplicitSection]);
        assert_eq!(tags(input), vec!["<section: >", "<subsection: S>", "</subsection: S>", "</section: >"]);
    }

    #[test]
    fn hyphenated_subsection_and_lenient_spacing_are_accepted() {
        let input = "<section:Cast><sub-section: Main cast>x</sub-section: Main cast></section:  Cast >";
        assert!(rules(input).is_empty());
        assert_eq!(tags(input), vec!["<section: Cast>", "<subsection: Main cast>", "</subsection: Main cast>", "</section: Cast>"]);
    }

    #[test]
    fn empty_input_is_the_only_error() {
        assert!(matches!(parse("  \n "), Err(CodecError::EmptyInput)));
        assert!(parse("<").is_ok());
        assert!(parse(">>>").is_ok());
    }

    #[test]
    fn repairs_are_deterministic() {
        let input = "</abstract><section: A><x>1 < 2<br></section: B><abstract>q";
        assert_eq!(parse(input).unwrap(), parse(input).unwrap());
    }
}
