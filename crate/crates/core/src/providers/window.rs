use super::stub::split_paragraphs;
use super::{ProviderError, Structurer};
use crate::tokens::word_count;
use crate::xml_codec::{parse, CodecError, Repair, TagKind, XmlDoc, XmlItem, XmlTag};

#[derive(Debug, Clone)]
pub struct StructuredText {
    pub xml: String,
    pub windows: usize,
    /// Repairs applied while stitching window outputs together.
    pub stitch_repairs: Vec<Repair>,
}

/// Groups paragraphs (split at blank lines) into consecutive windows of at
/// most `window` words. A paragraph longer than the window gets a window of
/// its own.
pub fn split_windows(text: &str, window: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur: Vec<String> = Vec::new();
    let mut cur_words = 0;
    for p in split_paragraphs(text) {
        let n = word_count(&p);
        if !cur.is_empty() && cur_words + n > window {
            out.push(cur.join("\n\n"));
            cur.clear();
            cur_words = 0;
        }
        cur_words += n;
        cur.push(p);
    }
    if !cur.is_empty() {
        out.push(cur.join("\n\n"));
    }
    out
}

/// Structures `text`, pre-splitting it into windows when it does not fit the
/// structurer's context. Window outputs are concatenated at the section level;
/// an abstract in any window but the first becomes an untitled section.
pub fn structure_document(structurer: &dyn Structurer, text: &str) -> Result<StructuredText, ProviderError> {
    let window = structurer.context_window();
    if word_count(text) <= window {
        return Ok(StructuredText { xml: structurer.structure(text)?, windows: 1, stitch_repairs: Vec::new() });
    }
    let parts = split_windows(text, window);
    let mut items = Vec::new();
    let mut repairs = Vec::new();
    for (i, part) in parts.iter().enumerate() {
        let xml = structurer.structure(part)?;
        let parsed = match parse(&xml) {
            Ok(p) => p,
            Err(CodecError::EmptyInput) => continue,
            Err(e) => return Err(ProviderError::BadResponse(e.to_string())),
        };
        repairs.extend(parsed.repairs);
        for item in parsed.doc.items {
            let item = match item {
                XmlItem::Tag(t) if i > 0 && t.kind == TagKind::AbstractOpen => XmlItem::Tag(XmlTag::titled(TagKind::SectionOpen, "")),
                XmlItem::Tag(t) if i > 0 && t.kind == TagKind::AbstractClose => XmlItem::Tag(XmlTag::titled(TagKind::SectionClose, "")),
                other => other,
            };
            items.push(item);
        }
    }
    let doc = XmlDoc { items, source_hint: None };
    Ok(StructuredText { xml: doc.to_string(), windows: parts.len(), stitch_repairs: repairs })
}
