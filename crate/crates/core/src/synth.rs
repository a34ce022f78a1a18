//! Seeded generators for synthetic trees, wiki pages and query fixtures.
//!
//! Words come from a syllable vocabulary mixed with English function words,
//! so texts look vaguely encyclopedic while planted facts stay unambiguous.

use std::collections::HashSet;
use std::ops::RangeInclusive;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::doctree::{Block, DocTree, SectionItem};
use crate::label_pipeline::{RawWikiPage, WikiBlock};
use crate::records::{DocumentRecord, QueryRecord};
use crate::tokens::word_count;

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "st", "kr", "th", "sh"];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou", "ei"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "l", "k", "m"];
const FUNCTION_WORDS: &[&str] = &["the", "of", "and", "in", "was", "to", "a", "is", "for", "on", "with", "as", "by", "its", "from", "at"];
/// Tokens that look like markup or entities once placed in running text.
const ADVERSARIAL: &[&str] =
    &["<skip>", "&", "&amp;", "<br>", "<section: X>", "</abstract>", "a<b", "x>y", "&lt;", "<subsection:", "</section:", ">", "<"];
const TITLE_ADVERSARIAL: &[&str] = &["R&D", "A<B", "x > y", "&amp;"];
const SECTION_TOPICS: &[&str] = &[
    "History",
    "Geography",
    "Economy",
    "Culture",
    "Transport",
    "Education",
    "Climate",
    "Demographics",
    "Sports",
    "Architecture",
    "Media",
    "Religion",
];

#[derive(Debug, Clone)]
pub struct TreeSpec {
    pub sections: RangeInclusive<usize>,
    /// Items per section; each is a paragraph or a subsection.
    pub items: RangeInclusive<usize>,
    pub paragraph_words: RangeInclusive<usize>,
    pub abstract_rate: f64,
    pub subsection_rate: f64,
    /// Per-word chance of a markup-like token.
    pub adversarial_rate: f64,
}

impl Default for TreeSpec {
    fn default() -> Self {
        Self { sections: 0..=6, items: 0..=5, paragraph_words: 5..=400, abstract_rate: 0.6, subsection_rate: 0.3, adversarial_rate: 0.02 }
    }
}

pub struct Synth {
    rng: ChaCha8Rng,
}

impl Synth {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn pick(&mut self, xs: &[&'static str]) -> &'static str {
        xs.choose(&mut self.rng).copied().unwrap_or("")
    }

    pub fn word(&mut self) -> String {
        let syllables = self.rng.random_range(1..=3);
        (0..syllables).map(|_| format!("{}{}{}", self.pick(ONSETS), self.pick(NUCLEI), self.pick(CODAS))).collect()
    }

    pub fn name(&mut self) -> String {
        capitalize(&self.word())
    }

    /// One to three capitalized words.
    pub fn title(&mut self) -> String {
        let n = self.rng.random_range(1..=3);
        (0..n).map(|_| self.name()).collect::<Vec<_>>().join(" ")
    }

    /// Exactly `n` words in sentences of 6 to 16 words.
    pub fn paragraph(&mut self, n: usize) -> String {
        self.paragraph_with(n, 0.0)
    }

    fn paragraph_with(&mut self, n: usize, adversarial: f64) -> String {
        let mut out: Vec<String> = Vec::with_capacity(n);
        let mut left_in_sentence = 0;
        for i in 0..n {
            let start = left_in_sentence == 0;
            if start {
                left_in_sentence = self.rng.random_range(6..=16);
            }
            let mut w = if adversarial > 0.0 && self.rng.random_bool(adversarial) {
                self.pick(ADVERSARIAL).to_string()
            } else if self.rng.random_bool(0.35) {
                self.pick(FUNCTION_WORDS).to_string()
            } else {
                self.word()
            };
            if start {
                w = capitalize(&w);
            }
            left_in_sentence -= 1;
            if left_in_sentence == 0 || i + 1 == n {
                w.push('.');
            }
            out.push(w);
        }
        out.join(" ")
    }

    fn sibling_title(&mut self, taken: &mut HashSet<String>, adversarial: f64) -> String {
        loop {
            let mut t = self.title();
            if adversarial > 0.0 && self.rng.random_bool((adversarial * 5.0).min(1.0)) {
                t = format!("{t} {}", self.pick(TITLE_ADVERSARIAL));
            }
            if taken.insert(t.to_lowercase()) {
                return t;
            }
        }
    }

    fn para_for(&mut self, spec: &TreeSpec) -> String {
        let n = self.rng.random_range(spec.paragraph_words.clone());
        self.paragraph_with(n, spec.adversarial_rate)
    }

    /// A valid tree with mixed depths; sibling titles are distinct.
    pub fn random_tree(&mut self, source_id: &str, spec: &TreeSpec) -> DocTree {
        let mut blocks = Vec::new();
        if self.rng.random_bool(spec.abstract_rate) {
            let n = self.rng.random_range(1..=3);
            blocks.push(Block::Abstract((0..n).map(|_| self.para_for(spec)).collect()));
        }
        let mut section_titles = HashSet::new();
        for _ in 0..self.rng.random_range(spec.sections.clone()) {
            let title = self.sibling_title(&mut section_titles, spec.adversarial_rate);
            let mut sub_titles = HashSet::new();
            let mut items = Vec::new();
            for _ in 0..self.rng.random_range(spec.items.clone()) {
                if self.rng.random_bool(spec.subsection_rate) {
                    let t = self.sibling_title(&mut sub_titles, spec.adversarial_rate);
                    let n = self.rng.random_range(0..=3);
                    items.push(SectionItem::Subsection { title: t, paragraphs: (0..n).map(|_| self.para_for(spec)).collect() });
                } else {
                    items.push(SectionItem::Paragraph(self.para_for(spec)));
                }
            }
            blocks.push(Block::Section { title, items });
        }
        DocTree::from_text_blocks(source_id, blocks)
    }

    /// A raw page with a lead, sections, some subsections, citation and file
    /// markup to clean, and a trailing stop-listed block.
    pub fn wiki_page(&mut self, page_id: &str, paragraph_words: RangeInclusive<usize>) -> RawWikiPage {
        let para = |s: &mut Self| {
            let n = s.rng.random_range(paragraph_words.clone());
            let mut p = s.paragraph(n);
            if s.rng.random_bool(0.5) {
                p.push_str(&format!("[{}]", s.rng.random_range(1..60)));
            }
            if s.rng.random_bool(0.2) {
                let target = s.name();
                let shown = s.word();
                p = format!("[[{target}|{shown}]] {p}");
            }
            p
        };
        let mut blocks = vec![WikiBlock { heading_level: 0, heading_text: String::new(), paragraphs: vec![para(self), para(self)] }];
        let mut topics: Vec<&str> = SECTION_TOPICS.to_vec();
        let n_sections = self.rng.random_range(3..=7);
        for _ in 0..n_sections {
            let i = self.rng.random_range(0..topics.len());
            let topic = topics.swap_remove(i);
            let n = self.rng.random_range(1..=4);
            let mut paragraphs: Vec<String> = (0..n).map(|_| para(self)).collect();
            if self.rng.random_bool(0.2) {
                paragraphs.insert(0, format!("[[File:{}.jpg|thumb|{}]]", self.word(), self.word()));
            }
            blocks.push(WikiBlock { heading_level: 1, heading_text: topic.to_string(), paragraphs });
            if self.rng.random_bool(0.3) {
                let n = self.rng.random_range(1..=2);
                blocks.push(WikiBlock { heading_level: 2, heading_text: self.title(), paragraphs: (0..n).map(|_| para(self)).collect() });
            }
        }
        blocks.push(WikiBlock {
            heading_level: 1,
            heading_text: "References".into(),
            paragraphs: vec![format!("{} {}. Retrieved 2019.", self.name(), self.name())],
        });
        RawWikiPage { page_id: page_id.to_string(), title: self.title(), blocks }
    }

    /// Appends filler paragraphs (80 to 160 words) until `text` has exactly
    /// `target` words. Text already at or above the target is returned as is.
    pub fn pad(&mut self, text: &str, target: usize) -> String {
        let mut out = text.to_string();
        let mut have = word_count(text);
        while have < target {
            let n = self.rng.random_range(80..=160).min(target - have);
            if !out.is_empty() {
                out.push_str("\n\n");
            }
            out.push_str(&self.paragraph(n));
            have += n;
        }
        out
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Ways a model's markup goes wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    DropClose,
    OrphanClose,
    UnknownTag,
    TagLikeText,
    WrongCloseTitle,
    Truncate,
    LateAbstract,
    SubsectionOutsideSection,
    TextOutsideBlocks,
    MissingTitle,
}

impl Mutation {
    pub const ALL: [Mutation; 10] = [
        Mutation::DropClose,
        Mutation::OrphanClose,
        Mutation::UnknownTag,
        Mutation::TagLikeText,
        Mutation::WrongCloseTitle,
        Mutation::Truncate,
        Mutation::LateAbstract,
        Mutation::SubsectionOutsideSection,
        Mutation::TextOutsideBlocks,
        Mutation::MissingTitle,
    ];
}

impl Synth {
    /// Line-oriented markup for a small random tree with one to three
    /// mutations applied. Returns the markup and the mutations used.
    pub fn malformed_markup(&mut self) -> (String, Vec<Mutation>) {
        let spec = TreeSpec { sections: 1..=4, items: 1..=3, paragraph_words: 3..=30, adversarial_rate: 0.0, ..TreeSpec::default() };
        let tree = self.random_tree("m", &spec);
        let xml = crate::xml_codec::serialize(&tree, &crate::xml_codec::SkipPolicy::default(), true).map(|s| s.text).unwrap_or_default();
        let mut lines: Vec<String> = xml.lines().map(str::to_string).collect();
        let n = self.rng.random_range(1..=3);
        let mut applied = Vec::with_capacity(n);
        for _ in 0..n {
            let m = *Mutation::ALL.choose(&mut self.rng).expect("non-empty");
            self.mutate(&mut lines, m);
            applied.push(m);
        }
        (lines.join("\n"), applied)
    }

    fn mutate(&mut self, lines: &mut Vec<String>, m: Mutation) {
        let closes: Vec<usize> = (0..lines.len()).filter(|&i| lines[i].starts_with("</")).collect();
        let at = |s: &mut Self, len: usize| s.rng.random_range(0..=len);
        match m {
            Mutation::DropClose => {
                if let Some(&i) = closes.choose(&mut self.rng) {
                    lines.remove(i);
                }
            }
            Mutation::OrphanClose => {
                let t = self.title();
                let tag = if self.rng.random_bool(0.5) { format!("</section: {t}>") } else { "</abstract>".into() };
                let i = at(self, lines.len());
                lines.insert(i, tag);
            }
            Mutation::UnknownTag => {
                let tag = *["<b>", "</i>", "<table>", "<ref name=x>", "<p>", "<section-break>"].choose(&mut self.rng).expect("non-empty");
                let i = at(self, lines.len());
                lines.insert(i, format!("{tag} {}", self.word()));
            }
            Mutation::TagLikeText => {
                let frag = *["1 < 2", "a <- b", "x<y>z", "<< quoted >>", "if a<b then"].choose(&mut self.rng).expect("non-empty");
                let i = at(self, lines.len());
                lines.insert(i, frag.to_string());
            }
            Mutation::WrongCloseTitle => {
                let named: Vec<usize> = closes.iter().copied().filter(|&i| lines[i].contains(':')).collect();
                if let Some(&i) = named.choose(&mut self.rng) {
                    let head = lines[i].split(':').next().unwrap_or("</section").to_string();
                    lines[i] = format!("{head}: {}>", self.title());
                }
            }
            Mutation::Truncate => {
                if lines.len() > 2 {
                    let keep = self.rng.random_range(1..lines.len());
                    lines.truncate(keep);
                }
            }
            Mutation::LateAbstract => {
                let i = at(self, lines.len());
                let p = self.paragraph(6);
                lines.splice(i..i, ["<abstract>".to_string(), p, "</abstract>".to_string()]);
            }
            Mutation::SubsectionOutsideSection => {
                let t = self.title();
                let p = self.paragraph(5);
                lines.splice(0..0, [format!("<subsection: {t}>"), p, format!("</subsection: {t}>")]);
            }
            Mutation::TextOutsideBlocks => {
                let p = self.paragraph(7);
                lines.push(p);
            }
            Mutation::MissingTitle => {
                if let Some(i) = (0..lines.len()).find(|&i| lines[i].starts_with("<section:")) {
                    lines[i] = "<section>".into();
                }
            }
        }
    }
}

/// Facts planted in one fixture document.
#[derive(Debug, Clone)]
pub struct Facts {
    pub entity: String,
    pub founder: String,
    pub year: u32,
    pub river: String,
    pub population: u32,
    pub export: String,
}

#[derive(Debug, Clone, Default)]
pub struct Fixture {
    pub docs: Vec<DocumentRecord>,
    pub queries: Vec<QueryRecord>,
}

impl Synth {
    fn facts(&mut self) -> Facts {
        Facts {
            entity: self.name(),
            founder: format!("{} {}", self.name(), self.name()),
            year: self.rng.random_range(1700..=1990),
            river: self.name(),
            population: self.rng.random_range(1_000..=900_000),
            export: self.word(),
        }
    }

    /// Wiki-style plain text about one place: a lead and topic paragraphs
    /// separated by blank lines, with the facts spread over the body.
    fn fixture_text(&mut self, f: &Facts) -> String {
        let e = &f.entity;
        let mut planted = [
            format!("{e} was founded in {} by {}.", f.year, f.founder),
            format!("The population of {e} was {} at the last census.", f.population),
            format!("The {} river flows through {e}.", f.river),
            format!("The economy of {e} depends on {} and its trade.", f.export),
        ]
        .map(Some);
        let lead = self.rng.random_range(30..=60);
        let mut paragraphs = vec![format!("{e} is a town. {}", self.paragraph(lead))];
        let n = self.rng.random_range(9..=15);
        let slots: Vec<usize> = {
            let mut s: Vec<usize> = (0..n).collect();
            let (picked, _) = s.partial_shuffle(&mut self.rng, planted.len());
            picked.to_vec()
        };
        for i in 0..n {
            let topic = self.pick(SECTION_TOPICS);
            let len = self.rng.random_range(50..=140);
            let body = self.paragraph(len);
            let mut p = format!("{topic} of {e}. {body}");
            if let Some(k) = slots.iter().position(|&s| s == i) {
                let fact = planted[k].take().unwrap_or_default();
                let cut = self.rng.random_range(0..=1);
                p = if cut == 0 { format!("{topic} of {e}. {fact} {body}") } else { format!("{p} {fact}") };
            }
            paragraphs.push(p);
        }
        paragraphs.join("\n\n")
    }

    fn queries_for(&mut self, f: &Facts, source_id: &str, others: &[String], qn: &mut usize) -> Vec<QueryRecord> {
        let e = &f.entity;
        let rows = [
            (format!("When was {e} founded?"), f.year.to_string()),
            (format!("Who founded {e}?"), f.founder.clone()),
            (format!("What is the population of {e}?"), f.population.to_string()),
            (format!("Which river flows through {e}?"), f.river.clone()),
            (format!("Summarize the economy of {e}."), f.export.clone()),
        ];
        rows.into_iter()
            .map(|(query, answer)| {
                *qn += 1;
                let mut doc_ids = vec![source_id.to_string()];
                let extra = self.rng.random_range(0..=2).min(others.len());
                doc_ids.extend(others.choose_multiple(&mut self.rng, extra).cloned());
                let rank = self.rng.random_range(0..doc_ids.len());
                doc_ids.swap(0, rank);
                QueryRecord { query_id: format!("q{:04}", *qn), query, doc_ids, golden_answers: vec![answer] }
            })
            .collect()
    }

    /// `n_docs` documents with five planted-answer queries each. Queries list
    /// their document among up to two distractors, in random rank order.
    pub fn fixture(&mut self, n_docs: usize) -> Fixture {
        let ids: Vec<String> = (0..n_docs).map(|i| format!("doc{i:03}")).collect();
        let mut fx = Fixture::default();
        let mut qn = 0;
        for id in &ids {
            let facts = self.facts();
            let text = self.fixture_text(&facts);
            let others: Vec<String> = ids.iter().filter(|o| *o != id).cloned().collect();
            let qs = self.queries_for(&facts, id, &others, &mut qn);
            fx.docs.push(DocumentRecord { source_id: id.clone(), text });
            fx.queries.extend(qs);
        }
        fx
    }
}
