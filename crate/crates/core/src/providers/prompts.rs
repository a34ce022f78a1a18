//! Prompt templates sent by the HTTP provider.
//!
//! Placeholders are `{query}`, `{document}`, `{abstract}`, `{outline}` and
//! `{demonstrations}`. Servers running fine-tuned adapters usually expect the
//! exact prompts the adapters were trained on; load those with
//! [`Prompts::from_dir`].

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const LEVEL_TEMPLATE: &str = "\
You analyse search queries step by step.

Decide how much of a document is needed to answer the query below and label it [Local] or [Global].
- [Global]: answering needs broad or loosely bounded knowledge, such as a summary or an open-ended question, and may need the document as a whole.
- [Local]: the answer is specific and fixed, such as a fact, and a few short passages are enough.

Reply in JSON with the key query_type set to [Local] or [Global].

{demonstrations}
Query: {query}
Results:
";

pub const SELECT_TEMPLATE: &str = "\
You are given a question, the abstract of a document, and the document outline listing its section and subsection titles.

Read the abstract and the outline, then list every part that helps answer the question. Give the titles exactly as they appear in the outline, or `abstract`.

{demonstrations}
Document abstract: {abstract}
Document outline: {outline}
Question: {query}
Output:
";

pub const STRUCTURE_TEMPLATE: &str = "\
Rewrite the document below as a hierarchy using these tags:
<abstract> </abstract> around the lead, <section: title> </section: title> around each section, <subsection: title> </subsection: title> inside sections, <br> between paragraphs.
For each paragraph copy only its first and last {k} words with <skip> in between.

Document:
{document}

Structured document:
";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompts {
    pub level: String,
    pub select: String,
    pub structure: String,
    pub demonstrations: String,
}

impl Default for Prompts {
    fn default() -> Self {
        Self {
            level: LEVEL_TEMPLATE.to_string(),
            select: SELECT_TEMPLATE.to_string(),
            structure: STRUCTURE_TEMPLATE.to_string(),
            demonstrations: String::new(),
        }
    }
}

impl Prompts {
    /// Reads `level.txt`, `select.txt`, `structure.txt` and
    /// `demonstrations.txt` from `dir`; missing files keep the defaults.
    pub fn from_dir(dir: &Path) -> io::Result<Self> {
        let mut p = Self::default();
        for (name, slot) in [
            ("level.txt", &mut p.level),
            ("select.txt", &mut p.select),
            ("structure.txt", &mut p.structure),
            ("demonstrations.txt", &mut p.demonstrations),
        ] {
            match fs::read_to_string(dir.join(name)) {
                Ok(s) => *slot = s,
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(e),
            }
        }
        Ok(p)
    }

    pub fn level_prompt(&self, query: &str) -> String {
        self.level.replace("{demonstrations}", &self.demonstrations).replace("{query}", query)
    }

    pub fn select_prompt(&self, query: &str, abstract_text: &str, titles: &[String]) -> String {
        self.select
            .replace("{demonstrations}", &self.demonstrations)
            .replace("{abstract}", abstract_text)
            .replace("{outline}", &titles.join("; "))
            .replace("{query}", query)
    }

    pub fn structure_prompt(&self, document: &str, k: usize) -> String {
        self.structure.replace("{k}", &k.to_string()).replace("{document}", document)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholders_are_filled() {
        let p = Prompts::default();
        let s = p.select_prompt("why?", "An abstract.", &["Plot".into(), "Cast".into()]);
        assert!(s.contains("Document outline: Plot; Cast\n"));
        assert!(s.contains("Question: why?\n"));
        assert!(!p.level_prompt("q").contains('{'));
        assert!(p.structure_prompt("D", 5).contains("first and last 5 words"));
    }

    #[test]
    fn directory_overrides_single_templates() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("level.txt"), "Q={query}").unwrap();
        let p = Prompts::from_dir(dir.path()).unwrap();
        assert_eq!(p.level_prompt("x"), "Q=x");
        assert_eq!(p.select, SELECT_TEMPLATE);
    }
}
