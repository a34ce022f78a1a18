//! Token counting and whitespace tokenization.
//!
//! Every counter works word by word over whitespace-delimited words, so counts
//! are additive across texts joined by whitespace.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

/// A whitespace-delimited word located in its source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordSpan<'a> {
    pub text: &'a str,
    /// Byte offset of the first byte.
    pub start: usize,
    /// Byte offset one past the last byte.
    pub end: usize,
}

/// Splits `text` into whitespace-delimited words with their byte offsets.
pub fn word_spans(text: &str) -> Vec<WordSpan<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(WordSpan { text: &text[s..i], start: s, end: i });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(WordSpan { text: &text[s..], start: s, end: text.len() });
    }
    out
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Collapses every whitespace run to a single space and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for w in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(w);
    }
    out
}

pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;

    /// Scheme identifier, as accepted by [`TokenizerKind::from_str`].
    fn scheme(&self) -> String;
}

/// Counts whitespace-delimited words.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordCounter;

impl TokenCounter for WordCounter {
    fn count(&self, text: &str) -> usize {
        word_count(text)
    }

    fn scheme(&self) -> String {
        "words".to_string()
    }
}

/// Subword counter over a fixed vocabulary.
///
/// Each word is segmented by greedy longest match against the vocabulary;
/// characters not covered by any entry count as one token each.
#[derive(Debug, Clone)]
pub struct VocabCounter {
    vocab: HashSet<String>,
    max_piece_chars: usize,
    source: String,
}

impl VocabCounter {
    pub fn from_entries<I, S>(entries: I, source: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let vocab: HashSet<String> = entries.into_iter().map(Into::into).filter(|e: &String| !e.is_empty()).collect();
        let max_piece_chars = vocab.iter().map(|e| e.chars().count()).max().unwrap_or(1);
        Self { vocab, max_piece_chars, source: source.into() }
    }

    /// Loads a vocabulary file with one entry per line. A trailing tab-separated
    /// column (for example a merge rank or id) is ignored.
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let raw = fs::read_to_string(path)?;
        let entries = raw.lines().map(|l| l.split('\t').next().unwrap_or("").trim_end_matches('\r').to_string());
        Ok(Self::from_entries(entries, path.display().to_string()))
    }

    fn count_word(&self, word: &str) -> usize {
        let chars: Vec<(usize, char)> = word.char_indices().collect();
        let mut i = 0;
        let mut n = 0;
        while i < chars.len() {
            let mut step = 1;
            let longest = self.max_piece_chars.min(chars.len() - i);
            for len in (1..=longest).rev() {
                let start = chars[i].0;
                let end = chars.get(i + len).map_or(word.len(), |c| c.0);
                if self.vocab.contains(&word[start..end]) {
                    step = len;
                    break;
                }
            }
            i += step;
            n += 1;
        }
        n
    }
}

impl TokenCounter for VocabCounter {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().map(|w| self.count_word(w)).sum()
    }

    fn scheme(&self) -> String {
        format!("bpe:{}", self.source)
    }
}

/// Parsed `--tokenizer` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenizerKind {
    Words,
    Vocab(String),
}

impl TokenizerKind {
    pub fn build(&self) -> std::io::Result<Box<dyn TokenCounter>> {
        match self {
            TokenizerKind::Words => Ok(Box::new(WordCounter)),
            TokenizerKind::Vocab(path) => Ok(Box::new(VocabCounter::load(Path::new(path))?)),
        }
    }
}

impl FromStr for TokenizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "words" {
            Ok(TokenizerKind::Words)
        } else if let Some(path) = s.strip_prefix("bpe:") {
            if path.is_empty() {
                Err("bpe tokenizer needs a vocabulary path: bpe:<path>".to_string())
            } else {
                Ok(TokenizerKind::Vocab(path.to_string()))
            }
        } else {
            Err(format!("unknown tokenizer `{s}` (expected `words` or `bpe:<vocab-path>`)"))
        }
    }
}

impl fmt::Display for TokenizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenizerKind::Words => f.write_str("words"),
            TokenizerKind::Vocab(p) => write!(f, "bpe:{p}"),
        }
    }
}
