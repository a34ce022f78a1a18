//! Line-delimited JSON input records.

use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub source_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: String,
    pub query: String,
    /// Retrieved documents in rank order.
    pub doc_ids: Vec<String>,
    #[serde(default)]
    pub golden_answers: Vec<String>,
}

/// Reads one JSON value per non-blank line. Errors carry the 1-based line.
pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> io::Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(mut writer: impl Write, items: &[T]) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_skips_blank_lines() {
        let q = QueryRecord { query_id: "q1".into(), query: "who".into(), doc_ids: vec!["d".into()], golden_answers: vec![] };
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[q.clone(), q.clone()]).unwrap();
        buf.extend_from_slice(b"\n  \n");
        let back: Vec<QueryRecord> = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, vec![q.clone(), q]);
    }

    #[test]
    fn bad_line_is_reported_with_its_number() {
        let err = read_jsonl::<DocumentRecord>(&b"{\"source_id\":\"a\",\"text\":\"\"}\n{oops\n"[..]).unwrap_err();
        assert!(err.to_string().starts_with("line 2"));
    }

    #[test]
    fn missing_answers_default_to_empty() {
        let q: QueryRecord = serde_json::from_str(r#"{"query_id":"a","query":"b","doc_ids":[]}"#).unwrap();
        assert!(q.golden_answers.is_empty());
    }
}
