//! Regenerates the synthetic parts of `fixtures/`.
//!
//! cargo run -p docrefine-cli --example make_fixtures [-- <fixtures-dir>]

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use docrefine::records::{write_jsonl, DocumentRecord, QueryRecord};
use docrefine::synth::Synth;
use serde_json::json;

const SEED: u64 = 20_150_731;

fn case_study_queries() -> Vec<QueryRecord> {
    let rows = [
        ("When did Bunk'd premiere on Disney Channel?", "July 31, 2015", vec!["bunkd"]),
        ("Who founded Camp Kikiwaka?", "Jedediah Swearengen", vec!["bunkd", "doc003"]),
        ("When was Bunk'd renewed for a fourth season?", "November 15, 2018", vec!["bunkd"]),
        ("Which actress said she was leaving Disney?", "Skai Jackson", vec!["doc011", "bunkd"]),
        ("Summarize the production of Bunk'd.", "fourth season", vec!["bunkd"]),
    ];
    rows.into_iter()
        .enumerate()
        .map(|(i, (q, a, ids))| QueryRecord {
            query_id: format!("case{}", i + 1),
            query: q.into(),
            doc_ids: ids.into_iter().map(String::from).collect(),
            golden_answers: vec![a.into()],
        })
        .collect()
}

fn main() -> std::io::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("fixtures"));
    fs::create_dir_all(dir.join("malformed"))?;
    let mut synth = Synth::new(SEED);

    let mut fx = synth.fixture(20);
    let case = fs::read_to_string(dir.join("case_study/document.txt"))?;
    fx.docs.push(DocumentRecord { source_id: "bunkd".into(), text: case.trim_end().to_string() });
    fx.queries.extend(case_study_queries());
    write_jsonl(BufWriter::new(File::create(dir.join("docs.jsonl"))?), &fx.docs)?;
    write_jsonl(BufWriter::new(File::create(dir.join("queries.jsonl"))?), &fx.queries)?;

    let pages: Vec<_> = (0..30).map(|i| synth.wiki_page(&format!("page{i:03}"), 60..=250)).collect();
    write_jsonl(BufWriter::new(File::create(dir.join("pages.jsonl"))?), &pages)?;

    let cases: Vec<_> = (0..200)
        .map(|i| {
            let (markup, mutations) = synth.malformed_markup();
            let names: Vec<String> = mutations.iter().map(|m| format!("{m:?}")).collect();
            json!({ "id": format!("m{i:03}"), "mutations": names, "markup": markup })
        })
        .collect();
    write_jsonl(BufWriter::new(File::create(dir.join("malformed/cases.jsonl"))?), &cases)?;
    eprintln!("wrote {} docs, {} queries, {} pages, {} malformed cases", fx.docs.len(), fx.queries.len(), pages.len(), cases.len());
    Ok(())
}
