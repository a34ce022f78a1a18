//! Hand-written structured markup for a real article, aligned back onto the
//! article and refined.

use std::fs;
use std::path::PathBuf;

use docrefine::budget_select::assemble;
use docrefine::doctree::NodeKind;
use docrefine::providers::StubLevelProvider;
use docrefine::scoring::{Bm25, JaccardSelector};
use docrefine::{analyze, parse, refine, restore, Budget, RefineOptions, ScopeMode, SkipPolicy, WordCounter};

fn read(name: &str) -> String {
    fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/case_study").join(name)).unwrap()
}

fn tree() -> docrefine::DocTree {
    let parsed = parse(&read("markup.xml")).unwrap();
    let (tree, report) = restore(&parsed.doc, &read("document.txt"), "bunkd", &SkipPolicy::default());
    assert_eq!(report.failed, 0, "{report:?}");
    assert!(tree.validate().is_empty());
    tree
}

#[test]
fn markup_parses_with_subsection_alias_and_no_repairs() {
    let parsed = parse(&read("markup.xml")).unwrap();
    assert!(parsed.repairs.is_empty(), "{:?}", parsed.repairs);
}

#[test]
fn every_paragraph_aligns_despite_fragment_boundaries() {
    let t = tree();
    let outline = t.outline();
    assert_eq!(outline.titles, ["Plot", "Cast", "Production", "Broadcast"]);
    assert!(outline.abstract_text.starts_with("Bunk'd is an American comedy"));
    let subsections: Vec<&str> = t.nodes.iter().filter(|n| n.kind == NodeKind::Subsection).filter_map(|n| n.title.as_deref()).collect();
    assert_eq!(subsections, ["Main cast", "Season 2", "Season 3", "Season 4"]);
    let season4 = t.nodes.iter().find(|n| n.title.as_deref() == Some("Season 4")).unwrap();
    let last = t.node(*season4.children.last().unwrap()).content.clone().unwrap();
    assert!(last.starts_with("On November 15, 2018"), "{last}");
}

#[test]
fn full_selection_reproduces_every_paragraph() {
    let t = tree();
    let text = assemble(&t, &vec![true; t.len()]);
    for leaf in t.leaves() {
        assert!(text.contains(t.node(leaf).content.as_deref().unwrap()));
    }
}

#[test]
fn small_budget_keeps_the_answer() {
    let t = tree();
    let query = "When was Bunk'd renewed for a fourth season?";
    let analysis = analyze(query, &StubLevelProvider, ScopeMode::default()).unwrap();
    let options = RefineOptions { budget: Budget::new(120).unwrap(), stop_on_first_overflow: true };
    let r = refine(&[&t], query, &analysis, &Bm25::default(), &JaccardSelector::default(), &WordCounter, &options).unwrap();
    assert!(r.tokens <= 120);
    assert!(r.context.contains("November 15, 2018"), "{}", r.context);
}
