//! Shared inputs for the criterion benches.

use docrefine::providers::{structure_document, StubLevelProvider, StubStructurer};
use docrefine::scoring::{query_providers, Bm25, JaccardSelector, ProviderScores};
use docrefine::synth::Synth;
use docrefine::{analyze, parse, restore, DocTree, QueryAnalysis, ScopeMode, SkipPolicy};

pub const QUERY: &str = "When was the company founded and who founded it?";

/// One structured document of `words` words with everything the online path
/// needs precomputed.
pub struct Input {
    pub text: String,
    pub xml: String,
    pub tree: DocTree,
    pub provided: ProviderScores,
    pub analysis: QueryAnalysis,
}

pub fn input(words: usize, seed: u64) -> Input {
    let mut synth = Synth::new(seed);
    let fx = synth.fixture(1);
    let text = synth.pad(&fx.docs[0].text, words);
    let policy = SkipPolicy::default();
    let xml = structure_document(&StubStructurer { policy, ..Default::default() }, &text).expect("stub structurer").xml;
    let parsed = parse(&xml).expect("stub markup parses");
    let (tree, _) = restore(&parsed.doc, &text, "bench", &policy);
    let provided = query_providers(&tree, QUERY, &Bm25::default(), &JaccardSelector::default()).expect("stub providers");
    let analysis = analyze(QUERY, &StubLevelProvider, ScopeMode::default()).expect("stub analysis");
    Input { text, xml, tree, provided, analysis }
}
