//! Node scoring: local scores from leaf relevance averaged upward, global
//! scores from selected sections split equally downward, and their
//! combination weighted by the query's global weight `r_q`.

mod bm25;
mod selector;

use std::collections::HashSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::doctree::{DocTree, NodeId, NodeKind};
use crate::providers::{LeafScorer, Normalization, ProviderError, SectionSelector};

pub use bm25::{terms, Bm25};
pub use selector::{content_words, jaccard, JaccardSelector};

pub const ABSTRACT_KEY: &str = "abstract";

/// Per-node scores indexed by node id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeScores {
    pub ls: Vec<f64>,
    pub gs: Vec<f64>,
    pub combined: Vec<f64>,
}

pub fn normalize(raw: &[f64], mode: Normalization) -> Vec<f64> {
    match mode {
        Normalization::Identity => raw.to_vec(),
        Normalization::Logistic => raw.iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect(),
        Normalization::MinMax => {
            let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
            let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max > min {
                raw.iter().map(|x| (x - min) / (max - min)).collect()
            } else {
                // all equal: relevant everywhere or nowhere
                let v = if max > 0.0 { 1.0 } else { 0.0 };
                vec![v; raw.len()]
            }
        }
    }
}

/// Mean of `values`, summed in sorted order so the result does not depend on
/// sibling order.
fn order_free_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Local scores for every node given one score per leaf (in
/// [`DocTree::leaves`] order). Internal nodes get the mean of their children;
/// an internal node without children gets 0.
pub fn propagate_local(tree: &DocTree, leaf_scores: &[f64]) -> Vec<f64> {
    let leaves = tree.leaves();
    assert_eq!(leaves.len(), leaf_scores.len(), "one score per leaf");
    let mut ls = vec![0.0; tree.len()];
    for (&leaf, &s) in leaves.iter().zip(leaf_scores) {
        ls[leaf] = s;
    }
    // children have larger pre-order ids than their parent
    for id in (0..tree.len()).rev() {
        let node = tree.node(id);
        if node.kind == NodeKind::Paragraph {
            continue;
        }
        if node.children.is_empty() {
            tracing::debug!(node = id, "internal node without children scores 0");
            continue;
        }
        let mut vals: Vec<f64> = node.children.iter().map(|&c| ls[c]).collect();
        ls[id] = order_free_mean(&mut vals);
    }
    ls
}

/// Resolves selector output to Section/Abstract node ids. Matching ignores
/// case and surrounding whitespace; unknown titles are dropped.
pub fn match_titles(tree: &DocTree, titles: &[String]) -> HashSet<NodeId> {
    let mut out = HashSet::new();
    for t in titles {
        let want = t.trim().to_lowercase();
        let mut found = false;
        for id in tree.sections() {
            let node = tree.node(id);
            let hit = match node.kind {
                NodeKind::Abstract => want == ABSTRACT_KEY,
                _ => node.title.as_deref().is_some_and(|nt| nt.trim().to_lowercase() == want),
            };
            if hit {
                out.insert(id);
                found = true;
            }
        }
        if !found {
            tracing::warn!(title = %t, "selected title not found in tree; ignored");
        }
    }
    out
}

/// Global scores: 1 on selected Section/Abstract nodes, each node's score
/// split equally among its children.
pub fn propagate_global(tree: &DocTree, selected: &HashSet<NodeId>) -> Vec<f64> {
    let mut gs = vec![0.0; tree.len()];
    for id in tree.preorder() {
        let node = tree.node(id);
        if matches!(node.kind, NodeKind::Section | NodeKind::Abstract) {
            gs[id] = if selected.contains(&id) { 1.0 } else { 0.0 };
        }
        if node.kind != NodeKind::Root && !node.children.is_empty() {
            let share = gs[id] / node.children.len() as f64;
            for &c in &node.children {
                gs[c] = share;
            }
        }
    }
    gs
}

pub fn combine(ls: Vec<f64>, gs: Vec<f64>, r_q: f64) -> NodeScores {
    let combined = ls.iter().zip(&gs).map(|(l, g)| l + r_q * g).collect();
    NodeScores { ls, gs, combined }
}

/// Raw provider outputs for one (query, tree) pair.
#[derive(Debug, Clone)]
pub struct ProviderScores {
    pub leaf_raw: Vec<f64>,
    pub normalization: Normalization,
    pub selected_titles: Vec<String>,
    pub elapsed: Duration,
}

/// Calls the leaf scorer and section selector in parallel.
pub fn query_providers(
    tree: &DocTree,
    query: &str,
    scorer: &dyn LeafScorer,
    selector: &dyn SectionSelector,
) -> Result<ProviderScores, ProviderError> {
    let start = Instant::now();
    let leaves = tree.leaves();
    let texts: Vec<&str> = leaves.iter().map(|&l| tree.node(l).content.as_deref().unwrap_or("")).collect();
    let outline = tree.outline();
    let (leaf_raw, selected) = rayon::join(|| scorer.score(query, &texts), || selector.select(query, &outline));
    let leaf_raw = leaf_raw?;
    if leaf_raw.len() != texts.len() {
        return Err(ProviderError::BadResponse(format!("{} scores for {} leaves", leaf_raw.len(), texts.len())));
    }
    let selected_titles = match selected {
        Ok(t) => t,
        Err(ProviderError::UnparseableSelection(s)) => {
            tracing::warn!(output = %s, "unparseable section selection; using none");
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    Ok(ProviderScores { leaf_raw, normalization: scorer.normalization(), selected_titles, elapsed: start.elapsed() })
}

/// Engine half of scoring: normalization, propagation and combination.
pub fn score_tree(tree: &DocTree, provided: &ProviderScores, r_q: f64) -> NodeScores {
    let leaf = normalize(&provided.leaf_raw, provided.normalization);
    let ls = propagate_local(tree, &leaf);
    let gs = propagate_global(tree, &match_titles(tree, &provided.selected_titles));
    combine(ls, gs, r_q)
}
