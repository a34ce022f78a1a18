use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{assemble, select_with, Budget, CostModel, SelectionTrace};
use crate::doctree::{DocTree, NodeId, PARAGRAPH_SEPARATOR};
use crate::providers::{LeafScorer, ProviderError, SectionSelector};
use crate::query_analysis::QueryAnalysis;
use crate::scoring::{query_providers, score_tree, ProviderScores};
use crate::tokens::TokenCounter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineOptions {
    pub budget: Budget,
    pub stop_on_first_overflow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocRefinement {
    pub source_id: String,
    pub selected: Vec<NodeId>,
    pub context: String,
    pub tokens: usize,
    pub source_tokens: usize,
    pub budget: usize,
    pub trace: SelectionTrace,
}

/// Output record of one query. `context` is the concatenation of the
/// per-document contexts, each behind a header when several documents are
/// refined together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResult {
    pub query_id: String,
    /// Selected node ids per source id.
    pub selected_ids: BTreeMap<String, Vec<NodeId>>,
    pub context: String,
    pub tokens: usize,
    pub source_tokens: usize,
    /// `source_tokens / tokens`; absent when nothing was selected.
    pub gamma: Option<f64>,
    /// Wall time including provider calls.
    pub latency_ms: f64,
    /// Wall time of scoring propagation, selection and assembly only.
    pub engine_latency_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<DocRefinement>>,
}

pub fn document_header(rank: usize, source_id: &str) -> String {
    format!("[Document {rank}: {source_id}]")
}

/// Per-document budgets: what remains after reserving headers is split in
/// proportion to each document's token count, rounding down.
pub fn share_budget(budget: usize, masses: &[usize], header_cost: usize) -> Vec<usize> {
    if masses.len() <= 1 {
        return vec![budget; masses.len()];
    }
    let effective = budget.saturating_sub(header_cost) as u128;
    let total: u128 = masses.iter().map(|&m| m as u128).sum();
    masses.iter().map(|&m| (effective * m as u128).checked_div(total).unwrap_or(effective / masses.len() as u128) as usize).collect()
}

/// Scores, selects and assembles each tree against its budget share. Provider
/// outputs must already be available.
pub fn refine_scored(
    trees: &[&DocTree],
    provided: &[ProviderScores],
    analysis: &QueryAnalysis,
    counter: &dyn TokenCounter,
    options: &RefineOptions,
) -> (Vec<DocRefinement>, String, usize) {
    assert_eq!(trees.len(), provided.len());
    let multi = trees.len() > 1;
    let headers: Vec<String> = trees.iter().enumerate().map(|(i, t)| document_header(i + 1, &t.source_id)).collect();
    let header_cost = if multi {
        headers.iter().map(|h| counter.count(h)).sum::<usize>() + (2 * trees.len() - 1) * counter.count(PARAGRAPH_SEPARATOR)
    } else {
        0
    };
    let masses: Vec<usize> = trees.iter().map(|t| counter.count(&t.source_text)).collect();
    let shares = share_budget(options.budget.max_tokens, &masses, header_cost);

    let mut docs = Vec::with_capacity(trees.len());
    let mut parts = Vec::new();
    for (i, tree) in trees.iter().enumerate() {
        let scores = score_tree(tree, &provided[i], analysis.r_q);
        let costs = CostModel::new(tree, counter);
        let sel = match Budget::new(shares[i]) {
            Some(b) => select_with(tree, &scores.combined, b, &costs, options.stop_on_first_overflow),
            None => {
                super::Selection { selected: vec![false; tree.len()], tokens: 0, trace: SelectionTrace { steps: Vec::new(), empty: true } }
            }
        };
        let context = assemble(tree, &sel.selected);
        if !context.is_empty() {
            parts.push(if multi { format!("{}{PARAGRAPH_SEPARATOR}{context}", headers[i]) } else { context.clone() });
        }
        docs.push(DocRefinement {
            source_id: tree.source_id.clone(),
            selected: sel.ids(),
            context,
            tokens: sel.tokens,
            source_tokens: masses[i],
            budget: shares[i],
            trace: sel.trace,
        });
    }
    let context = parts.join(PARAGRAPH_SEPARATOR);
    let tokens = counter.count(&context);
    (docs, context, tokens)
}

/// Full online refinement of one query over one or more structured documents.
pub fn refine(
    trees: &[&DocTree],
    query: &str,
    analysis: &QueryAnalysis,
    scorer: &dyn LeafScorer,
    selector: &dyn SectionSelector,
    counter: &dyn TokenCounter,
    options: &RefineOptions,
) -> Result<RefineResult, ProviderError> {
    let start = Instant::now();
    let provided: Vec<ProviderScores> = trees.par_iter().map(|t| query_providers(t, query, scorer, selector)).collect::<Result<_, _>>()?;
    let engine_start = Instant::now();
    let (docs, context, tokens) = refine_scored(trees, &provided, analysis, counter, options);
    let engine = engine_start.elapsed();
    let source_tokens = docs.iter().map(|d| d.source_tokens).sum();
    Ok(RefineResult {
        query_id: String::new(),
        selected_ids: docs.iter().map(|d| (d.source_id.clone(), d.selected.clone())).collect(),
        context,
        tokens,
        source_tokens,
        gamma: (tokens > 0).then(|| source_tokens as f64 / tokens as f64),
        latency_ms: ms(start.elapsed()),
        engine_latency_ms: ms(engine),
        trace: Some(docs),
    })
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}
